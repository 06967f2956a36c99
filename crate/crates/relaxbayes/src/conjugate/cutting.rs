//! Gradient of the biconjugate for convex losses by a cutting-plane model.
//!
//! The loss is replaced by the maximum of its tangent planes at `L` anchors,
//! so that `f*(lambda')` is the maximum over anchors of
//! `-(lambda'_1 + g_i)^T lambda'_2^{-1} (lambda'_1 + g_i) / 4 + l_i - <g_i, theta_i>`.
//! `grad f**(mu)` is the `lambda'` minimizing `c - <lambda', mu>` subject to
//! `c >= ` each of those terms, solved here with a log-barrier Newton method.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;

use super::coords::ExpFamCoords;
use crate::error::{check_len, Error, Result};
use crate::rng::normal_vec;

/// Tangent planes `l_i + <g_i, theta - theta_i>` of a convex loss.
#[derive(Debug, Clone, PartialEq)]
pub struct CuttingPlaneModel {
    pub anchors: Vec<DVector<f64>>,
    pub values: Vec<f64>,
    pub gradients: Vec<DVector<f64>>,
}

impl CuttingPlaneModel {
    pub fn new(anchors: Vec<DVector<f64>>, values: Vec<f64>, gradients: Vec<DVector<f64>>) -> Result<Self> {
        if anchors.is_empty() {
            return Err(Error::Config("cutting-plane model needs at least one anchor".into()));
        }
        let p = anchors[0].len();
        check_len("anchor values", anchors.len(), values.len())?;
        check_len("anchor gradients", anchors.len(), gradients.len())?;
        for (a, g) in anchors.iter().zip(&gradients) {
            check_len("anchor", p, a.len())?;
            check_len("anchor gradient", p, g.len())?;
        }
        if values.iter().chain(gradients.iter().flat_map(|g| g.iter())).any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite loss value or gradient at an anchor".into()));
        }
        Ok(Self { anchors, values, gradients })
    }

    /// Planes of `loss` (returning value and gradient) at `anchors`.
    pub fn from_loss(loss: &dyn Fn(&DVector<f64>) -> (f64, DVector<f64>), anchors: Vec<DVector<f64>>) -> Result<Self> {
        let (values, gradients) = anchors.iter().map(loss).unzip();
        Self::new(anchors, values, gradients)
    }

    pub fn len(&self) -> usize {
        self.anchors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.anchors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.anchors[0].len()
    }

    /// `max_i l_i + <g_i, theta - theta_i>`.
    pub fn eval(&self, theta: &DVector<f64>) -> f64 {
        (0..self.len())
            .map(|i| self.values[i] + self.gradients[i].dot(&(theta - &self.anchors[i])))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn offsets(&self) -> Vec<f64> {
        (0..self.len())
            .map(|i| self.values[i] - self.gradients[i].dot(&self.anchors[i]))
            .collect()
    }

    fn dump(&self) -> String {
        let rows: Vec<String> = (0..self.len())
            .map(|i| {
                format!(
                    "theta={:?} l={} g={:?}",
                    self.anchors[i].as_slice(),
                    self.values[i],
                    self.gradients[i].as_slice()
                )
            })
            .collect();
        rows.join("; ")
    }

    /// The subproblem has an interior optimum only if the gradients affinely span the parameter space.
    fn check_spanning(&self) -> Result<()> {
        let p = self.dim();
        let g0 = &self.gradients[0];
        let diffs = DMatrix::from_fn(p, self.len() - 1, |r, c| self.gradients[c + 1][r] - g0[r]);
        let scale = self.gradients.iter().map(|g| g.amax()).fold(1.0, f64::max);
        let rank = if diffs.ncols() == 0 {
            0
        } else {
            diffs.svd(false, false).rank(1e-9 * scale)
        };
        if rank < p {
            return Err(Error::Numerical(format!(
                "cutting-plane subproblem is unbounded: anchor gradients span an affine set of dimension {rank} < {p}; anchors: {}",
                self.dump()
            )));
        }
        Ok(())
    }
}

/// Optimal dual point of the cutting-plane subproblem.
#[derive(Debug, Clone, PartialEq)]
pub struct CpSolution {
    /// `grad f**(mu)`, first block.
    pub lambda1: DVector<f64>,
    /// `grad f**(mu)`, second block (negative definite).
    pub lambda2: DMatrix<f64>,
    pub c: f64,
    /// `<lambda', mu> - c`, the biconjugate of the plane model at `mu`.
    pub value: f64,
    pub kkt_residual: f64,
    /// Smallest constraint slack; zero for an exactly tight constraint.
    pub min_slack: f64,
}

pub const KKT_TOL: f64 = 1e-6;
const MAX_ROUNDS: usize = 20;
// The first centring can take a few hundred damped steps when many anchors sit far from the start.
const MAX_NEWTON: usize = 1000;
const BOUNDARY_FRACTION: f64 = 1e-2;

/// Variables `[lambda_1 (P), upper triangle of lambda_2, c]`.
struct Layout {
    p: usize,
    pairs: Vec<(usize, usize)>,
}

impl Layout {
    fn new(p: usize) -> Self {
        let pairs = (0..p).flat_map(|j| (j..p).map(move |k| (j, k))).collect();
        Self { p, pairs }
    }

    fn n(&self) -> usize {
        self.p + self.pairs.len() + 1
    }

    fn c(&self) -> usize {
        self.n() - 1
    }

    fn unpack(&self, x: &DVector<f64>) -> (DVector<f64>, DMatrix<f64>, f64) {
        let l1 = x.rows(0, self.p).into_owned();
        let mut l2 = DMatrix::zeros(self.p, self.p);
        for (a, &(j, k)) in self.pairs.iter().enumerate() {
            l2[(j, k)] = x[self.p + a];
            l2[(k, j)] = x[self.p + a];
        }
        (l1, l2, x[self.c()])
    }

    /// `<E_a, B>` for the symmetric basis matrix of entry `a`.
    fn inner(&self, a: usize, b: &DMatrix<f64>) -> f64 {
        let (j, k) = self.pairs[a];
        if j == k {
            b[(j, j)]
        } else {
            b[(j, k)] + b[(k, j)]
        }
    }

    /// `E_a u`.
    fn basis_times(&self, a: usize, u: &DVector<f64>) -> DVector<f64> {
        let (j, k) = self.pairs[a];
        let mut out = DVector::zeros(self.p);
        out[j] += u[k];
        if j != k {
            out[k] += u[j];
        }
        out
    }
}

struct Subproblem<'a> {
    layout: Layout,
    gradients: &'a [DVector<f64>],
    offsets: Vec<f64>,
    /// Linear cost `c - <lambda', mu>` as a vector.
    cost: DVector<f64>,
}

/// Barrier value, gradient and Hessian at a strictly feasible point.
struct Local {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
    slacks: Vec<f64>,
    /// Gradients of `F_i - c`.
    con_grads: Vec<DVector<f64>>,
}

impl<'a> Subproblem<'a> {
    fn new(model: &'a CuttingPlaneModel, coords: &ExpFamCoords) -> Self {
        let p = model.dim();
        let layout = Layout::new(p);
        let (mu1, mu2) = coords.mean_params();
        let mut cost = DVector::zeros(layout.n());
        for j in 0..p {
            cost[j] = -mu1[j];
        }
        for a in 0..layout.pairs.len() {
            cost[p + a] = -layout.inner(a, &mu2);
        }
        cost[layout.c()] = 1.0;
        Self {
            layout,
            gradients: &model.gradients,
            offsets: model.offsets(),
            cost,
        }
    }

    fn local(&self, x: &DVector<f64>, t: f64, second_order: bool) -> Option<Local> {
        let lay = &self.layout;
        let n = lay.n();
        let (l1, l2, c) = lay.unpack(x);
        let m = -l2;
        let chol: Cholesky<f64, Dyn> = Cholesky::new(m)?;
        let minv = chol.inverse();
        // Each constraint is the Schur complement of the LMI
        // [[M, b/2], [b^T/2, c - k]] >= 0, whose barrier is -log det M - log s;
        // summing those keeps the barrier self-concordant.
        let weight = (self.gradients.len() + 1) as f64;
        let logdet: f64 = 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        let mut value = t * self.cost.dot(x) - weight * logdet;
        let mut grad = t * &self.cost;
        // -log det(-lambda_2): gradient tr(M^-1 E_a), Hessian tr(M^-1 E_a M^-1 E_b).
        for a in 0..lay.pairs.len() {
            grad[lay.p + a] += weight * lay.inner(a, &minv);
        }
        let mut hess = DMatrix::zeros(n, n);
        if second_order {
            let cols: Vec<DMatrix<f64>> = lay
                .pairs
                .iter()
                .map(|&(j, k)| {
                    let mut e = DMatrix::zeros(lay.p, lay.p);
                    e[(j, k)] = 1.0;
                    e[(k, j)] = 1.0;
                    &minv * e
                })
                .collect();
            for a in 0..cols.len() {
                for b in 0..cols.len() {
                    hess[(lay.p + a, lay.p + b)] = weight * (&cols[a] * &cols[b]).trace();
                }
            }
        }
        let mut slacks = Vec::with_capacity(self.gradients.len());
        let mut con_grads = Vec::with_capacity(self.gradients.len());
        for (g, k) in self.gradients.iter().zip(&self.offsets) {
            let b = &l1 + g;
            let u = chol.solve(&b);
            let f = 0.25 * b.dot(&u) + k;
            let s = c - f;
            if !(s > 0.0) {
                return None;
            }
            value -= s.ln();
            // grad (F - c): [u/2, u^T E_a u / 4, -1]
            let mut dg = DVector::zeros(n);
            dg.rows_mut(0, lay.p).copy_from(&(0.5 * &u));
            for a in 0..lay.pairs.len() {
                let (j, k) = lay.pairs[a];
                dg[lay.p + a] = if j == k { 0.25 * u[j] * u[j] } else { 0.5 * u[j] * u[k] };
            }
            dg[lay.c()] = -1.0;
            grad += &dg / s;
            if second_order {
                // Hessian of F: J^T M^-1 J / 2 with J = [I, E_a u, 0].
                let mut jac = DMatrix::zeros(lay.p, n);
                jac.columns_mut(0, lay.p).fill_with_identity();
                for a in 0..lay.pairs.len() {
                    jac.set_column(lay.p + a, &lay.basis_times(a, &u));
                }
                hess += (jac.transpose() * &minv * &jac) * (0.5 / s) + &dg * dg.transpose() / (s * s);
            }
            slacks.push(s);
            con_grads.push(dg);
        }
        if !value.is_finite() {
            return None;
        }
        Some(Local { value, grad, hess, slacks, con_grads })
    }

    /// KKT residual: stationarity `|cost + sum_i nu_i grad(F_i - c)|` plus
    /// complementarity `max nu_i s_i`, for the better of two nonnegative
    /// multiplier estimates: the barrier's `1/(t s_i)`, and a least-squares fit
    /// on the nearly active constraints, which stays accurate once the slacks
    /// reach round-off.
    fn kkt(&self, loc: &Local, t: f64) -> f64 {
        let residual = |nu: &[(usize, f64)]| {
            let mut r = self.cost.clone();
            let mut compl: f64 = 0.0;
            for &(i, v) in nu {
                r += &loc.con_grads[i] * v;
                compl = compl.max(v * loc.slacks[i]);
            }
            r.amax().max(compl)
        };
        let barrier: Vec<(usize, f64)> = loc.slacks.iter().enumerate().map(|(i, s)| (i, 1.0 / (t * s))).collect();
        let mut best = residual(&barrier);
        let min_slack = loc.slacks.iter().copied().fold(f64::INFINITY, f64::min);
        let active: Vec<usize> = (0..loc.slacks.len()).filter(|&i| loc.slacks[i] <= 1e3 * min_slack).collect();
        let jac = DMatrix::from_fn(self.cost.len(), active.len(), |r, c| loc.con_grads[active[c]][r]);
        if let Ok(nu) = jac.svd(true, true).solve(&(-&self.cost), 1e-14) {
            if nu.iter().all(|&v| v >= 0.0) {
                let fit: Vec<(usize, f64)> = active.iter().copied().zip(nu.iter().copied()).collect();
                best = best.min(residual(&fit));
            }
        }
        best
    }

    fn newton(&self, x: &mut DVector<f64>, t: f64) -> Result<Local> {
        for _ in 0..MAX_NEWTON {
            let loc = self.local(x, t, true).expect("iterate kept strictly feasible");
            let h = &loc.hess;
            let step = match Cholesky::new(h.clone()) {
                Some(ch) => ch.solve(&(-&loc.grad)),
                None => {
                    let ridge = 1e-12 * h.diagonal().amax().max(1.0);
                    let reg = h + DMatrix::identity(h.nrows(), h.ncols()) * ridge;
                    Cholesky::new(reg)
                        .ok_or_else(|| Error::Numerical("barrier Hessian is not positive definite".into()))?
                        .solve(&(-&loc.grad))
                }
            };
            let decrement = -loc.grad.dot(&step);
            if decrement < 1e-14 {
                return Ok(loc);
            }
            let mut eta = 1.0;
            loop {
                let trial = &*x + eta * &step;
                if let Some(tl) = self.local(&trial, t, false) {
                    // Fraction-to-boundary: a slack driven to round-off stalls Newton for good.
                    let interior = tl.slacks.iter().zip(&loc.slacks).all(|(a, b)| *a >= BOUNDARY_FRACTION * b);
                    if interior && tl.value <= loc.value - 0.25 * eta * decrement {
                        *x = trial;
                        break;
                    }
                }
                eta *= 0.5;
                if eta < 1e-20 {
                    return Ok(loc);
                }
            }
        }
        Ok(self.local(x, t, true).expect("iterate kept strictly feasible"))
    }
}

/// Solve the plane-model subproblem at `coords`; returns `grad f**(mu)` of the model.
pub fn solve_cutting_plane(model: &CuttingPlaneModel, coords: &ExpFamCoords) -> Result<CpSolution> {
    let p = model.dim();
    check_len("coordinates", p, coords.dim())?;
    model.check_spanning()?;
    let sub = Subproblem::new(model, coords);
    let (mu1, mu2) = coords.mean_params();
    let n = sub.layout.n();
    // Start from lambda' = (0, -I/2) with slack one on every constraint.
    let mut x = DVector::zeros(n);
    for a in 0..sub.layout.pairs.len() {
        let (j, k) = sub.layout.pairs[a];
        if j == k {
            x[p + a] = -0.5;
        }
    }
    let worst = model
        .gradients
        .iter()
        .zip(&sub.offsets)
        .map(|(g, k)| 0.5 * g.norm_squared() + k)
        .fold(f64::NEG_INFINITY, f64::max);
    x[sub.layout.c()] = worst + 1.0;
    // Start where the barrier and the cost are of similar size.
    let barrier_terms = (model.len() * (p + 1)) as f64;
    let mut t = barrier_terms / sub.cost.dot(&x).abs().max(1.0);
    for _ in 0..MAX_ROUNDS {
        let loc = sub.newton(&mut x, t)?;
        let kkt = sub.kkt(&loc, t);
        let (l1, l2, c) = sub.layout.unpack(&x);
        let scale = 1.0 + l2.amax();
        if l2.symmetric_eigenvalues().max() > -1e-10 * scale || x.amax() > 1e12 {
            return Err(Error::Numerical(format!(
                "cutting-plane subproblem drifts to the boundary of the natural domain; anchors: {}",
                model.dump()
            )));
        }
        if kkt < KKT_TOL {
            let value = l1.dot(&mu1) + (&l2 * &mu2).trace() - c;
            return Ok(CpSolution {
                lambda1: l1,
                lambda2: l2,
                c,
                value,
                kkt_residual: kkt,
                min_slack: loc.slacks.iter().copied().fold(f64::INFINITY, f64::min),
            });
        }
        t *= 10.0;
    }
    Err(Error::Numerical(format!(
        "cutting-plane subproblem did not reach KKT residual {KKT_TOL}; anchors: {}",
        model.dump()
    )))
}

/// Draw `l` anchors from `coords` and solve the plane-model subproblem for `loss`.
pub fn biconjugate_gradient_cp<R: Rng + ?Sized>(
    loss: &dyn Fn(&DVector<f64>) -> (f64, DVector<f64>),
    coords: &ExpFamCoords,
    l: usize,
    rng: &mut R,
) -> Result<CpSolution> {
    let p = coords.dim();
    let z: Vec<DVector<f64>> = (0..l).map(|_| DVector::from_vec(normal_vec(rng, p))).collect();
    biconjugate_gradient_cp_with(loss, coords, &z)
}

/// As [`biconjugate_gradient_cp`] with anchors `omega + chol(V) z_i` for given standard normals.
pub fn biconjugate_gradient_cp_with(
    loss: &dyn Fn(&DVector<f64>) -> (f64, DVector<f64>),
    coords: &ExpFamCoords,
    z: &[DVector<f64>],
) -> Result<CpSolution> {
    let chol = Cholesky::new(coords.cov_matrix())
        .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
    let l = chol.l();
    let anchors = z.iter().map(|z| &coords.mean + &l * z).collect();
    solve_cutting_plane(&CuttingPlaneModel::from_loss(loss, anchors)?, coords)
}
