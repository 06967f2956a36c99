//! Full-Gaussian Bayesian learning rule for binary logistic regression, in
//! the exact (`lambda0 + grad f`) and relaxed (`lambda0 + grad f**`) variants.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use super::coords::{Covariance, ExpFamCoords};
use super::cutting::biconjugate_gradient_cp;
use crate::error::{check_len, Error, Result};
use crate::nn::Batch;
use crate::posterior::{GaussianPosterior, Prior};
use crate::quadrature::GaussHermite;

/// Summed logistic loss `sum_n log(1 + exp(-s_n <theta, x_n>))` with `s_n = +1`
/// for label 0 and `-1` for label 1, matching a bias-free two-class logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryLogreg {
    inputs: DMatrix<f64>,
    signs: Vec<f64>,
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + exp(-z))` without overflow.
fn softplus_neg(z: f64) -> f64 {
    if z > 0.0 {
        (-z).exp().ln_1p()
    } else {
        -z + z.exp().ln_1p()
    }
}

impl BinaryLogreg {
    pub fn from_batch(batch: &Batch) -> Result<Self> {
        if let Some(&y) = batch.labels.iter().find(|&&y| y > 1) {
            return Err(Error::Domain(format!("binary logistic regression got label {y}")));
        }
        Ok(Self {
            inputs: batch.inputs.clone(),
            signs: batch.labels.iter().map(|&y| if y == 0 { 1.0 } else { -1.0 }).collect(),
        })
    }

    /// Problem without data in `p` dimensions; the loss is identically zero.
    pub fn empty(p: usize) -> Self {
        Self {
            inputs: DMatrix::zeros(0, p),
            signs: Vec::new(),
        }
    }

    pub fn dim(&self) -> usize {
        self.inputs.ncols()
    }

    pub fn len(&self) -> usize {
        self.signs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.signs.is_empty()
    }

    pub fn loss_grad(&self, theta: &DVector<f64>) -> (f64, DVector<f64>) {
        let (l, g, _) = self.eval(theta, false);
        (l, g)
    }

    pub fn loss_grad_hess(&self, theta: &DVector<f64>) -> (f64, DVector<f64>, DMatrix<f64>) {
        self.eval(theta, true)
    }

    fn eval(&self, theta: &DVector<f64>, hessian: bool) -> (f64, DVector<f64>, DMatrix<f64>) {
        let p = self.dim();
        let mut loss = 0.0;
        let mut grad = DVector::zeros(p);
        let mut hess = DMatrix::zeros(p, p);
        for (n, &s) in self.signs.iter().enumerate() {
            let x = self.inputs.row(n).transpose();
            let z = s * theta.dot(&x);
            loss += softplus_neg(z);
            grad -= &x * (s * sigmoid(-z));
            if hessian {
                let w = sigmoid(z) * sigmoid(-z);
                hess += &x * x.transpose() * w;
            }
        }
        (loss, grad, hess)
    }
}

/// `E[h(theta)]` under `N(omega, V)` by a tensor-product Gauss-Hermite rule.
pub fn gaussian_expect<T>(
    coords: &ExpFamCoords,
    order: usize,
    zero: T,
    mut h: impl FnMut(&DVector<f64>, f64, T) -> T,
) -> Result<T> {
    let p = coords.dim();
    if p > 4 {
        return Err(Error::Config(format!("tensor-product quadrature supports P <= 4, got {p}")));
    }
    let chol = Cholesky::new(coords.cov_matrix())
        .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
    let l = chol.l();
    let gh = GaussHermite::cached(order);
    let mut idx = vec![0usize; p];
    let mut acc = zero;
    loop {
        let z = DVector::from_iterator(p, idx.iter().map(|&i| gh.nodes[i]));
        let w: f64 = idx.iter().map(|&i| gh.weights[i]).product();
        acc = h(&(&coords.mean + &l * z), w, acc);
        let mut k = 0;
        loop {
            if k == p {
                return Ok(acc);
            }
            idx[k] += 1;
            if idx[k] < order {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

/// `(E[l], E[grad l], E[hess l])` under `coords`.
pub fn expected_loss_derivatives(
    problem: &BinaryLogreg,
    coords: &ExpFamCoords,
    order: usize,
) -> Result<(f64, DVector<f64>, DMatrix<f64>)> {
    check_len("coordinates", problem.dim(), coords.dim())?;
    let p = problem.dim();
    gaussian_expect(coords, order, (0.0, DVector::zeros(p), DMatrix::zeros(p, p)), |theta, w, (l, g, h)| {
        let (li, gi, hi) = problem.loss_grad_hess(theta);
        (l + w * li, g + gi * w, h + hi * w)
    })
}

/// `grad f(mu)` for `f = -E[l]`: `(E[hess] omega - E[grad], -E[hess]/2)`.
pub fn expected_loss_gradient(
    problem: &BinaryLogreg,
    coords: &ExpFamCoords,
    order: usize,
) -> Result<(DVector<f64>, DMatrix<f64>)> {
    let (_, g, h) = expected_loss_derivatives(problem, coords, order)?;
    Ok((&h * &coords.mean - g, -0.5 * h))
}

/// `E_q[-l] - KL(q || p)`.
pub fn elbo_exact(problem: &BinaryLogreg, prior: &Prior, coords: &ExpFamCoords, order: usize) -> Result<f64> {
    let (l, _, _) = expected_loss_derivatives(problem, coords, order)?;
    Ok(-l - kl(coords, prior)?)
}

fn kl(coords: &ExpFamCoords, prior: &Prior) -> Result<f64> {
    let q = GaussianPosterior::full(coords.mean.iter().copied().collect(), coords.cov_matrix())?;
    Ok(q.kl_to_prior(prior))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlrMode {
    /// `lambda0 + grad f(mu)`
    Bayes,
    /// `lambda0 + grad f**(mu)` from a cutting-plane model
    Relaxed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlrOptions {
    pub alpha: f64,
    pub iters: usize,
    /// Anchors per cutting-plane model in relaxed mode.
    pub anchors: usize,
    pub quadrature_order: usize,
    /// Starting point; the prior when `None`.
    pub init: Option<ExpFamCoords>,
}

impl Default for BlrOptions {
    fn default() -> Self {
        Self {
            alpha: 0.5,
            iters: 60,
            anchors: 64,
            quadrature_order: 20,
            init: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlrRun {
    pub posterior: ExpFamCoords,
    /// `E_q[-l] - KL` after every iteration, starting with the initial point.
    pub elbo_trace: Vec<f64>,
    /// Relaxed mode: `f**(mu) - KL` of the plane model at every iterate; empty otherwise.
    pub relaxed_trace: Vec<f64>,
    /// Step-size halvings forced by leaving the natural domain.
    pub halvings: usize,
}

const MAX_HALVINGS: usize = 60;

/// One step `lambda <- (1 - alpha) lambda + alpha (lambda0 + grad)`, halving
/// `alpha` until the second natural block stays negative definite.
pub fn blr_update(
    coords: &ExpFamCoords,
    prior: &Prior,
    grad: (&DVector<f64>, &DMatrix<f64>),
    alpha: f64,
) -> Result<(ExpFamCoords, usize)> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::Config(format!("learning rate must be in (0, 1], got {alpha}")));
    }
    let p = coords.dim();
    let (l1, l2) = coords.natural_params();
    let target1 = grad.0.clone();
    let target2 = DMatrix::from_diagonal_element(p, p, -0.5 * prior.delta0) + grad.1;
    let mut a = alpha;
    for halvings in 0..MAX_HALVINGS {
        let n1 = &l1 * (1.0 - a) + &target1 * a;
        let n2 = &l2 * (1.0 - a) + &target2 * a;
        let n2 = 0.5 * (&n2 + n2.transpose());
        if let Ok(next) = ExpFamCoords::from_natural(&n1, &n2) {
            return Ok((next, halvings));
        }
        a *= 0.5;
    }
    Err(Error::Numerical(format!("no step of size >= {a} keeps lambda_2 negative definite")))
}

/// Iterate the learning rule from the prior (or `opts.init`).
pub fn blr_full_gaussian<R: Rng + ?Sized>(
    problem: &BinaryLogreg,
    prior: &Prior,
    mode: BlrMode,
    opts: &BlrOptions,
    rng: &mut R,
) -> Result<BlrRun> {
    let p = problem.dim();
    let mut coords = match &opts.init {
        Some(c) => {
            check_len("initial coordinates", p, c.dim())?;
            c.clone()
        }
        None => ExpFamCoords::new(DVector::zeros(p), Covariance::Isotropic(1.0 / prior.delta0))?,
    };
    let order = opts.quadrature_order;
    let mut elbo_trace = vec![elbo_exact(problem, prior, &coords, order)?];
    let mut relaxed_trace = Vec::new();
    let mut halvings = 0;
    let loss = |theta: &DVector<f64>| problem.loss_grad(theta);
    for _ in 0..opts.iters {
        let grad = match mode {
            BlrMode::Bayes => expected_loss_gradient(problem, &coords, order)?,
            BlrMode::Relaxed => {
                let sol = biconjugate_gradient_cp(&loss, &coords, opts.anchors, rng)?;
                relaxed_trace.push(sol.value - kl(&coords, prior)?);
                (sol.lambda1, sol.lambda2)
            }
        };
        let (next, h) = blr_update(&coords, prior, (&grad.0, &grad.1), opts.alpha)?;
        halvings += h;
        coords = next;
        elbo_trace.push(elbo_exact(problem, prior, &coords, order)?);
    }
    Ok(BlrRun {
        posterior: coords,
        elbo_trace,
        relaxed_trace,
        halvings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;

    fn toy() -> (Batch, BinaryLogreg) {
        let batch = Batch::from_rows(
            &[vec![1.0, 0.5], vec![0.3, -1.2], vec![-0.7, 0.2], vec![-1.5, -0.4], vec![0.2, 0.9]],
            vec![0, 0, 1, 1, 0],
            2,
        )
        .unwrap();
        let p = BinaryLogreg::from_batch(&batch).unwrap();
        (batch, p)
    }

    #[test]
    fn logreg_matches_model_spec() {
        let (batch, prob) = toy();
        let model = ModelSpec::logreg(2, 2).unwrap();
        let theta = [0.4, -0.8];
        let (l, g) = model.loss_grad(&theta, &batch).unwrap();
        let (lt, gt, h) = prob.loss_grad_hess(&DVector::from_column_slice(&theta));
        let n = batch.len() as f64;
        assert!((lt - n * l).abs() < 1e-12);
        assert!((gt[0] - n * g[0]).abs() < 1e-12 && (gt[1] - n * g[1]).abs() < 1e-12);
        // Hessian against central differences of the gradient.
        for j in 0..2 {
            let mut e = DVector::zeros(2);
            e[j] = 1e-6;
            let tp = DVector::from_column_slice(&theta) + &e;
            let tm = DVector::from_column_slice(&theta) - &e;
            let fd = (prob.loss_grad(&tp).1 - prob.loss_grad(&tm).1) / 2e-6;
            assert!((fd - h.column(j)).amax() < 1e-7);
        }
    }

    #[test]
    fn tensor_quadrature_moments() {
        let cov = DMatrix::from_row_slice(2, 2, &[1.0, 0.3, 0.3, 0.5]);
        let c = ExpFamCoords::new(DVector::from_vec(vec![0.5, -1.0]), Covariance::Full(cov.clone())).unwrap();
        let (m, s) = gaussian_expect(&c, 5, (DVector::zeros(2), DMatrix::zeros(2, 2)), |t, w, (m, s)| {
            (m + t * w, s + t * t.transpose() * w)
        })
        .unwrap();
        let (mu1, mu2) = c.mean_params();
        assert!((m - mu1).amax() < 1e-13);
        assert!((s - mu2).amax() < 1e-13);
    }

    #[test]
    fn zero_data_converges_to_prior() {
        let prior = Prior::new(2.0).unwrap();
        let init = ExpFamCoords::new(
            DVector::from_vec(vec![1.0, -0.5]),
            Covariance::Full(DMatrix::from_row_slice(2, 2, &[0.4, 0.1, 0.1, 0.3])),
        )
        .unwrap();
        let opts = BlrOptions {
            alpha: 0.5,
            iters: 60,
            init: Some(init),
            ..BlrOptions::default()
        };
        let run = blr_full_gaussian(&BinaryLogreg::empty(2), &prior, BlrMode::Bayes, &opts, &mut crate::rng::seeded(0)).unwrap();
        let kl_final = kl(&run.posterior, &prior).unwrap();
        assert!(kl_final < 1e-12, "{kl_final}");
        assert!((run.elbo_trace.last().unwrap() + kl_final).abs() < 1e-15);
    }

    #[test]
    fn leaving_the_domain_halves_the_step() {
        let prior = Prior::new(1.0).unwrap();
        let c = ExpFamCoords::scalar(0.0, 1.0).unwrap();
        // target second block -0.5 + 2 = 1.5; alpha 1, 1/2 and 1/4 give 1.5, 0.5 and 0
        let g2 = DMatrix::from_element(1, 1, 2.0);
        let (next, halvings) = blr_update(&c, &prior, (&DVector::zeros(1), &g2), 1.0).unwrap();
        assert_eq!(halvings, 3);
        let (_, l2) = next.natural_params();
        assert!((l2[(0, 0)] + 0.25).abs() < 1e-12);
        assert!(blr_update(&c, &prior, (&DVector::zeros(1), &g2), 0.0).is_err());
    }

    #[test]
    fn bayes_fixed_point_is_stationary() {
        let (_, prob) = toy();
        let prior = Prior::new(1.0).unwrap();
        let opts = BlrOptions { alpha: 0.7, iters: 80, ..BlrOptions::default() };
        let run = blr_full_gaussian(&prob, &prior, BlrMode::Bayes, &opts, &mut crate::rng::seeded(0)).unwrap();
        let (g1, g2) = expected_loss_gradient(&prob, &run.posterior, 20).unwrap();
        let (l1, l2) = run.posterior.natural_params();
        assert!((l1 - g1).amax() < 1e-10);
        assert!((l2 - (g2 + DMatrix::from_diagonal_element(2, 2, -0.5))).amax() < 1e-10);
        let trace = &run.elbo_trace;
        assert!(trace.windows(2).skip(5).all(|w| w[1] >= w[0] - 1e-10), "{trace:?}");
    }
}
