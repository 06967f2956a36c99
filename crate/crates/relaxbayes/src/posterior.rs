//! Gaussian posteriors, ELBO, predictive averaging, the exact 2D grid oracle and Laplace.

use nalgebra::{Cholesky, DMatrix, DVector};
use rand::Rng;

use crate::conjugate::Covariance;
use crate::error::{check_len, Error, Result};
use crate::nn::{softmax_rows, Batch, Model, ModelSpec};
use crate::optim::{OptimizerState, S_FLOOR};
use crate::rng::normal_vec;

/// Zero-mean isotropic Gaussian prior `N(0, I/delta0)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Prior {
    pub delta0: f64,
}

impl Prior {
    pub fn new(delta0: f64) -> Result<Self> {
        if !(delta0 > 0.0 && delta0.is_finite()) {
            return Err(Error::Config(format!("prior precision must be positive, got {delta0}")));
        }
        Ok(Self { delta0 })
    }

    pub fn log_density(&self, theta: &[f64]) -> f64 {
        let p = theta.len() as f64;
        let n2: f64 = theta.iter().map(|t| t * t).sum();
        0.5 * p * (self.delta0 / (2.0 * std::f64::consts::PI)).ln() - 0.5 * self.delta0 * n2
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianPosterior {
    pub mean: Vec<f64>,
    pub cov: Covariance,
    chol: Option<DMatrix<f64>>,
}

impl GaussianPosterior {
    pub fn new(mean: Vec<f64>, cov: Covariance) -> Result<Self> {
        let p = mean.len();
        let chol = match &cov {
            Covariance::Isotropic(v) if !(*v > 0.0) => {
                return Err(Error::Domain(format!("variance must be positive, got {v}")))
            }
            Covariance::Diagonal(d) => {
                check_len("posterior variances", p, d.len())?;
                if d.iter().any(|x| !(*x > 0.0)) {
                    return Err(Error::Domain("variances must be positive".into()));
                }
                None
            }
            Covariance::Full(m) => {
                check_len("posterior covariance", p, m.nrows())?;
                let c = Cholesky::new(m.clone())
                    .ok_or_else(|| Error::Domain("covariance is not positive definite".into()))?;
                Some(c.l())
            }
            _ => None,
        };
        Ok(Self { mean, cov, chol })
    }

    pub fn isotropic(mean: Vec<f64>, v: f64) -> Result<Self> {
        Self::new(mean, Covariance::Isotropic(v))
    }

    pub fn diagonal(mean: Vec<f64>, variances: Vec<f64>) -> Result<Self> {
        Self::new(mean, Covariance::Diagonal(DVector::from_vec(variances)))
    }

    pub fn full(mean: Vec<f64>, cov: DMatrix<f64>) -> Result<Self> {
        Self::new(mean, Covariance::Full(cov))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        self.cov.to_matrix(self.dim())
    }

    /// `mean + V^{1/2} z` for a standard normal `z`.
    pub fn sample_with(&self, z: &[f64]) -> Vec<f64> {
        match &self.cov {
            Covariance::Isotropic(v) => {
                let s = v.sqrt();
                self.mean.iter().zip(z).map(|(m, z)| m + s * z).collect()
            }
            Covariance::Diagonal(d) => self
                .mean
                .iter()
                .zip(z)
                .zip(d.iter())
                .map(|((m, z), v)| m + v.sqrt() * z)
                .collect(),
            Covariance::Full(_) => {
                let l = self.chol.as_ref().expect("factor cached for full covariance");
                let lz = l * DVector::from_column_slice(z);
                self.mean.iter().zip(lz.iter()).map(|(m, d)| m + d).collect()
            }
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let z = normal_vec(rng, self.dim());
        self.sample_with(&z)
    }

    /// `KL(q || N(0, I/delta0)) = (delta0 tr V + delta0 |m|^2 - P - log det(delta0 V)) / 2`.
    pub fn kl_to_prior(&self, prior: &Prior) -> f64 {
        let d0 = prior.delta0;
        let p = self.dim() as f64;
        let m2: f64 = self.mean.iter().map(|x| x * x).sum();
        let (trace, logdet) = match &self.cov {
            Covariance::Isotropic(v) => (p * v, p * v.ln()),
            Covariance::Diagonal(d) => (d.sum(), d.iter().map(|x| x.ln()).sum()),
            Covariance::Full(m) => {
                let l = self.chol.as_ref().expect("factor cached for full covariance");
                (m.trace(), 2.0 * l.diagonal().iter().map(|x| x.ln()).sum::<f64>())
            }
        };
        0.5 * (d0 * trace + d0 * m2 - p - p * d0.ln() - logdet)
    }
}

/// Diagonal Gaussian `N(omega, diag(1/(N s)))` from a bSAM state.
pub fn bsam_posterior(state: &OptimizerState, n_train: usize) -> Result<GaussianPosterior> {
    if n_train == 0 {
        return Err(Error::Config("N must be positive".into()));
    }
    if state.s.iter().any(|&s| !(s > 0.0)) {
        return Err(Error::Domain("bSAM scale s must be positive".into()));
    }
    GaussianPosterior::diagonal(state.omega.clone(), state.variance(n_train))
}

/// Monte Carlo ELBO `E_q[-sum_i l_i(theta)] - KL(q || p)`, with the data term
/// taken as `N` times the model's mean loss over `data`.
pub fn elbo<R: Rng + ?Sized>(
    model: &dyn Model,
    q: &GaussianPosterior,
    prior: &Prior,
    data: &Batch,
    mc_samples: usize,
    rng: &mut R,
) -> Result<f64> {
    if mc_samples == 0 {
        return Err(Error::Config("ELBO needs at least one sample".into()));
    }
    check_len("posterior", model.num_params(), q.dim())?;
    let n = data.len() as f64;
    let mut acc = 0.0;
    for _ in 0..mc_samples {
        let theta = q.sample(rng);
        acc += n * model.loss(&theta, data)?;
    }
    Ok(-acc / mc_samples as f64 - q.kl_to_prior(prior))
}

/// How predictive samples are pushed through the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PredictiveRule {
    /// Evaluate the network at each sample.
    Sampled,
    /// Evaluate the network linearized at the mean: `f(m) + J (theta - m)`.
    Linearized,
}

/// Average of class probabilities over `samples` draws from `q`; zero draws
/// means the plug-in prediction at the mean.
pub fn predictive<R: Rng + ?Sized>(
    model: &ModelSpec,
    q: &GaussianPosterior,
    inputs: &DMatrix<f64>,
    samples: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    predictive_with(model, q, inputs, samples, PredictiveRule::Sampled, rng)
}

pub fn predictive_with<R: Rng + ?Sized>(
    model: &ModelSpec,
    q: &GaussianPosterior,
    inputs: &DMatrix<f64>,
    samples: usize,
    rule: PredictiveRule,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    check_len("posterior", model.num_params(), q.dim())?;
    if samples == 0 {
        return model.probs(&q.mean, inputs);
    }
    let mut acc = DMatrix::zeros(inputs.nrows(), model.num_classes());
    for _ in 0..samples {
        let theta = q.sample(rng);
        let p = match rule {
            PredictiveRule::Sampled => model.probs(&theta, inputs)?,
            PredictiveRule::Linearized => {
                let tangent: Vec<f64> = theta.iter().zip(&q.mean).map(|(t, m)| t - m).collect();
                let (z, dz) = model.jvp(&q.mean, &tangent, inputs)?;
                softmax_rows(&(z + dz))
            }
        };
        acc += p;
    }
    acc /= samples as f64;
    renormalize_rows(&mut acc);
    Ok(acc)
}

/// Removes the round-off of averaging so each row sums to one.
fn renormalize_rows(p: &mut DMatrix<f64>) {
    for mut row in p.row_iter_mut() {
        let s: f64 = row.sum();
        row /= s;
    }
}

/// Diagonal Laplace approximation at `theta`: precision `diag-GGN + delta0`
/// with the GGN summed over `data`. Predictions should use
/// [`PredictiveRule::Linearized`].
pub fn laplace_at(model: &ModelSpec, theta: &[f64], prior: &Prior, data: &Batch) -> Result<GaussianPosterior> {
    if theta.iter().any(|t| !t.is_finite()) {
        return Err(Error::Domain("Laplace centre must be finite".into()));
    }
    let ggn = model.diag_ggn(theta, data)?;
    let var = ggn.iter().map(|g| 1.0 / (g + prior.delta0)).collect();
    GaussianPosterior::diagonal(theta.to_vec(), var)
}

/// Square grid `[lo, hi]^2` with `n x n` cells.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self { lo: -8.0, hi: 8.0, n: 400 }
    }
}

/// Normalized posterior over the cells of a 2D parameter grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridOracle2D {
    pub spec: GridSpec,
    /// Unnormalized log posterior at each cell centre, row-major in `(i, j)` for `(theta_0, theta_1)`.
    pub log_post: Vec<f64>,
    /// Cell masses summing to one.
    pub mass: Vec<f64>,
    /// `log sum_cells exp(log_post) * cell_area`, the log evidence estimate.
    pub log_norm: f64,
}

const BOUNDARY_MASS_TOL: f64 = 1e-3;

/// Exact Bayesian posterior `p(theta | D) ~ exp(-sum_i l_i(theta)) p(theta)` of a
/// two-parameter model by numerical integration on a grid.
pub fn exact_bayes_2d(model: &ModelSpec, data: Option<&Batch>, prior: &Prior, spec: GridSpec) -> Result<GridOracle2D> {
    if model.num_params() != 2 {
        return Err(Error::Config(format!("grid oracle needs 2 parameters, model has {}", model.num_params())));
    }
    if spec.n < 2 || !(spec.hi > spec.lo) {
        return Err(Error::Config("grid needs n >= 2 and hi > lo".into()));
    }
    let mut log_post = Vec::with_capacity(spec.n * spec.n);
    for i in 0..spec.n {
        for j in 0..spec.n {
            let theta = [cell_centre(&spec, i), cell_centre(&spec, j)];
            let ll = match data {
                Some(d) => -(d.len() as f64) * model.loss(&theta, d)?,
                None => 0.0,
            };
            log_post.push(ll + prior.log_density(&theta));
        }
    }
    let max = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let mut mass: Vec<f64> = log_post.iter().map(|l| (l - max).exp()).collect();
    let total: f64 = mass.iter().sum();
    mass.iter_mut().for_each(|m| *m /= total);
    let h = (spec.hi - spec.lo) / spec.n as f64;
    let oracle = GridOracle2D {
        spec,
        log_post,
        mass,
        log_norm: max + total.ln() + 2.0 * h.ln(),
    };
    let edge = oracle.boundary_mass();
    if edge > BOUNDARY_MASS_TOL {
        return Err(Error::Domain(format!(
            "posterior mass {edge:.2e} on the grid boundary; widen the bounds"
        )));
    }
    Ok(oracle)
}

fn cell_centre(spec: &GridSpec, i: usize) -> f64 {
    let h = (spec.hi - spec.lo) / spec.n as f64;
    spec.lo + h * (i as f64 + 0.5)
}

impl GridOracle2D {
    pub fn cell(&self, i: usize, j: usize) -> [f64; 2] {
        [cell_centre(&self.spec, i), cell_centre(&self.spec, j)]
    }

    fn cells(&self) -> impl Iterator<Item = ([f64; 2], f64)> + '_ {
        let n = self.spec.n;
        (0..n * n).map(move |k| (self.cell(k / n, k % n), self.mass[k]))
    }

    /// Mass in the outermost ring of cells.
    pub fn boundary_mass(&self) -> f64 {
        let n = self.spec.n;
        (0..n * n)
            .filter(|k| {
                let (i, j) = (k / n, k % n);
                i == 0 || j == 0 || i + 1 == n || j + 1 == n
            })
            .map(|k| self.mass[k])
            .sum()
    }

    pub fn mean(&self) -> [f64; 2] {
        self.cells().fold([0.0, 0.0], |acc, (t, m)| [acc[0] + m * t[0], acc[1] + m * t[1]])
    }

    pub fn covariance(&self) -> DMatrix<f64> {
        let mu = self.mean();
        let mut c = DMatrix::zeros(2, 2);
        for (t, m) in self.cells() {
            let d = [t[0] - mu[0], t[1] - mu[1]];
            for a in 0..2 {
                for b in 0..2 {
                    c[(a, b)] += m * d[a] * d[b];
                }
            }
        }
        c
    }

    /// Cell with the largest posterior mass.
    pub fn mode(&self) -> [f64; 2] {
        let k = (0..self.mass.len())
            .max_by(|&a, &b| self.mass[a].total_cmp(&self.mass[b]))
            .expect("non-empty grid");
        self.cell(k / self.spec.n, k % self.spec.n)
    }

    /// Exact predictive `sum_cells p(y | x, theta) mass(theta)`; cells below
    /// `1e-14` mass are skipped.
    pub fn predictive(&self, model: &ModelSpec, inputs: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut acc = DMatrix::zeros(inputs.nrows(), model.num_classes());
        let mut used = 0.0;
        for (t, m) in self.cells() {
            if m < 1e-14 {
                continue;
            }
            acc += model.probs(&t, inputs)? * m;
            used += m;
        }
        acc /= used;
        Ok(acc)
    }

    /// Posterior mass inside `{t : (t - c)^T cov^-1 (t - c) <= r^2}`.
    pub fn mass_in_ellipse(&self, centre: &[f64], cov: &DMatrix<f64>, r: f64) -> Result<f64> {
        let inv = cov
            .clone()
            .try_inverse()
            .ok_or_else(|| Error::Domain("singular ellipse covariance".into()))?;
        Ok(self
            .cells()
            .filter(|(t, _)| {
                let d = DVector::from_vec(vec![t[0] - centre[0], t[1] - centre[1]]);
                (d.transpose() * &inv * &d)[(0, 0)] <= r * r
            })
            .map(|(_, m)| m)
            .sum())
    }
}

/// Floor applied to the bSAM scale when forming variances.
pub const VARIANCE_FLOOR: f64 = S_FLOOR;
