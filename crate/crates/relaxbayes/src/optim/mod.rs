//! SGD, Adam, SAM-SGD, SAM-Adam and bSAM, with m-sharpness.
//!
//! bSAM follows its algorithm listing literally, with `s` starting at one and
//! no bias correction:
//!
//! ```text
//! theta = omega + e,  e ~ N(0, 1/(N s))
//! g     = grad l(theta)
//! eps   = rho g / s
//! g_eps = grad l(omega + eps)
//! g_m   = b1 g_m + (1 - b1)(g_eps + delta omega)
//! s     = b2 s + (1 - b2)(sqrt(s) |g| + delta + gamma)
//! omega = omega - alpha g_m / s
//! ```
//!
//! The derivation of the `s` update carries an extra `sqrt(N)` on the
//! `sqrt(s)|g|` term; the final listing drops it and so do we.
//!
//! Adam and SAM-Adam use standard bias correction. SGD and SAM-SGD keep an
//! exponential moving average of the gradient as momentum.

mod checkpoint;
mod objectives;

pub use checkpoint::{load_checkpoint, save_checkpoint};
pub use objectives::{prox_sup_1d, 
    relaxed_objective, relaxed_objective_1d, sam_objective, sam_objective_1d, verify_theorem2,
    Theorem2Report, Theorem2Status,
};

use crate::error::{check_len, Error, Result};
use crate::nn::{Batch, Model};
use crate::rng;

/// Lower clamp on `s` when forming the sampling variance `1/(N s)`.
pub const S_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    SamSgd,
    SamAdam,
    Bsam,
}

impl OptimizerKind {
    pub fn is_sam(self) -> bool {
        matches!(self, OptimizerKind::SamSgd | OptimizerKind::SamAdam)
    }

    pub fn is_adam_like(self) -> bool {
        matches!(self, OptimizerKind::Adam | OptimizerKind::SamAdam)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Schedule {
    Constant,
    /// Half-cosine decay from `alpha` at step 0 to zero at `total_steps`.
    Cosine { total_steps: u64 },
    /// Multiply by `factor` at each milestone step.
    Step { milestones: Vec<u64>, factor: f64 },
}

impl Schedule {
    pub fn lr(&self, base: f64, step: u64) -> f64 {
        match self {
            Schedule::Constant => base,
            Schedule::Cosine { total_steps } => {
                let t = step.min(*total_steps) as f64 / (*total_steps).max(1) as f64;
                base * 0.5 * (1.0 + (std::f64::consts::PI * t).cos())
            }
            Schedule::Step { milestones, factor } => {
                let passed = milestones.iter().filter(|&&m| step >= m).count();
                base * factor.powi(passed as i32)
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    /// Per-example L2 regularization.
    pub delta: f64,
    pub rho: f64,
    pub gamma: f64,
    /// Training-set size, used for the bSAM variance `1/(N s)`.
    pub n_train: usize,
    /// Number of m-sharpness splits per minibatch.
    pub m: usize,
    pub schedule: Schedule,
    /// Take the bSAM gradient `g` at the noisy point (true) or at the mean.
    pub noisy_linearization: bool,
    pub seed: u64,
}

impl OptimizerConfig {
    /// Defaults per kind: `gamma = 0.1` for bSAM and `1e-8` otherwise.
    pub fn new(kind: OptimizerKind) -> Self {
        Self {
            kind,
            lr: 0.1,
            beta1: 0.9,
            beta2: 0.999,
            delta: 0.0,
            rho: if kind == OptimizerKind::Bsam || kind.is_sam() { 0.05 } else { 0.0 },
            gamma: if kind == OptimizerKind::Bsam { 0.1 } else { 1e-8 },
            n_train: 1,
            m: 1,
            schedule: Schedule::Constant,
            noisy_linearization: true,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.beta1) {
            return bad(format!("beta1 must lie in [0, 1), got {}", self.beta1));
        }
        // beta2 = 1 freezes s, which the SGD-reduction checks rely on.
        if !(0.0..=1.0).contains(&self.beta2) {
            return bad(format!("beta2 must lie in [0, 1], got {}", self.beta2));
        }
        if self.delta < 0.0 || self.rho < 0.0 {
            return bad("delta and rho must be non-negative".into());
        }
        if self.gamma <= 0.0 {
            return bad(format!("gamma must be positive, got {}", self.gamma));
        }
        if self.n_train == 0 || self.m == 0 {
            return bad("n_train and m must be at least one".into());
        }
        if let Schedule::Step { factor, .. } = self.schedule {
            if factor <= 0.0 {
                return bad("step schedule factor must be positive".into());
            }
        }
        Ok(())
    }
}

/// Iterate, momentum, scale and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub omega: Vec<f64>,
    pub g_m: Vec<f64>,
    pub s: Vec<f64>,
    pub step_count: u64,
}

impl OptimizerState {
    /// `s` starts at one for bSAM and zero otherwise; momentum starts at zero.
    pub fn new(kind: OptimizerKind, omega: Vec<f64>) -> Self {
        let p = omega.len();
        let s0 = if kind == OptimizerKind::Bsam { 1.0 } else { 0.0 };
        Self {
            omega,
            g_m: vec![0.0; p],
            s: vec![s0; p],
            step_count: 0,
        }
    }

    /// Per-parameter bSAM variance `1/(N s)`.
    pub fn variance(&self, n_train: usize) -> Vec<f64> {
        self.s
            .iter()
            .map(|&s| 1.0 / (n_train as f64 * s.max(S_FLOOR)))
            .collect()
    }
}

/// Where the bSAM sampling noise comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum Noise {
    /// Counter-based stream keyed by `(config.seed, step_count, split)`.
    Stream,
    /// Standard-normal draws supplied per split; scaled by `sqrt(1/(N s))`.
    Pinned(Vec<Vec<f64>>),
}

/// Intermediate quantities of one step, averaged over splits.
#[derive(Debug, Clone, PartialEq)]
pub struct StepInfo {
    pub lr: f64,
    /// Mean loss at the points where `g` was taken.
    pub loss: f64,
    /// Points where `g` was taken, one per split.
    pub theta: Vec<Vec<f64>>,
    pub g: Vec<f64>,
    /// Perturbations, one per split.
    pub eps: Vec<Vec<f64>>,
    pub g_eps: Vec<f64>,
}

/// `rho g / ||g||`, or zero when `g = 0`.
pub fn sam_perturbation(g: &[f64], rho: f64) -> Vec<f64> {
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 || rho == 0.0 {
        return vec![0.0; g.len()];
    }
    g.iter().map(|v| rho * v / norm).collect()
}

/// `rho g / s` entrywise.
pub fn bsam_perturbation(g: &[f64], s: &[f64], rho: f64) -> Result<Vec<f64>> {
    check_len("scale vector", g.len(), s.len())?;
    if s.iter().any(|&v| v <= 0.0 || !v.is_finite()) {
        return Err(Error::Domain("bSAM scale must be positive".into()));
    }
    Ok(g.iter().zip(s).map(|(gi, si)| rho * gi / si).collect())
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

fn finite_grad(model: &dyn Model, params: &[f64], batch: &Batch) -> Result<(f64, Vec<f64>)> {
    let (l, g) = model.loss_grad(params, batch)?;
    if !l.is_finite() || g.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numerical(format!(
            "non-finite loss or gradient (loss = {l}); step aborted"
        )));
    }
    Ok((l, g))
}

/// One optimizer step on the whole batch.
pub fn step(
    config: &OptimizerConfig,
    state: &mut OptimizerState,
    model: &dyn Model,
    batch: &Batch,
    noise: &Noise,
) -> Result<StepInfo> {
    run_step(config, state, model, &[batch], noise)
}

/// One step with the batch split into `config.m` parts, each with its own noise
/// draw and perturbation; the gradients are averaged over splits.
pub fn step_msharp(
    config: &OptimizerConfig,
    state: &mut OptimizerState,
    model: &dyn Model,
    batch: &Batch,
    noise: &Noise,
) -> Result<StepInfo> {
    let splits = batch.split(config.m)?;
    let refs: Vec<&Batch> = splits.iter().collect();
    run_step(config, state, model, &refs, noise)
}

fn run_step(
    config: &OptimizerConfig,
    state: &mut OptimizerState,
    model: &dyn Model,
    splits: &[&Batch],
    noise: &Noise,
) -> Result<StepInfo> {
    config.validate()?;
    let p = model.num_params();
    check_len("optimizer state", p, state.omega.len())?;
    check_len("momentum", p, state.g_m.len())?;
    check_len("scale", p, state.s.len())?;
    if config.kind == OptimizerKind::Bsam && state.s.iter().any(|&v| v <= 0.0) {
        return Err(Error::Domain("bSAM scale must stay positive".into()));
    }
    let kind = config.kind;
    let m = splits.len() as f64;
    let var = state.variance(config.n_train);

    let mut loss = 0.0;
    let mut g = vec![0.0; p];
    let mut g_eps = vec![0.0; p];
    let mut thetas = Vec::with_capacity(splits.len());
    let mut perturbations = Vec::with_capacity(splits.len());
    for (k, split) in splits.iter().enumerate() {
        let theta = if kind == OptimizerKind::Bsam && config.noisy_linearization {
            let z = match noise {
                Noise::Stream => {
                    let mut r = rng::stream(config.seed, state.step_count, k as u64);
                    rng::normal_vec(&mut r, p)
                }
                Noise::Pinned(draws) => {
                    let z = draws.get(k).ok_or_else(|| {
                        Error::Config(format!("no pinned noise for split {k}"))
                    })?;
                    check_len("pinned noise", p, z.len())?;
                    z.clone()
                }
            };
            state
                .omega
                .iter()
                .zip(&z)
                .zip(&var)
                .map(|((w, z), v)| w + v.sqrt() * z)
                .collect()
        } else {
            state.omega.clone()
        };
        let (l_k, g_k) = finite_grad(model, &theta, split)?;
        let eps = match kind {
            OptimizerKind::Bsam => bsam_perturbation(&g_k, &state.s, config.rho)?,
            k if k.is_sam() => sam_perturbation(&g_k, config.rho),
            _ => vec![0.0; p],
        };
        let ge_k = if eps.iter().all(|&e| e == 0.0) && theta == state.omega {
            g_k.clone()
        } else {
            finite_grad(model, &add(&state.omega, &eps), split)?.1
        };
        loss += l_k;
        for i in 0..p {
            g[i] += g_k[i];
            g_eps[i] += ge_k[i];
        }
        thetas.push(theta);
        perturbations.push(eps);
    }
    loss /= m;
    for i in 0..p {
        g[i] /= m;
        g_eps[i] /= m;
    }

    let lr = config.schedule.lr(config.lr, state.step_count);
    let (b1, b2, delta, gamma) = (config.beta1, config.beta2, config.delta, config.gamma);
    let t = state.step_count + 1;
    for i in 0..p {
        let w = state.omega[i];
        let u = g_eps[i] + delta * w;
        state.g_m[i] = b1 * state.g_m[i] + (1.0 - b1) * u;
        match kind {
            OptimizerKind::Sgd | OptimizerKind::SamSgd => {
                state.omega[i] = w - lr * state.g_m[i];
            }
            OptimizerKind::Adam | OptimizerKind::SamAdam => {
                state.s[i] = b2 * state.s[i] + (1.0 - b2) * u * u;
                let m_hat = state.g_m[i] / (1.0 - b1.powi(t as i32));
                let s_hat = state.s[i] / (1.0 - b2.powi(t as i32));
                state.omega[i] = w - lr * m_hat / (s_hat.sqrt() + gamma);
            }
            OptimizerKind::Bsam => {
                let s_old = state.s[i];
                state.s[i] = b2 * s_old + (1.0 - b2) * (s_old.sqrt() * g[i].abs() + delta + gamma);
                state.omega[i] = w - lr * state.g_m[i] / state.s[i];
            }
        }
    }
    state.step_count = t;
    Ok(StepInfo {
        lr,
        loss,
        theta: thetas,
        g,
        eps: perturbations,
        g_eps,
    })
}

/// Adapter turning a closure `params -> (loss, grad)` into a [`Model`]; the batch is ignored.
pub struct FnModel<F> {
    pub dim: usize,
    pub f: F,
}

impl<F: Fn(&[f64]) -> (f64, Vec<f64>)> Model for FnModel<F> {
    fn num_params(&self) -> usize {
        self.dim
    }

    fn loss_grad(&self, params: &[f64], _batch: &Batch) -> Result<(f64, Vec<f64>)> {
        Ok((self.f)(params))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::ModelSpec;
    use proptest::prelude::*;

    fn dummy_batch() -> Batch {
        Batch::from_rows(&[vec![0.0]], vec![0], 2).unwrap()
    }

    #[test]
    fn sam_perturbation_cases() {
        assert_eq!(sam_perturbation(&[3.0, 4.0], 1.0), vec![0.6, 0.8]);
        assert_eq!(sam_perturbation(&[3.0, 4.0], 0.0), vec![0.0, 0.0]);
        assert_eq!(sam_perturbation(&[0.0, 0.0], 1.0), vec![0.0, 0.0]);
    }

    #[test]
    fn bsam_perturbation_cases() {
        assert_eq!(bsam_perturbation(&[2.0, -4.0], &[2.0, 4.0], 1.0).unwrap(), vec![1.0, -1.0]);
        assert_eq!(bsam_perturbation(&[2.0, -4.0], &[1.0, 1.0], 0.5).unwrap(), vec![1.0, -2.0]);
        assert!(bsam_perturbation(&[1.0], &[0.0], 1.0).is_err());
    }

    #[test]
    fn cosine_schedule_endpoints() {
        let s = Schedule::Cosine { total_steps: 10 };
        assert_eq!(s.lr(0.3, 0), 0.3);
        assert!(s.lr(0.3, 10).abs() < 1e-17);
        assert!(s.lr(0.3, 25).abs() < 1e-17);
        let st = Schedule::Step { milestones: vec![2, 5], factor: 0.1 };
        assert_eq!(st.lr(1.0, 1), 1.0);
        assert!((st.lr(1.0, 5) - 0.01).abs() < 1e-15);
    }

    #[test]
    fn sgd_with_zero_gradient_only_counts_steps() {
        let model = FnModel { dim: 2, f: |_: &[f64]| (0.0, vec![0.0, 0.0]) };
        let cfg = OptimizerConfig::new(OptimizerKind::Sgd);
        let mut st = OptimizerState::new(cfg.kind, vec![1.0, -2.0]);
        let before = st.clone();
        step(&cfg, &mut st, &model, &dummy_batch(), &Noise::Stream).unwrap();
        assert_eq!(st.omega, before.omega);
        assert_eq!(st.g_m, before.g_m);
        assert_eq!(st.step_count, 1);
    }

    #[test]
    fn bsam_without_noise_and_rho_reduces_to_sgd() {
        let model = ModelSpec::logreg(2, 2).unwrap();
        let batch = Batch::from_rows(&[vec![1.0, 0.5], vec![-0.3, 2.0]], vec![0, 1], 2).unwrap();
        let mut cfg = OptimizerConfig::new(OptimizerKind::Bsam);
        cfg.noisy_linearization = false;
        cfg.rho = 0.0;
        cfg.beta1 = 0.0;
        cfg.beta2 = 1.0;
        cfg.lr = 0.3;
        let w0 = vec![0.2, -0.1];
        let mut st = OptimizerState::new(cfg.kind, w0.clone());
        for _ in 0..3 {
            let w = st.omega.clone();
            let g = model.grad(&w, &batch).unwrap();
            step(&cfg, &mut st, &model, &batch, &Noise::Stream).unwrap();
            for i in 0..2 {
                assert!((st.omega[i] - (w[i] - 0.3 * g[i])).abs() < 1e-15);
            }
            assert_eq!(st.s, vec![1.0, 1.0]);
        }
    }

    #[test]
    fn non_finite_gradient_aborts_without_mutation() {
        let model = FnModel { dim: 1, f: |_: &[f64]| (1.0, vec![f64::NAN]) };
        let cfg = OptimizerConfig::new(OptimizerKind::Adam);
        let mut st = OptimizerState::new(cfg.kind, vec![1.0]);
        let before = st.clone();
        assert!(matches!(
            step(&cfg, &mut st, &model, &dummy_batch(), &Noise::Stream),
            Err(Error::Numerical(_))
        ));
        assert_eq!(st, before);
    }

    #[test]
    fn msharp_requires_divisibility() {
        let model = ModelSpec::logreg(1, 2).unwrap();
        let batch = Batch::from_rows(&[vec![1.0], vec![2.0], vec![3.0]], vec![0, 1, 0], 2).unwrap();
        let mut cfg = OptimizerConfig::new(OptimizerKind::Bsam);
        cfg.m = 2;
        let mut st = OptimizerState::new(cfg.kind, vec![0.0]);
        assert!(matches!(
            step_msharp(&cfg, &mut st, &model, &batch, &Noise::Stream),
            Err(Error::Config(_))
        ));
    }

    proptest! {
        #[test]
        fn sam_perturbation_has_norm_rho(g in proptest::collection::vec(-10.0f64..10.0, 1..20),
                                         rho in 0.01f64..5.0) {
            prop_assume!(g.iter().any(|&v| v != 0.0));
            let e = sam_perturbation(&g, rho);
            let n = e.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((n - rho).abs() < 1e-12);
        }

        #[test]
        fn bsam_perturbation_matches_loop(g in proptest::collection::vec(-10.0f64..10.0, 1..20),
                                          rho in 0.0f64..3.0) {
            let s: Vec<f64> = g.iter().enumerate().map(|(i, _)| 0.1 + i as f64 * 0.37).collect();
            let e = bsam_perturbation(&g, &s, rho).unwrap();
            for i in 0..g.len() {
                prop_assert_eq!(e[i], rho * g[i] / s[i]);
            }
        }

        #[test]
        fn bsam_keeps_scale_positive(grads in proptest::collection::vec(
            proptest::collection::vec(-1e3f64..1e3, 3), 1..30)) {
            let cfg = OptimizerConfig { beta2: 0.5, ..OptimizerConfig::new(OptimizerKind::Bsam) };
            let mut st = OptimizerState::new(cfg.kind, vec![0.0; 3]);
            for g in grads {
                let model = FnModel { dim: 3, f: move |_: &[f64]| (0.0, g.clone()) };
                step(&cfg, &mut st, &model, &dummy_batch(), &Noise::Stream).unwrap();
                prop_assert!(st.s.iter().all(|&s| s > 0.0));
            }
        }

        #[test]
        fn cosine_schedule_is_monotone(total in 1u64..500, a in 1e-4f64..10.0) {
            let s = Schedule::Cosine { total_steps: total };
            let mut prev = s.lr(a, 0);
            prop_assert_eq!(prev, a);
            for t in 1..=total + 3 {
                let cur = s.lr(a, t);
                prop_assert!(cur <= prev);
                prev = cur;
            }
            prop_assert!(s.lr(a, total).abs() < 1e-12 * a);
        }
    }
}
