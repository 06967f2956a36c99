//! Duality and theorem verification suites over the catalog losses.

use std::path::Path;

use rand::Rng;
use relaxbayes::conjugate::{expected_loss_at, verify_theorem1, Biconjugate, DEFAULT_ORDER};
use relaxbayes::losses::Loss1D;
use relaxbayes::optim::{verify_theorem2, Theorem2Status};
use relaxbayes::rng::stream;
use serde::{Deserialize, Serialize};

use crate::config::config_hash;
use crate::error::{Error, Result};
use crate::output::{num, Table};

pub const FSS_VIOLATION_TOL: f64 = 1e-8;
pub const CONVEXITY_TOL: f64 = 1e-6;
pub const LIMIT_TOL: f64 = 1e-2;
pub const LIMIT_V: f64 = 1e-4;
pub const THEOREM1_TOL: f64 = 1e-3;
pub const THEOREM2_TOL: f64 = 1e-4;

const VERIFY_STREAM: u64 = 6 << 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Suite {
    Duality,
    Theorem1,
    Theorem2,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    #[serde(default = "all_suites")]
    pub suites: Vec<Suite>,
    /// Points per axis of the `(omega, v)` grid.
    #[serde(default = "grid_points")]
    pub grid_points: usize,
    #[serde(default = "segments")]
    pub segments: usize,
    /// Random dual points per loss for the first theorem.
    #[serde(default = "lambdas")]
    pub lambdas: usize,
    #[serde(default)]
    pub seed: u64,
}

fn all_suites() -> Vec<Suite> {
    vec![Suite::Duality, Suite::Theorem1, Suite::Theorem2]
}

fn grid_points() -> usize {
    40
}

fn segments() -> usize {
    200
}

fn lambdas() -> usize {
    10
}

impl Default for VerifyConfig {
    fn default() -> Self {
        serde_json::from_str("{}").expect("all fields have defaults")
    }
}

impl VerifyConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DualityReport {
    pub loss: &'static str,
    /// Largest `f** - f` over the grid.
    pub max_violation: f64,
    /// Largest midpoint-convexity excess over the random segments.
    pub max_convexity_violation: f64,
    /// Largest `|f** + l(omega)|` at `v = LIMIT_V`.
    pub max_limit_error: f64,
}

impl DualityReport {
    pub fn passes(&self) -> bool {
        self.max_violation <= FSS_VIOLATION_TOL
            && self.max_convexity_violation <= CONVEXITY_TOL
            && self.max_limit_error < LIMIT_TOL
    }
}

/// `f** <= f` on a `points x points` grid (`omega` in [-6, 6], `v` log-spaced
/// in [1e-4, 4]), convexity of `f**` in mean parameters along random
/// segments, and the `v -> 0` limit `f** = -l(omega)`.
pub fn duality_suite(loss: &Loss1D, points: usize, segments: usize, seed: u64) -> Result<DualityReport> {
    if points < 2 {
        return Err(Error::Config("duality grid needs at least two points per axis".into()));
    }
    let engine = Biconjugate::new(loss);
    let mut max_violation = f64::NEG_INFINITY;
    for i in 0..points {
        let w = -6.0 + 12.0 * i as f64 / (points - 1) as f64;
        for j in 0..points {
            let v = 1e-4 * (4.0f64 / 1e-4).powf(j as f64 / (points - 1) as f64);
            let fss = engine.eval(w, v)?.value;
            let f = -expected_loss_at(loss, w, v, DEFAULT_ORDER)?;
            max_violation = max_violation.max(fss - f);
        }
    }
    let mut rng = stream(seed, VERIFY_STREAM, 0);
    let mut max_convexity_violation = f64::NEG_INFINITY;
    for _ in 0..segments {
        let (wa, va): (f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(0.01..4.0));
        let (wb, vb): (f64, f64) = (rng.random_range(-5.0..5.0), rng.random_range(0.01..4.0));
        let (ma, mb) = ((wa, wa * wa + va), (wb, wb * wb + vb));
        let fa = engine.eval(wa, va)?.value;
        let fb = engine.eval(wb, vb)?.value;
        for t in [0.25, 0.5, 0.75] {
            let m1 = t * ma.0 + (1.0 - t) * mb.0;
            let m2 = t * ma.1 + (1.0 - t) * mb.1;
            let fm = engine.eval(m1, m2 - m1 * m1)?.value;
            max_convexity_violation = max_convexity_violation.max(fm - (t * fa + (1.0 - t) * fb));
        }
    }
    let mut max_limit_error: f64 = 0.0;
    for i in 0..41 {
        let w = -6.0 + 0.3 * i as f64;
        max_limit_error = max_limit_error.max((engine.eval(w, LIMIT_V)?.value + loss.value(w)).abs());
    }
    Ok(DualityReport {
        loss: loss.name,
        max_violation,
        max_convexity_violation,
        max_limit_error,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct Theorem1Row {
    pub loss: &'static str,
    pub lambda: (f64, f64),
    pub sup_over_mu: f64,
    pub sup_over_theta: f64,
    pub gap: f64,
}

/// Random `lambda'` with `lambda'_1` in [-2, 2] and `lambda'_2` in [-2, -0.01].
pub fn theorem1_suite(loss: &Loss1D, count: usize, seed: u64) -> Result<Vec<Theorem1Row>> {
    let mut rng = stream(seed, VERIFY_STREAM, 1);
    (0..count)
        .map(|_| {
            let l2 = -rng.random_range(0.01f64..2.0);
            let l1 = rng.random_range(-2.0..2.0);
            let r = verify_theorem1(loss, l1, l2)?;
            Ok(Theorem1Row {
                loss: loss.name,
                lambda: (l1, l2),
                sup_over_mu: r.sup_over_mu,
                sup_over_theta: r.sup_over_theta,
                gap: r.gap,
            })
        })
        .collect()
}

pub const THEOREM2_RHOS: [f64; 2] = [0.5, 2.0];
pub const THEOREM2_DELTAS: [f64; 2] = [0.01, 0.1];

pub fn theorem2_losses() -> Vec<Loss1D> {
    vec![Loss1D::catalog_quadratic(), Loss1D::three_minima()]
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerifyOutcome {
    pub duality: Vec<DualityReport>,
    pub theorem1: Vec<Theorem1Row>,
    pub theorem2: Vec<(&'static str, relaxbayes::optim::Theorem2Report)>,
}

impl VerifyOutcome {
    pub fn passes(&self) -> bool {
        self.duality.iter().all(DualityReport::passes)
            && self.theorem1.iter().all(|r| r.gap < THEOREM1_TOL)
            && self.theorem2.iter().all(|(_, r)| r.passes(THEOREM2_TOL))
    }
}

fn status_name(s: &Theorem2Status) -> String {
    match s {
        Theorem2Status::Checked => "checked".into(),
        Theorem2Status::AssumptionViolated(why) => format!("assumption violated: {why}"),
        Theorem2Status::NoMatchingSigma => "no matching sigma".into(),
    }
}

/// Run the selected suites and write one CSV per suite into `out`.
pub fn run_verify(cfg: &VerifyConfig, out: Option<&Path>) -> Result<VerifyOutcome> {
    let hash = config_hash(cfg);
    let mut outcome = VerifyOutcome {
        duality: Vec::new(),
        theorem1: Vec::new(),
        theorem2: Vec::new(),
    };
    if cfg.suites.contains(&Suite::Duality) {
        let mut t = Table::new(&["loss", "max_violation", "max_convexity_violation", "max_limit_error"]);
        for loss in Loss1D::catalog() {
            let r = duality_suite(&loss, cfg.grid_points, cfg.segments, cfg.seed)?;
            t.push(vec![r.loss.into(), num(r.max_violation), num(r.max_convexity_violation), num(r.max_limit_error)]);
            outcome.duality.push(r);
        }
        if let Some(out) = out {
            t.write(&out.join("verify_duality.csv"), &hash)?;
        }
    }
    if cfg.suites.contains(&Suite::Theorem1) {
        let mut t = Table::new(&["loss", "lambda1", "lambda2", "sup_over_mu", "sup_over_theta", "gap"]);
        for loss in Loss1D::catalog() {
            for r in theorem1_suite(&loss, cfg.lambdas, cfg.seed)? {
                t.push(vec![r.loss.into(), num(r.lambda.0), num(r.lambda.1), num(r.sup_over_mu), num(r.sup_over_theta), num(r.gap)]);
                outcome.theorem1.push(r);
            }
        }
        if let Some(out) = out {
            t.write(&out.join("verify_theorem1.csv"), &hash)?;
        }
    }
    if cfg.suites.contains(&Suite::Theorem2) {
        let mut t = Table::new(&[
            "loss",
            "rho",
            "delta",
            "theta_sam",
            "m_relaxed",
            "sigma2",
            "gap",
            "residual_sam",
            "residual_relaxed",
            "residual_prox",
            "status",
        ]);
        for loss in theorem2_losses() {
            for rho in THEOREM2_RHOS {
                for delta in THEOREM2_DELTAS {
                    let r = verify_theorem2(&loss, rho, delta)?;
                    t.push(vec![
                        loss.name.into(),
                        num(rho),
                        num(delta),
                        num(r.theta_sam),
                        num(r.m_relaxed),
                        num(r.sigma2),
                        num(r.gap),
                        num(r.residual_sam),
                        num(r.residual_relaxed),
                        num(r.residual_prox),
                        status_name(&r.status),
                    ]);
                    outcome.theorem2.push((loss.name, r));
                }
            }
        }
        if let Some(out) = out {
            t.write(&out.join("verify_theorem2.csv"), &hash)?;
        }
    }
    Ok(outcome)
}
