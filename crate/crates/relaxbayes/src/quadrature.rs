//! Gaussian expectations by Gauss-Hermite and trapezoid rules.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use nalgebra::{DMatrix, SymmetricEigen};

/// Probabilists' Gauss-Hermite rule with weights normalized to sum to one,
/// so that `E[h(Z)] ~ sum_i w_i h(x_i)` for `Z ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    /// Golub-Welsch: eigen-decomposition of the Jacobi matrix of the Hermite recurrence.
    pub fn new(order: usize) -> Self {
        assert!(order >= 1, "quadrature order must be positive");
        let mut jac = DMatrix::zeros(order, order);
        for k in 1..order {
            let b = (k as f64).sqrt();
            jac[(k - 1, k)] = b;
            jac[(k, k - 1)] = b;
        }
        let eig = SymmetricEigen::new(jac);
        let mut pairs: Vec<(f64, f64)> = (0..order)
            .map(|i| (eig.eigenvalues[i], eig.eigenvectors[(0, i)].powi(2)))
            .collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        // Symmetrize to remove eigen-solver round-off.
        for i in 0..order / 2 {
            let j = order - 1 - i;
            let x = 0.5 * (pairs[j].0 - pairs[i].0);
            let w = 0.5 * (pairs[i].1 + pairs[j].1);
            pairs[i] = (-x, w);
            pairs[j] = (x, w);
        }
        if order % 2 == 1 {
            pairs[order / 2].0 = 0.0;
        }
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        Self {
            nodes: pairs.iter().map(|p| p.0).collect(),
            weights: pairs.iter().map(|p| p.1 / total).collect(),
        }
    }

    /// Shared rule for `order`, built once.
    pub fn cached(order: usize) -> Arc<GaussHermite> {
        static CACHE: OnceLock<Mutex<HashMap<usize, Arc<GaussHermite>>>> = OnceLock::new();
        let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
        let mut map = cache.lock().expect("quadrature cache poisoned");
        map.entry(order)
            .or_insert_with(|| Arc::new(GaussHermite::new(order)))
            .clone()
    }

    /// `E[h(t)]` for `t ~ N(mean, var)`.
    pub fn expect(&self, mean: f64, var: f64, h: impl Fn(f64) -> f64) -> f64 {
        let sd = var.sqrt();
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(x, w)| w * h(mean + sd * x))
            .sum()
    }
}

/// Trapezoid rule for `E[h(t)]`, `t ~ N(mean, var)`, over `mean +- half_width_sd * sd`.
pub fn trapezoid_expect(mean: f64, var: f64, nodes: usize, half_width_sd: f64, h: impl Fn(f64) -> f64) -> f64 {
    let sd = var.sqrt();
    let lo = mean - half_width_sd * sd;
    let step = 2.0 * half_width_sd * sd / (nodes - 1) as f64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * var).sqrt();
    let mut acc = 0.0;
    for i in 0..nodes {
        let t = lo + step * i as f64;
        let w = if i == 0 || i + 1 == nodes { 0.5 } else { 1.0 };
        let z = (t - mean) / sd;
        acc += w * h(t) * (-0.5 * z * z).exp();
    }
    acc * step * norm
}
