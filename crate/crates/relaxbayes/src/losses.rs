//! Scalar test losses used by the duality and theorem suites.
//!
//! The three-minima loss is
//! `l(t) = -sum_i d_i exp(-(t - c_i)^2 / (2 w_i^2)) + K t^2`
//! with centres `(-3.5, 0.3, 3.5)`, depths `(0.8, 0.8, 0.8)`, widths
//! `(0.45, 2.0, 0.45)` and `K = 1e-4`: two sharp, deeper minima around -3.5
//! and 3.5 and a wide one around 0.3.

/// Sum of negative Gaussian bumps plus a quadratic `k t^2`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianBumps {
    pub centers: Vec<f64>,
    pub depths: Vec<f64>,
    pub widths: Vec<f64>,
    pub k: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LossFlags {
    pub lower_bounded: bool,
    pub coercive: bool,
    pub quadratically_majorized: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LossKind {
    Bumps(GaussianBumps),
    /// `(c/2)(t - a)^2`
    Quadratic { curvature: f64, center: f64 },
    /// `a t + b`
    Affine { slope: f64, intercept: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Loss1D {
    pub name: &'static str,
    pub kind: LossKind,
    pub domain: (f64, f64),
}

pub const THREE_MINIMA_CENTERS: [f64; 3] = [-3.5, 0.3, 3.5];
pub const THREE_MINIMA_DEPTHS: [f64; 3] = [0.8, 0.8, 0.8];
pub const THREE_MINIMA_WIDTHS: [f64; 3] = [0.45, 2.0, 0.45];
pub const COERCIVE_COEFF: f64 = 1e-4;

impl Loss1D {
    pub fn three_minima() -> Self {
        Self {
            name: "three_minima",
            kind: LossKind::Bumps(GaussianBumps {
                centers: THREE_MINIMA_CENTERS.to_vec(),
                depths: THREE_MINIMA_DEPTHS.to_vec(),
                widths: THREE_MINIMA_WIDTHS.to_vec(),
                k: COERCIVE_COEFF,
            }),
            domain: (-10.0, 10.0),
        }
    }

    /// Two equal wells at +-2, symmetric about zero.
    pub fn double_well() -> Self {
        Self {
            name: "double_well",
            kind: LossKind::Bumps(GaussianBumps {
                centers: vec![-2.0, 2.0],
                depths: vec![1.0, 1.0],
                widths: vec![0.8, 0.8],
                k: COERCIVE_COEFF,
            }),
            domain: (-10.0, 10.0),
        }
    }

    /// `(c/2)(t - a)^2`.
    pub fn quadratic(curvature: f64, center: f64) -> Self {
        Self {
            name: "quadratic",
            kind: LossKind::Quadratic { curvature, center },
            domain: (center - 20.0, center + 20.0),
        }
    }

    /// Catalog quadratic: weak curvature so that SAM's constraint stays active.
    pub fn catalog_quadratic() -> Self {
        Self::quadratic(0.01, 5.0)
    }

    pub fn affine(slope: f64, intercept: f64) -> Self {
        Self {
            name: "affine",
            kind: LossKind::Affine { slope, intercept },
            domain: (-10.0, 10.0),
        }
    }

    pub fn constant(c: f64) -> Self {
        Self::affine(0.0, c)
    }

    /// The three catalog losses used by the verification suites.
    pub fn catalog() -> Vec<Self> {
        vec![Self::three_minima(), Self::catalog_quadratic(), Self::double_well()]
    }

    pub fn value(&self, t: f64) -> f64 {
        match &self.kind {
            LossKind::Bumps(b) => {
                let mut v = b.k * t * t;
                for i in 0..b.centers.len() {
                    let u = (t - b.centers[i]) / b.widths[i];
                    v -= b.depths[i] * (-0.5 * u * u).exp();
                }
                v
            }
            LossKind::Quadratic { curvature, center } => 0.5 * curvature * (t - center).powi(2),
            LossKind::Affine { slope, intercept } => slope * t + intercept,
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match &self.kind {
            LossKind::Bumps(b) => {
                let mut g = 2.0 * b.k * t;
                for i in 0..b.centers.len() {
                    let u = (t - b.centers[i]) / b.widths[i];
                    g += b.depths[i] * u / b.widths[i] * (-0.5 * u * u).exp();
                }
                g
            }
            LossKind::Quadratic { curvature, center } => curvature * (t - center),
            LossKind::Affine { slope, .. } => *slope,
        }
    }

    pub fn second_deriv(&self, t: f64) -> f64 {
        match &self.kind {
            LossKind::Bumps(b) => {
                let mut h = 2.0 * b.k;
                for i in 0..b.centers.len() {
                    let u = (t - b.centers[i]) / b.widths[i];
                    h += b.depths[i] / (b.widths[i] * b.widths[i]) * (1.0 - u * u) * (-0.5 * u * u).exp();
                }
                h
            }
            LossKind::Quadratic { curvature, .. } => *curvature,
            LossKind::Affine { .. } => 0.0,
        }
    }

    /// Coefficient of `t^2` in the growth of the loss at infinity.
    pub fn growth(&self) -> f64 {
        match &self.kind {
            LossKind::Bumps(b) => b.k,
            LossKind::Quadratic { curvature, .. } => 0.5 * curvature,
            LossKind::Affine { .. } => 0.0,
        }
    }

    pub fn flags(&self) -> LossFlags {
        let coercive = self.growth() > 0.0;
        LossFlags {
            lower_bounded: coercive || matches!(self.kind, LossKind::Affine { slope, .. } if slope == 0.0),
            coercive,
            quadratically_majorized: true,
        }
    }

    /// Largest |l'| on a fine grid over the domain hint.
    pub fn max_abs_deriv(&self) -> f64 {
        let (lo, hi) = self.domain;
        let n = 4000;
        (0..=n)
            .map(|i| self.deriv(lo + (hi - lo) * i as f64 / n as f64).abs())
            .fold(0.0, f64::max)
    }
}
