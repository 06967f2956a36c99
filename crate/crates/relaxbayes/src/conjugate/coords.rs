//! Mean `(omega, omega omega^T + V)` and natural `(V^-1 omega, -V^-1/2)`
//! coordinates of a Gaussian.

use nalgebra::{Cholesky, DMatrix, DVector};

use crate::error::{check_len, Error, Result};

/// Covariance of a Gaussian.
#[derive(Debug, Clone, PartialEq)]
pub enum Covariance {
    /// `v I`
    Isotropic(f64),
    /// Per-coordinate variances.
    Diagonal(DVector<f64>),
    Full(DMatrix<f64>),
}

impl Covariance {
    pub fn to_matrix(&self, p: usize) -> DMatrix<f64> {
        match self {
            Covariance::Isotropic(v) => DMatrix::from_diagonal_element(p, p, *v),
            Covariance::Diagonal(d) => DMatrix::from_diagonal(d),
            Covariance::Full(m) => m.clone(),
        }
    }

    fn validate(&self, p: usize) -> Result<()> {
        match self {
            Covariance::Isotropic(v) if !(*v > 0.0 && v.is_finite()) => {
                Err(Error::Domain(format!("variance must be positive, got {v}")))
            }
            Covariance::Diagonal(d) => {
                check_len("diagonal covariance", p, d.len())?;
                match d.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
                    Some(x) => Err(Error::Domain(format!("variance must be positive, got {x}"))),
                    None => Ok(()),
                }
            }
            Covariance::Full(m) => {
                check_len("covariance rows", p, m.nrows())?;
                check_len("covariance cols", p, m.ncols())?;
                spd_cholesky(m, "covariance").map(|_| ())
            }
            _ => Ok(()),
        }
    }
}

fn spd_cholesky(m: &DMatrix<f64>, what: &str) -> Result<Cholesky<f64, nalgebra::Dyn>> {
    let asym = (m - m.transpose()).abs().max();
    if asym > 1e-12 * (1.0 + m.abs().max()) {
        return Err(Error::Domain(format!("{what} is not symmetric")));
    }
    Cholesky::new(m.clone()).ok_or_else(|| Error::Domain(format!("{what} is not positive definite")))
}

/// A Gaussian `N(omega, V)` with conversions to mean and natural parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpFamCoords {
    pub mean: DVector<f64>,
    pub cov: Covariance,
}

/// Input to [`coords_convert`].
#[derive(Debug, Clone, PartialEq)]
pub enum CoordsInput {
    /// `(mu_1, mu_2) = (E[t], E[t t^T])`
    Mean(DVector<f64>, DMatrix<f64>),
    /// `(lambda_1, lambda_2) = (V^-1 omega, -V^-1/2)`
    Natural(DVector<f64>, DMatrix<f64>),
    MeanCov(DVector<f64>, Covariance),
}

pub fn coords_convert(input: CoordsInput) -> Result<ExpFamCoords> {
    match input {
        CoordsInput::MeanCov(mean, cov) => ExpFamCoords::new(mean, cov),
        CoordsInput::Mean(mu1, mu2) => ExpFamCoords::from_mean_params(&mu1, &mu2),
        CoordsInput::Natural(l1, l2) => ExpFamCoords::from_natural(&l1, &l2),
    }
}

impl ExpFamCoords {
    pub fn new(mean: DVector<f64>, cov: Covariance) -> Result<Self> {
        cov.validate(mean.len())?;
        Ok(Self { mean, cov })
    }

    /// One-dimensional `N(omega, v)`.
    pub fn scalar(omega: f64, v: f64) -> Result<Self> {
        Self::new(DVector::from_element(1, omega), Covariance::Isotropic(v))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn cov_matrix(&self) -> DMatrix<f64> {
        self.cov.to_matrix(self.dim())
    }

    /// `(omega, v)` of a one-dimensional Gaussian.
    pub fn as_scalar(&self) -> Result<(f64, f64)> {
        check_len("scalar coordinates", 1, self.dim())?;
        Ok((self.mean[0], self.cov_matrix()[(0, 0)]))
    }

    pub fn from_mean_params(mu1: &DVector<f64>, mu2: &DMatrix<f64>) -> Result<Self> {
        let cov = mu2 - mu1 * mu1.transpose();
        // Symmetrize the round-off from the outer product.
        let cov = 0.5 * (&cov + cov.transpose());
        Self::new(mu1.clone(), Covariance::Full(cov))
    }

    pub fn from_natural(l1: &DVector<f64>, l2: &DMatrix<f64>) -> Result<Self> {
        check_len("natural parameter", l1.len(), l2.nrows())?;
        let prec = -2.0 * l2;
        let chol = spd_cholesky(&prec, "-2 lambda_2").map_err(|_| {
            Error::Domain("lambda_2 must be negative definite".into())
        })?;
        let cov = chol.inverse();
        let cov = 0.5 * (&cov + cov.transpose());
        let mean = chol.solve(l1);
        Self::new(mean, Covariance::Full(cov))
    }

    pub fn mean_params(&self) -> (DVector<f64>, DMatrix<f64>) {
        let mu2 = self.cov_matrix() + &self.mean * self.mean.transpose();
        (self.mean.clone(), mu2)
    }

    pub fn natural_params(&self) -> (DVector<f64>, DMatrix<f64>) {
        match &self.cov {
            Covariance::Isotropic(v) => {
                let p = self.dim();
                (&self.mean / *v, DMatrix::from_diagonal_element(p, p, -0.5 / v))
            }
            Covariance::Diagonal(d) => (
                self.mean.component_div(d),
                DMatrix::from_diagonal(&d.map(|x| -0.5 / x)),
            ),
            Covariance::Full(m) => {
                let chol = Cholesky::new(m.clone()).expect("validated at construction");
                let prec = chol.inverse();
                let prec = 0.5 * (&prec + prec.transpose());
                (chol.solve(&self.mean), -0.5 * prec)
            }
        }
    }
}

/// `(mu_1, mu_2) = (omega, omega^2 + v)`.
pub fn mean_params_1d(omega: f64, v: f64) -> (f64, f64) {
    (omega, omega * omega + v)
}

/// `(lambda_1, lambda_2) = (omega/v, -1/(2 v))`.
pub fn natural_params_1d(omega: f64, v: f64) -> (f64, f64) {
    (omega / v, -0.5 / v)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn scalar_substitution() {
        let c = ExpFamCoords::scalar(1.0, 2.0).unwrap();
        let (m1, m2) = c.mean_params();
        let (l1, l2) = c.natural_params();
        assert_eq!((m1[0], m2[(0, 0)]), (1.0, 3.0));
        assert_eq!((l1[0], l2[(0, 0)]), (0.5, -0.25));
        assert_eq!(mean_params_1d(1.0, 2.0), (1.0, 3.0));
        assert_eq!(natural_params_1d(1.0, 2.0), (0.5, -0.25));
    }

    #[test]
    fn standard_normal_from_natural() {
        let c = coords_convert(CoordsInput::Natural(
            DVector::from_element(1, 0.0),
            DMatrix::from_element(1, 1, -0.5),
        ))
        .unwrap();
        assert_eq!(c.as_scalar().unwrap(), (0.0, 1.0));
        let (m1, m2) = c.mean_params();
        assert_eq!((m1[0], m2[(0, 0)]), (0.0, 1.0));
    }

    #[test]
    fn invalid_inputs_are_domain_errors() {
        assert!(matches!(ExpFamCoords::scalar(0.0, 0.0), Err(Error::Domain(_))));
        assert!(matches!(ExpFamCoords::scalar(0.0, -1.0), Err(Error::Domain(_))));
        let l1 = DVector::from_element(1, 0.0);
        assert!(coords_convert(CoordsInput::Natural(l1.clone(), DMatrix::from_element(1, 1, 0.5))).is_err());
        // mu_2 below mu_1^2 is outside the marginal polytope
        assert!(coords_convert(CoordsInput::Mean(DVector::from_element(1, 2.0), DMatrix::from_element(1, 1, 3.0))).is_err());
        let not_spd = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(ExpFamCoords::new(DVector::zeros(2), Covariance::Full(not_spd)).is_err());
    }

    fn random_spd(p: usize, entries: &[f64]) -> DMatrix<f64> {
        let a = DMatrix::from_iterator(p, p, entries.iter().copied());
        &a * a.transpose() + DMatrix::identity(p, p) * 0.5
    }

    proptest! {
        #[test]
        fn natural_mean_round_trip(
            p in 1usize..4,
            mean in proptest::collection::vec(-3.0f64..3.0, 3),
            entries in proptest::collection::vec(-1.0f64..1.0, 9),
        ) {
            let mean = DVector::from_iterator(p, mean.into_iter().take(p));
            let cov = random_spd(p, &entries[..p * p]);
            let c = ExpFamCoords::new(mean, Covariance::Full(cov)).unwrap();
            let (l1, l2) = c.natural_params();
            let back = ExpFamCoords::from_natural(&l1, &l2).unwrap();
            let (m1, m2) = back.mean_params();
            let again = ExpFamCoords::from_mean_params(&m1, &m2).unwrap();
            let (l1b, l2b) = again.natural_params();
            prop_assert!((l1 - l1b).abs().max() < 1e-12);
            prop_assert!((l2 - l2b).abs().max() < 1e-12);
        }
    }
}
