//! Fenchel duality for Gaussian exponential families.

mod blr;
mod coords;
mod cutting;
mod duality;

pub use blr::{
    blr_full_gaussian, blr_update, elbo_exact, expected_loss_derivatives, expected_loss_gradient, gaussian_expect,
    BinaryLogreg, BlrMode, BlrOptions, BlrRun,
};
pub use coords::{coords_convert, mean_params_1d, natural_params_1d, CoordsInput, Covariance, ExpFamCoords};
pub use cutting::{
    biconjugate_gradient_cp, biconjugate_gradient_cp_with, solve_cutting_plane, CpSolution, CuttingPlaneModel, KKT_TOL,
};
pub use duality::{
    biconjugate, conjugate_fstar, expected_loss, expected_loss_at, log_z, smoothed_curves, verify_theorem1,
    Biconjugate, BiconjugateValue, CurveRow, Theorem1Report, DEFAULT_ORDER,
};
