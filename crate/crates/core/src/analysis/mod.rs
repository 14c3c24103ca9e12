//! Metrics, restricted extreme eigenvalues, error-bound constants and the
//! empirical checks of the recovery theory.

mod bounds;
mod envelopes;
mod lemmas;
mod rho;

pub use bounds::{bound_constants, bound_report, error_bounds, BoundConstants, BoundReport};
pub use envelopes::{check_gaussian_envelopes, check_gaussian_envelopes_with, EnvelopeOptions, EnvelopeReport};
pub use lemmas::{check_lemma1, check_partition_inequalities, partition_blocks, PartitionReport};
pub use rho::{binomial, rho_extremes, MatrixTag, RhoMode, RhoReport, DEFAULT_BUDGET};

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// SNR reported for exact recovery.
pub const SNR_CAP_DB: f64 = 300.0;

/// `−20 log₁₀(‖x̂ − x*‖/‖x*‖)` in dB, capped at [`SNR_CAP_DB`].
pub fn snr(x_hat: &DVector<f64>, x_star: &DVector<f64>) -> Result<f64> {
    if x_hat.len() != x_star.len() {
        return Err(Error::DimensionMismatch(format!("x̂ has length {} but x* has {}", x_hat.len(), x_star.len())));
    }
    let reference = x_star.norm();
    if reference == 0.0 {
        return Err(Error::InvalidArgument("SNR is undefined for x* = 0".into()));
    }
    let err = (x_hat - x_star).norm();
    if err == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    // + 0.0 turns −0 into 0 for x̂ = 0
    Ok((-20.0 * (err / reference).log10()).min(SNR_CAP_DB) + 0.0)
}

/// Largest column ℓ2 norm.
pub fn f_max(phi_tilde: &DMatrix<f64>) -> f64 {
    phi_tilde.column_iter().map(|c| c.norm()).fold(0.0, f64::max)
}
