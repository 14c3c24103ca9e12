use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use super::{f_max, rho_extremes, MatrixTag, RhoMode};
use crate::error::{Error, Result};
use crate::partition::PartitionedSystem;

/// `A₀`, `A₁` and, when `A₀ > 0`, `C₁`, `C₂`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub s: usize,
    pub l: usize,
    pub a0: f64,
    pub a1: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
}

impl BoundConstants {
    pub fn valid(&self) -> bool {
        self.a0 > 0.0
    }
}

/// Assembles the constants from `ρ⁻(s+l)`, `ρ⁺(s+2l)` and `ρ⁻(s+2l)`.
///
/// `A₀ = ρ⁻(s+l) − 3√(s/l)(ρ⁺(s+2l) − ρ⁻(s+2l))`,
/// `A₁ = 4(ρ⁺(s+2l) − ρ⁻(s+2l))`,
/// `C₁ = 4 + √(1+9s/l)·A₁/A₀`, `C₂ = √((1+9s/l)/A₀)`.
pub fn bound_constants(
    rho_s_plus_l_minus: f64,
    rho_s_plus_2l_plus: f64,
    rho_s_plus_2l_minus: f64,
    s: usize,
    l: usize,
) -> BoundConstants {
    let ratio = s as f64 / l as f64;
    let spread = rho_s_plus_2l_plus - rho_s_plus_2l_minus;
    let a0 = rho_s_plus_l_minus - 3.0 * ratio.sqrt() * spread;
    let a1 = 4.0 * spread;
    let growth = (1.0 + 9.0 * ratio).sqrt();
    let (c1, c2) =
        if a0 > 0.0 { (Some(4.0 + growth * a1 / a0), Some(growth / a0.sqrt())) } else { (None, None) };
    BoundConstants { s, l, a0, a1, c1, c2 }
}

/// `(bound_lasso, bound_linf)` on `‖x̂ − x*‖` for the support guess `t0`.
///
/// `bound_lasso = 6C₂²√s·λΔ/√(1+9s/l) + (C₁/√l)‖x*_{T₀ᶜ}‖₁ + 2.5C₂√(λΔ‖x*_{T₀ᶜ}‖₁)`,
/// `bound_linf = C₂√M̃·Δ + (C₁/√l)‖x*_{T₀ᶜ}‖₁`.
pub fn error_bounds(
    system: &PartitionedSystem,
    x_star: &DVector<f64>,
    t0: &[usize],
    lambda: f64,
    constants: &BoundConstants,
) -> Result<(f64, f64)> {
    let (Some(c1), Some(c2)) = (constants.c1, constants.c2) else {
        return Err(Error::InvalidConstants { a0: constants.a0 });
    };
    if t0.len() != constants.s {
        return Err(Error::InvalidArgument(format!("|T₀| = {} but the constants use s = {}", t0.len(), constants.s)));
    }
    if x_star.len() != system.cols() || t0.iter().any(|&j| j >= system.cols()) {
        return Err(Error::DimensionMismatch("x* or T₀ does not match the system".into()));
    }
    let (s, l) = (constants.s as f64, constants.l as f64);
    let mut in_t0 = vec![false; system.cols()];
    t0.iter().for_each(|&j| in_t0[j] = true);
    let tail: f64 = x_star.iter().zip(&in_t0).filter(|(_, &inside)| !inside).map(|(v, _)| v.abs()).sum();
    let ld = lambda * system.delta;
    let growth = (1.0 + 9.0 * s / l).sqrt();
    let tail_term = c1 / l.sqrt() * tail;
    let lasso = 6.0 * c2 * c2 * s.sqrt() * ld / growth + tail_term + 2.5 * c2 * (ld * tail).sqrt();
    let linf = c2 * (system.m_tilde() as f64).sqrt() * system.delta + tail_term;
    Ok((lasso, linf))
}

/// Everything needed to judge the error bounds for one instance.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub s: usize,
    pub l: usize,
    pub a0: f64,
    pub a1: f64,
    pub c1: Option<f64>,
    pub c2: Option<f64>,
    pub bound_lasso: Option<f64>,
    pub bound_linf: Option<f64>,
    pub valid: bool,
    pub f_max: f64,
}

impl BoundReport {
    /// The smaller of the two bounds, when the constants are valid.
    pub fn best(&self) -> Option<f64> {
        Some(self.bound_lasso?.min(self.bound_linf?))
    }
}

/// Computes `ρ̃±` of the needed orders in `mode`, the constants and, when
/// they are valid, both bounds with `T₀ = t0`.
pub fn bound_report(
    system: &PartitionedSystem,
    x_star: &DVector<f64>,
    t0: &[usize],
    l: usize,
    lambda: f64,
    mode: RhoMode,
) -> Result<BoundReport> {
    let s = t0.len();
    if s == 0 || l == 0 {
        return Err(Error::InvalidArgument("s and l must be positive".into()));
    }
    let phi = &system.phi_tilde;
    let n = phi.ncols();
    if s + 2 * l > n {
        return Err(Error::InvalidArgument(format!("s + 2l = {} exceeds N = {n}", s + 2 * l)));
    }
    let small = rho_extremes(s + l, phi, MatrixTag::PhiTilde, mode)?;
    let large = rho_extremes(s + 2 * l, phi, MatrixTag::PhiTilde, mode)?;
    let constants = bound_constants(small.rho_minus, large.rho_plus, large.rho_minus, s, l);
    let bounds = if constants.valid() { Some(error_bounds(system, x_star, t0, lambda, &constants)?) } else { None };
    Ok(BoundReport {
        s,
        l,
        a0: constants.a0,
        a1: constants.a1,
        c1: constants.c1,
        c2: constants.c2,
        bound_lasso: bounds.map(|b| b.0),
        bound_linf: bounds.map(|b| b.1),
        valid: constants.valid(),
        f_max: f_max(phi),
    })
}
