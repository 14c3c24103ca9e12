use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{rho_extremes, MatrixTag, RhoMode};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeOptions {
    /// Relative room for the finite-size terms: the checks are
    /// `√ρ⁺ ≤ (17/16)√M(1+slack)` and `√ρ⁻ ≥ (15/16)√M(1−slack)`.
    pub slack: f64,
    /// Random subsets per trial.
    pub subsets: usize,
}

impl Default for EnvelopeOptions {
    fn default() -> Self {
        EnvelopeOptions { slack: 0.15, subsets: 500 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeReport {
    pub m: usize,
    pub n: usize,
    pub k: usize,
    pub trials: usize,
    pub options: EnvelopeOptions,
    /// `k ln N / M`; the envelopes are only expected to hold when this is small.
    pub load: f64,
    /// Fraction of trials meeting both envelopes.
    pub pass_fraction: f64,
    pub upper_pass_fraction: f64,
    pub lower_pass_fraction: f64,
    /// `√ρ⁺/√M` per trial.
    pub upper_ratios: Vec<f64>,
    /// `√ρ⁻/√M` per trial.
    pub lower_ratios: Vec<f64>,
}

/// Samples standard Gaussian `M × N` matrices and checks the sampled
/// restricted extreme singular values against `(17/16)√M` and `(15/16)√M`.
pub fn check_gaussian_envelopes(m: usize, n: usize, k: usize, trials: usize, seed: u64) -> Result<EnvelopeReport> {
    check_gaussian_envelopes_with(m, n, k, trials, seed, EnvelopeOptions::default())
}

pub fn check_gaussian_envelopes_with(
    m: usize,
    n: usize,
    k: usize,
    trials: usize,
    seed: u64,
    options: EnvelopeOptions,
) -> Result<EnvelopeReport> {
    if m == 0 || n == 0 || trials == 0 {
        return Err(Error::InvalidArgument("M, N and trials must be positive".into()));
    }
    if !(0.0..1.0).contains(&options.slack) {
        return Err(Error::InvalidArgument(format!("slack must lie in [0, 1), got {}", options.slack)));
    }
    let root_m = (m as f64).sqrt();
    let ratios: Vec<(f64, f64)> = (0..trials)
        .into_par_iter()
        .map(|t| {
            let trial_seed = rng::derive_seed(seed, &[t as u64]);
            let mut g = rng::stream(trial_seed);
            let phi = DMatrix::from_fn(m, n, |_, _| g.sample::<f64, _>(StandardNormal));
            let mode = RhoMode::Sampled { subsets: options.subsets, seed: rng::derive_seed(trial_seed, &[1]) };
            let r = rho_extremes(k, &phi, MatrixTag::Phi, mode)?;
            Ok((r.rho_plus.sqrt() / root_m, r.rho_minus.sqrt() / root_m))
        })
        .collect::<Result<_>>()?;

    let upper_limit = 17.0 / 16.0 * (1.0 + options.slack);
    let lower_limit = 15.0 / 16.0 * (1.0 - options.slack);
    let up_ok: Vec<bool> = ratios.iter().map(|r| r.0 <= upper_limit).collect();
    let lo_ok: Vec<bool> = ratios.iter().map(|r| r.1 >= lower_limit).collect();
    let frac = |flags: &mut dyn Iterator<Item = bool>| flags.filter(|&b| b).count() as f64 / trials as f64;
    Ok(EnvelopeReport {
        m,
        n,
        k,
        trials,
        options,
        load: k as f64 * (n as f64).ln() / m as f64,
        pass_fraction: frac(&mut up_ok.iter().zip(&lo_ok).map(|(a, b)| *a && *b)),
        upper_pass_fraction: frac(&mut up_ok.iter().copied()),
        lower_pass_fraction: frac(&mut lo_ok.iter().copied()),
        upper_ratios: ratios.iter().map(|r| r.0).collect(),
        lower_ratios: ratios.iter().map(|r| r.1).collect(),
    })
}
