//! Choosing `ε` and `λ` so that the true signal is admitted with a target
//! confidence `P = 1 − π`.
//!
//! The Monte Carlo estimators assume the unsaturated quantization errors are
//! i.i.d. uniform on `[−Δ/2, Δ/2]`. Both statistics are homogeneous in `Δ`,
//! so samples are drawn on `[−1, 1]` and the result does not depend on `Δ`
//! beyond validation.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::f_max;
use crate::error::{Error, Result};
use crate::partition::PartitionedSystem;
use crate::rng;

/// Default Monte Carlo sample count.
pub const DEFAULT_SAMPLES: usize = 100_000;
/// Smallest accepted Monte Carlo sample count.
pub const MIN_SAMPLES: usize = 1000;
/// Samples per independently seeded chunk.
const CHUNK: usize = 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Monte Carlo quantiles of both statistics.
    Empirical,
    /// `λ` from the Hoeffding bound; `ε` still from its Monte Carlo quantile.
    Hoeffding,
    /// Read off the true signal, so it is feasible with certainty.
    Oracle,
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Method::Empirical => "empirical",
            Method::Hoeffding => "hoeffding",
            Method::Oracle => "oracle",
        })
    }
}

impl std::str::FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "empirical" => Ok(Method::Empirical),
            "hoeffding" => Ok(Method::Hoeffding),
            "oracle" => Ok(Method::Oracle),
            _ => Err(Error::InvalidArgument(format!("unknown calibration method {s:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// ℓ2 radius in units of `Δ`.
    pub epsilon: f64,
    /// Dantzig and LASSO weight; the Dantzig half-width is `λΔ/2`.
    pub lambda: f64,
    pub method: Method,
    /// `P = 1 − π`; exactly 1 for the oracle.
    pub confidence: f64,
    /// Monte Carlo samples drawn, 0 when none were needed.
    pub samples: usize,
}

fn check_pi(pi: f64) -> Result<()> {
    if pi > 0.0 && pi < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("π must lie in (0, 1), got {pi}")))
    }
}

fn check_sampling(pi: f64, delta: f64, n_samples: usize) -> Result<()> {
    check_pi(pi)?;
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(Error::InvalidArgument(format!("Δ must be positive, got {delta}")));
    }
    if n_samples < MIN_SAMPLES {
        return Err(Error::InvalidArgument(format!("need at least {MIN_SAMPLES} samples, got {n_samples}")));
    }
    Ok(())
}

/// The `⌈(1−π)n⌉`-th smallest value (1-based), clamped to the sample range.
pub fn upper_quantile(mut values: Vec<f64>, pi: f64) -> f64 {
    assert!(!values.is_empty(), "quantile of an empty sample");
    values.sort_by(f64::total_cmp);
    let n = values.len();
    let rank = ((1.0 - pi) * n as f64).ceil() as usize;
    values[rank.clamp(1, n) - 1]
}

/// Draws `n` statistics in seeded chunks. Chunk `c` uses the stream
/// `derive_seed(seed, [c])` and always holds the same samples, so the
/// output is independent of how chunks are scheduled.
fn sample_chunks<F>(n: usize, seed: u64, stat: F) -> Vec<f64>
where
    F: Fn(&mut rand_chacha::ChaCha8Rng, usize) -> Vec<f64> + Sync,
{
    let chunks = n.div_ceil(CHUNK);
    let parts: Vec<Vec<f64>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut g = rng::stream(rng::derive_seed(seed, &[c as u64]));
            let len = CHUNK.min(n - c * CHUNK);
            stat(&mut g, len)
        })
        .collect();
    parts.concat()
}

/// Uniform draws on `[−1, 1]`, one row per sample.
fn uniform_rows(g: &mut rand_chacha::ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            out[(r, c)] = g.gen_range(-1.0..=1.0);
        }
    }
    out
}

/// Empirical `(1−π)`-quantile of `‖ξ‖/Δ` for `ξ` uniform on `[−Δ/2, Δ/2]^M̃`.
pub fn epsilon_empirical(pi: f64, delta: f64, m_tilde: usize, n_samples: usize, seed: u64) -> Result<f64> {
    check_sampling(pi, delta, n_samples)?;
    let values = sample_chunks(n_samples, seed, |g, len| {
        let eta = uniform_rows(g, len, m_tilde);
        // ‖ξ‖/Δ = ‖η‖/2 with ξ = ηΔ/2
        eta.row_iter().map(|r| r.norm() / 2.0).collect()
    });
    Ok(upper_quantile(values, pi))
}

/// Empirical `(1−π)`-quantile of `2‖Φ̃ᵀξ‖∞/Δ`.
pub fn lambda_empirical(pi: f64, delta: f64, phi_tilde: &DMatrix<f64>, n_samples: usize, seed: u64) -> Result<f64> {
    check_sampling(pi, delta, n_samples)?;
    let m = phi_tilde.nrows();
    let values = sample_chunks(n_samples, seed, |g, len| {
        let eta = uniform_rows(g, len, m);
        // 2‖Φ̃ᵀξ‖∞/Δ = ‖Φ̃ᵀη‖∞
        let corr = eta * phi_tilde;
        corr.row_iter().map(|r| r.amax()).collect()
    });
    Ok(upper_quantile(values, pi))
}

/// `√(2 ln(2N/π)) · f_max`.
pub fn lambda_hoeffding(pi: f64, n: usize, f_max: f64) -> Result<f64> {
    check_pi(pi)?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be positive".into()));
    }
    let log = (2.0 * n as f64 / pi).ln();
    Ok((2.0 * log.max(0.0)).sqrt() * f_max)
}

/// `ε = ‖Φ̃x* − ỹ‖/Δ` and `λ = 2‖Φ̃ᵀ(Φ̃x* − ỹ)‖∞/Δ`: the smallest values that
/// admit `x*`.
pub fn oracle_parameters(system: &PartitionedSystem, x_star: &DVector<f64>) -> CalibrationResult {
    let resid = system.tilde_residual(x_star);
    let corr = system.phi_tilde.tr_mul(&resid);
    CalibrationResult {
        epsilon: resid.norm() / system.delta,
        lambda: 2.0 * corr.amax() / system.delta,
        method: Method::Oracle,
        confidence: 1.0,
        samples: 0,
    }
}

/// Runs `method` at confidence `1 − π` on `system`. The oracle needs
/// `x_star` and ignores `pi`.
pub fn calibrate(
    system: &PartitionedSystem,
    method: Method,
    pi: f64,
    n_samples: usize,
    seed: u64,
    x_star: Option<&DVector<f64>>,
) -> Result<CalibrationResult> {
    if method == Method::Oracle {
        let x = x_star.ok_or(Error::MissingParameter("x_star"))?;
        if x.len() != system.cols() {
            return Err(Error::DimensionMismatch(format!(
                "x* has length {} but the system has {} columns",
                x.len(),
                system.cols()
            )));
        }
        return Ok(oracle_parameters(system, x));
    }
    let eps_seed = rng::derive_seed(seed, &[0]);
    let lambda_seed = rng::derive_seed(seed, &[1]);
    let epsilon = epsilon_empirical(pi, system.delta, system.m_tilde(), n_samples, eps_seed)?;
    let lambda = match method {
        Method::Empirical => lambda_empirical(pi, system.delta, &system.phi_tilde, n_samples, lambda_seed)?,
        _ => lambda_hoeffding(pi, system.cols(), f_max(&system.phi_tilde))?,
    };
    Ok(CalibrationResult { epsilon, lambda, method, confidence: 1.0 - pi, samples: n_samples })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instance::generate_instance;
    use crate::partition::partition;
    use crate::quantizer::QuantizerConfig;

    #[test]
    fn quantile_rank() {
        let v: Vec<f64> = (1..=10).map(f64::from).collect();
        assert_eq!(upper_quantile(v.clone(), 0.05), 10.0);
        assert_eq!(upper_quantile(v.clone(), 0.1), 9.0);
        assert_eq!(upper_quantile(v.clone(), 0.25), 8.0);
        assert_eq!(upper_quantile(v, 0.999), 1.0);
    }

    #[test]
    fn single_row_epsilon_matches_uniform_quantile() {
        for pi in [0.05, 0.3, 0.7] {
            let eps = epsilon_empirical(pi, 1.0, 1, 20_000, 4).unwrap();
            let exact = (1.0 - pi) / 2.0;
            assert!((eps - exact).abs() <= 0.02 * exact.max(0.1), "{pi}: {eps} vs {exact}");
        }
    }

    #[test]
    fn single_entry_lambda_matches_uniform_quantile() {
        let phi = DMatrix::from_element(1, 1, 1.0);
        let lam = lambda_empirical(0.1, 0.5, &phi, 20_000, 8).unwrap();
        assert!((lam - 0.9).abs() < 0.01, "{lam}");
        assert_eq!(lambda_empirical(0.1, 0.5, &DMatrix::zeros(3, 4), 1000, 1).unwrap(), 0.0);
    }

    #[test]
    fn lambda_is_homogeneous_in_phi() {
        let mut g = rng::stream(2);
        let phi = DMatrix::from_fn(6, 4, |_, _| g.gen_range(-1.0..1.0));
        let a = lambda_empirical(0.05, 1.0, &phi, 3000, 11).unwrap();
        let b = lambda_empirical(0.05, 1.0, &(&phi * 3.0), 3000, 11).unwrap();
        assert!((b - 3.0 * a).abs() <= 1e-12 * b);
    }

    #[test]
    fn hoeffding_formula() {
        let pi = 2.0 / std::f64::consts::E.powi(2);
        assert!((lambda_hoeffding(pi, 1, 1.5).unwrap() - 3.0).abs() < 1e-12);
        assert!(lambda_hoeffding(0.025, 50, 1.0).unwrap() > lambda_hoeffding(0.05, 50, 1.0).unwrap());
        assert!(lambda_hoeffding(0.0, 5, 1.0).is_err());
        assert!(lambda_hoeffding(1.0, 5, 1.0).is_err());
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(epsilon_empirical(1.2, 1.0, 3, 1000, 0).is_err());
        assert!(epsilon_empirical(0.1, 1.0, 3, 999, 0).is_err());
        assert!(epsilon_empirical(0.1, 0.0, 3, 1000, 0).is_err());
    }

    #[test]
    fn sampling_is_deterministic() {
        let a = epsilon_empirical(0.05, 1.0, 7, 5000, 99).unwrap();
        let b = epsilon_empirical(0.05, 1.0, 7, 5000, 99).unwrap();
        assert_eq!(a.to_bits(), b.to_bits());
        let c = epsilon_empirical(0.05, 1.0, 7, 5000, 100).unwrap();
        assert_ne!(a, c);
    }

    fn system(seed: u64) -> (PartitionedSystem, DVector<f64>) {
        let inst = generate_instance(30, 20, 3, 4.0, QuantizerConfig::new(3, 1.0).unwrap(), seed).unwrap();
        (partition(&inst), inst.x_star)
    }

    #[test]
    fn oracle_admits_truth_with_equality() {
        let (sys, x) = system(3);
        let cal = oracle_parameters(&sys, &x);
        assert_eq!(cal.method, Method::Oracle);
        assert_eq!(cal.confidence, 1.0);
        let r = sys.tilde_residual(&x);
        assert!((r.norm() - cal.epsilon * sys.delta).abs() < 1e-12);
        assert!((sys.phi_tilde.tr_mul(&r).amax() - cal.lambda * sys.delta / 2.0).abs() < 1e-12);
        let rt = calibrate(&sys, Method::Oracle, 0.5, 0, 0, Some(&x)).unwrap();
        assert_eq!(rt, cal);
        assert!(calibrate(&sys, Method::Oracle, 0.5, 0, 0, None).is_err());
    }

    #[test]
    fn oracle_vanishes_on_exact_data() {
        let phi = DMatrix::identity(2, 2);
        let x = DVector::from_column_slice(&[0.25, -0.5]);
        let sys = PartitionedSystem::from_blocks(phi, x.clone(), DMatrix::zeros(0, 2), DMatrix::zeros(0, 2), 0.5, 4.0)
            .unwrap();
        let cal = oracle_parameters(&sys, &x);
        assert_eq!((cal.epsilon, cal.lambda), (0.0, 0.0));
    }

    #[test]
    fn hoeffding_is_conservative() {
        let (sys, _) = system(12);
        for pi in [0.01, 0.05, 0.2] {
            let emp = lambda_empirical(pi, sys.delta, &sys.phi_tilde, 4000, 5).unwrap();
            let hoe = lambda_hoeffding(pi, sys.cols(), f_max(&sys.phi_tilde)).unwrap();
            assert!(hoe >= emp, "{pi}: {hoe} < {emp}");
        }
    }

    #[test]
    fn calibrate_reports_method() {
        let (sys, _) = system(1);
        let cal = calibrate(&sys, Method::Hoeffding, 0.05, 2000, 3, None).unwrap();
        assert_eq!(cal.method, Method::Hoeffding);
        assert!((cal.confidence - 0.95).abs() < 1e-15);
        assert_eq!(cal.samples, 2000);
        let text = serde_json::to_string(&cal).unwrap();
        assert!(text.contains("\"hoeffding\""));
        assert_eq!(serde_json::from_str::<CalibrationResult>(&text).unwrap(), cal);
    }
}
