//! Synthetic problem instances and their JSON replay format.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{quantize, QuantizerConfig, RecordedMeasurement};
use crate::rng;

/// A sensing problem: matrix, sparse ground truth, and quantized observations.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemInstance {
    /// Sensing matrix, `M × N`.
    pub phi: DMatrix<f64>,
    pub x_star: DVector<f64>,
    /// Sorted, distinct, zero-based indices of the nonzeros of `x_star`.
    pub support: Vec<usize>,
    /// `Φ x*` before quantization.
    pub true_obs: DVector<f64>,
    pub recorded: Vec<RecordedMeasurement>,
    pub config: QuantizerConfig,
    /// Inverse standard deviation of the entries of `Φ`.
    pub scale: f64,
    pub seed: u64,
}

/// Draws an instance: `Φ_ij ~ N(0, 1/R²)`, a uniformly random support of
/// size `S` with standard normal values, and quantized observations.
///
/// The draw order is fixed (matrix row-major, then support, then values), so
/// the instance is a pure function of its arguments.
pub fn generate_instance(
    n: usize,
    m: usize,
    sparsity: usize,
    scale: f64,
    config: QuantizerConfig,
    seed: u64,
) -> Result<ProblemInstance> {
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig(format!("dimensions must be positive, got N={n}, M={m}")));
    }
    if sparsity == 0 || sparsity > n {
        return Err(Error::InvalidConfig(format!("sparsity must be in 1..=N={n}, got {sparsity}")));
    }
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::InvalidConfig(format!("scale R must be positive, got {scale}")));
    }

    let mut rng = rng::stream(seed);
    let mut phi = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            let g: f64 = rng.sample(StandardNormal);
            phi[(i, j)] = g / scale;
        }
    }
    let mut support = index::sample(&mut rng, n, sparsity).into_vec();
    support.sort_unstable();
    let mut x_star = DVector::zeros(n);
    for &j in &support {
        x_star[j] = rng.sample(StandardNormal);
    }
    from_parts(phi, x_star, config, scale, seed)
}

/// Builds an instance from an explicit matrix and signal.
pub fn from_parts(
    phi: DMatrix<f64>,
    x_star: DVector<f64>,
    config: QuantizerConfig,
    scale: f64,
    seed: u64,
) -> Result<ProblemInstance> {
    if phi.ncols() != x_star.len() {
        return Err(Error::DimensionMismatch(format!(
            "Φ has {} columns but x* has length {}",
            phi.ncols(),
            x_star.len()
        )));
    }
    let support = x_star.iter().enumerate().filter(|(_, v)| **v != 0.0).map(|(j, _)| j).collect();
    let true_obs = &phi * &x_star;
    let recorded = true_obs.iter().map(|&t| quantize(&config, t)).collect::<Result<Vec<_>>>()?;
    Ok(ProblemInstance { phi, x_star, support, true_obs, recorded, config, scale, seed })
}

impl ProblemInstance {
    pub fn rows(&self) -> usize {
        self.phi.nrows()
    }

    pub fn cols(&self) -> usize {
        self.phi.ncols()
    }

    pub fn sparsity(&self) -> usize {
        self.support.len()
    }

    /// Same matrix and signal recorded by a different quantizer.
    pub fn requantize(&self, config: QuantizerConfig) -> Result<ProblemInstance> {
        let recorded = self.true_obs.iter().map(|&t| quantize(&config, t)).collect::<Result<Vec<_>>>()?;
        Ok(ProblemInstance { recorded, config, ..self.clone() })
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&InstanceDoc::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str::<InstanceDoc>(text)?.try_into()
    }
}

/// On-disk form: dimensions, provenance, and dense row-major data.
#[derive(Debug, Serialize, Deserialize)]
struct InstanceDoc {
    rows: usize,
    cols: usize,
    sparsity: usize,
    scale: f64,
    seed: u64,
    quantizer: QuantizerConfig,
    phi: Vec<Vec<f64>>,
    x_star: Vec<f64>,
    recorded: Vec<RecordedMeasurement>,
}

impl From<&ProblemInstance> for InstanceDoc {
    fn from(inst: &ProblemInstance) -> Self {
        InstanceDoc {
            rows: inst.rows(),
            cols: inst.cols(),
            sparsity: inst.sparsity(),
            scale: inst.scale,
            seed: inst.seed,
            quantizer: inst.config,
            phi: inst.phi.row_iter().map(|r| r.iter().copied().collect()).collect(),
            x_star: inst.x_star.iter().copied().collect(),
            recorded: inst.recorded.clone(),
        }
    }
}

impl TryFrom<InstanceDoc> for ProblemInstance {
    type Error = Error;

    fn try_from(doc: InstanceDoc) -> Result<Self> {
        if doc.phi.len() != doc.rows || doc.phi.iter().any(|r| r.len() != doc.cols) {
            return Err(Error::DimensionMismatch(format!("Φ is not {} × {}", doc.rows, doc.cols)));
        }
        if doc.x_star.len() != doc.cols || doc.recorded.len() != doc.rows {
            return Err(Error::DimensionMismatch("x* or recorded has the wrong length".into()));
        }
        let phi = DMatrix::from_fn(doc.rows, doc.cols, |i, j| doc.phi[i][j]);
        let inst = from_parts(phi, DVector::from_vec(doc.x_star), doc.quantizer, doc.scale, doc.seed)?;
        if inst.sparsity() != doc.sparsity {
            return Err(Error::InvalidConfig(format!(
                "declared sparsity {} but x* has {} nonzeros",
                doc.sparsity,
                inst.sparsity()
            )));
        }
        // Recorded values are replayed as stored.
        Ok(ProblemInstance { recorded: doc.recorded, ..inst })
    }
}
