//! Solver output shared by every formulation, plus the optional CSV trace.

use std::io::Write;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

/// Constraint violations of a returned point, recomputed from the point itself.
///
/// A field is `None` when the corresponding constraint is not part of the
/// model that was solved.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Feasibility {
    /// `max(0, ‖Φ̃x − ỹ‖∞ − Δ/2)`.
    pub linf: Option<f64>,
    /// `max(0, max(ȳ − Φ̄x))`.
    pub saturation: Option<f64>,
    /// `max(0, ‖Φ̃x − ỹ‖ − εΔ)`.
    pub l2: Option<f64>,
    /// `max(0, ‖Φ̃ᵀ(Φ̃x − ỹ)‖∞ − λΔ/2)`.
    pub dantzig: Option<f64>,
}

impl Feasibility {
    pub fn max_violation(&self) -> f64 {
        [self.linf, self.saturation, self.l2, self.dantzig].iter().flatten().fold(0.0, |a, &b| a.max(b))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    #[serde(with = "dvector_as_vec")]
    pub x_hat: DVector<f64>,
    pub iterations: usize,
    pub primal_residual: f64,
    pub dual_residual: f64,
    /// Objective of the solved model at `x_hat`: `½‖Φ̃x−ỹ‖² + λΔ‖x‖₁` for the
    /// least-squares models, `‖x‖₁` for the pure ℓ1 models.
    pub objective: f64,
    pub feasibility: Feasibility,
    pub converged: bool,
    /// The primal residual stopped improving before the tolerance was met,
    /// which usually means the constraint set is empty.
    pub stalled: bool,
    /// Penalty parameter at exit.
    pub theta: f64,
}

pub(crate) mod dvector_as_vec {
    use nalgebra::DVector;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &DVector<f64>, s: S) -> Result<S::Ok, S::Error> {
        v.as_slice().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DVector<f64>, D::Error> {
        Ok(DVector::from_vec(Vec::<f64>::deserialize(d)?))
    }
}

/// One row of the per-iteration trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TraceRow {
    pub iteration: usize,
    pub theta: f64,
    pub primal_residual: f64,
    pub dual_residual: f64,
    pub objective: f64,
}

/// Receives one row per outer iteration.
pub trait TraceSink {
    fn record(&mut self, row: &TraceRow);
}

impl<F: FnMut(&TraceRow)> TraceSink for F {
    fn record(&mut self, row: &TraceRow) {
        self(row)
    }
}

/// Writes trace rows as CSV with header `iteration,theta,primal_residual,dual_residual,objective`.
pub struct CsvTrace<W: Write> {
    writer: csv::Writer<W>,
    failed: Option<csv::Error>,
}

impl<W: Write> CsvTrace<W> {
    pub fn new(inner: W) -> Self {
        CsvTrace { writer: csv::Writer::from_writer(inner), failed: None }
    }

    /// Flushes and surfaces the first write error, if any.
    pub fn finish(mut self) -> crate::Result<W> {
        if let Some(e) = self.failed.take() {
            return Err(e.into());
        }
        self.writer.flush()?;
        self.writer.into_inner().map_err(|e| crate::Error::Io(e.into_error()))
    }
}

impl<W: Write> TraceSink for CsvTrace<W> {
    fn record(&mut self, row: &TraceRow) {
        if self.failed.is_none() {
            if let Err(e) = self.writer.serialize(row) {
                self.failed = Some(e);
            }
        }
    }
}
