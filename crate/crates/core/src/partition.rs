//! Splitting recorded measurements into unsaturated and saturated blocks.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::instance::ProblemInstance;
use crate::quantizer::Saturation;

/// The linear system seen by every solver.
///
/// Unsaturated rows give `Φ̃ x ≈ ỹ`. Saturated rows are stacked as
/// `Φ̄ = [-Φ̄₋; Φ̄₊]` so that both saturation constraints read `Φ̄ x ≥ ȳ`
/// with `ȳ = (G - Δ)·1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedSystem {
    pub phi_tilde: DMatrix<f64>,
    pub y_tilde: DVector<f64>,
    pub phi_bar_plus: DMatrix<f64>,
    pub phi_bar_minus: DMatrix<f64>,
    pub phi_bar: DMatrix<f64>,
    pub y_bar: DVector<f64>,
    /// Original row of each row of `Φ̃`.
    pub tilde_rows: Vec<usize>,
    /// Original row of each row of `Φ̄` (negative block first).
    pub bar_rows: Vec<usize>,
    pub delta: f64,
    pub saturation_level: f64,
}

fn select_rows(phi: &DMatrix<f64>, rows: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(rows.len(), phi.ncols(), |i, j| phi[(rows[i], j)])
}

/// Partitions an instance by the saturation flag of each recorded value.
pub fn partition(instance: &ProblemInstance) -> PartitionedSystem {
    let mut tilde = Vec::new();
    let mut plus = Vec::new();
    let mut minus = Vec::new();
    for (i, rec) in instance.recorded.iter().enumerate() {
        match rec.saturation {
            Saturation::None => tilde.push(i),
            Saturation::Positive => plus.push(i),
            Saturation::Negative => minus.push(i),
        }
    }
    let y_tilde = DVector::from_iterator(tilde.len(), tilde.iter().map(|&i| instance.recorded[i].level));
    let phi_tilde = select_rows(&instance.phi, &tilde);
    let phi_bar_plus = select_rows(&instance.phi, &plus);
    let phi_bar_minus = select_rows(&instance.phi, &minus);
    let bar_rows = minus.iter().chain(&plus).copied().collect();
    PartitionedSystem::assemble(
        phi_tilde,
        y_tilde,
        phi_bar_plus,
        phi_bar_minus,
        tilde,
        bar_rows,
        instance.config.interval(),
        instance.config.saturation_level(),
    )
}

impl PartitionedSystem {
    #[allow(clippy::too_many_arguments)]
    fn assemble(
        phi_tilde: DMatrix<f64>,
        y_tilde: DVector<f64>,
        phi_bar_plus: DMatrix<f64>,
        phi_bar_minus: DMatrix<f64>,
        tilde_rows: Vec<usize>,
        bar_rows: Vec<usize>,
        delta: f64,
        saturation_level: f64,
    ) -> Self {
        let n = phi_tilde.ncols();
        let (n_minus, n_plus) = (phi_bar_minus.nrows(), phi_bar_plus.nrows());
        let mut phi_bar = DMatrix::zeros(n_minus + n_plus, n);
        phi_bar.rows_mut(0, n_minus).copy_from(&(-&phi_bar_minus));
        phi_bar.rows_mut(n_minus, n_plus).copy_from(&phi_bar_plus);
        let y_bar = DVector::from_element(n_minus + n_plus, saturation_level - delta);
        PartitionedSystem {
            phi_tilde,
            y_tilde,
            phi_bar_plus,
            phi_bar_minus,
            phi_bar,
            y_bar,
            tilde_rows,
            bar_rows,
            delta,
            saturation_level,
        }
    }

    /// Builds a system directly from its blocks. Rows are numbered unsaturated
    /// first, then negative, then positive saturation.
    pub fn from_blocks(
        phi_tilde: DMatrix<f64>,
        y_tilde: DVector<f64>,
        phi_bar_plus: DMatrix<f64>,
        phi_bar_minus: DMatrix<f64>,
        delta: f64,
        saturation_level: f64,
    ) -> Result<Self> {
        let n = phi_tilde.ncols();
        if phi_bar_plus.ncols() != n || phi_bar_minus.ncols() != n {
            return Err(Error::DimensionMismatch("all blocks need the same column count".into()));
        }
        if y_tilde.len() != phi_tilde.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "ỹ has length {} but Φ̃ has {} rows",
                y_tilde.len(),
                phi_tilde.nrows()
            )));
        }
        if !(delta > 0.0 && saturation_level > 0.0) {
            return Err(Error::InvalidArgument("Δ and G must be positive".into()));
        }
        let m_tilde = phi_tilde.nrows();
        let m_bar = phi_bar_plus.nrows() + phi_bar_minus.nrows();
        let tilde_rows = (0..m_tilde).collect();
        let bar_rows = (m_tilde..m_tilde + m_bar).collect();
        Ok(Self::assemble(
            phi_tilde,
            y_tilde,
            phi_bar_plus,
            phi_bar_minus,
            tilde_rows,
            bar_rows,
            delta,
            saturation_level,
        ))
    }

    /// Unsaturated row count `M̃`.
    pub fn m_tilde(&self) -> usize {
        self.phi_tilde.nrows()
    }

    /// Saturated row count `M̄`.
    pub fn m_bar(&self) -> usize {
        self.phi_bar.nrows()
    }

    pub fn rows(&self) -> usize {
        self.m_tilde() + self.m_bar()
    }

    pub fn cols(&self) -> usize {
        self.phi_tilde.ncols()
    }

    /// `Φ̃ x - ỹ`.
    pub fn tilde_residual(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.phi_tilde * x - &self.y_tilde
    }

    /// `Φ̄ x - ȳ`; nonnegative iff `x` meets the saturation constraints.
    pub fn bar_slack(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.phi_bar * x - &self.y_bar
    }

    /// Largest amount by which `x` breaks `‖Φ̃x − ỹ‖∞ ≤ Δ/2`.
    pub fn linf_violation(&self, x: &DVector<f64>) -> f64 {
        (self.tilde_residual(x).amax() - self.delta / 2.0).max(0.0)
    }

    /// Largest amount by which `x` breaks `Φ̄x ≥ ȳ`.
    pub fn saturation_violation(&self, x: &DVector<f64>) -> f64 {
        self.bar_slack(x).iter().fold(0.0, |acc: f64, s| acc.max(-s))
    }
}

/// Fraction `M̄ / M` of saturated measurements.
pub fn saturation_ratio(system: &PartitionedSystem) -> f64 {
    if system.rows() == 0 {
        return 0.0;
    }
    system.m_bar() as f64 / system.rows() as f64
}
