use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::partition::PartitionedSystem;

/// Margins (right side minus left side) of the partition inequalities for an
/// error vector `h = x̂ − x*`. Each margin should be nonnegative.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionReport {
    /// `Σ_{j≥2} ‖h_{Tⱼ}‖ − ‖h_{T₀₁ᶜ}‖`.
    pub lemma3_inner: f64,
    /// `‖h_{T₀ᶜ}‖₁/√l − Σ_{j≥2} ‖h_{Tⱼ}‖`.
    pub lemma3_outer: f64,
    /// `3‖h_{T₀}‖₁ + 4‖x*_{T₀ᶜ}‖₁ − ‖h_{T₀ᶜ}‖₁`.
    pub lemma4_l1: f64,
    /// `√(1+9s/l)‖h_{T₀₁}‖ + 4‖x*_{T₀ᶜ}‖₁/√l − ‖h‖`.
    pub lemma4_l2: f64,
}

impl PartitionReport {
    pub fn lemma3(&self) -> f64 {
        self.lemma3_inner.min(self.lemma3_outer)
    }

    pub fn lemma4(&self) -> f64 {
        self.lemma4_l1.min(self.lemma4_l2)
    }

    pub fn min_margin(&self) -> f64 {
        self.lemma3().min(self.lemma4())
    }
}

/// Splits `T₀ᶜ` into blocks `T₁, T₂, …` of `l` indices each, ordered by
/// decreasing `|h|` (ties broken by index). The last block may be shorter.
pub fn partition_blocks(h: &DVector<f64>, t0: &[usize], l: usize) -> Vec<Vec<usize>> {
    assert!(l > 0, "block size must be positive");
    let mut in_t0 = vec![false; h.len()];
    t0.iter().for_each(|&j| in_t0[j] = true);
    let mut rest: Vec<usize> = (0..h.len()).filter(|&j| !in_t0[j]).collect();
    rest.sort_by(|&a, &b| h[b].abs().total_cmp(&h[a].abs()).then(a.cmp(&b)));
    rest.chunks(l).map(<[usize]>::to_vec).collect()
}

fn norm_on(v: &DVector<f64>, idx: &[usize]) -> f64 {
    idx.iter().map(|&j| v[j] * v[j]).sum::<f64>().sqrt()
}

fn l1_on(v: &DVector<f64>, idx: &[usize]) -> f64 {
    idx.iter().map(|&j| v[j].abs()).sum()
}

/// Evaluates both sides of the block inequality on `h` and of the cone
/// inequalities that hold for the LASSO error when `x*` is admitted.
pub fn check_partition_inequalities(
    h: &DVector<f64>,
    x_star: &DVector<f64>,
    t0: &[usize],
    l: usize,
) -> PartitionReport {
    let blocks = partition_blocks(h, t0, l);
    let complement: Vec<usize> = blocks.iter().flatten().copied().collect();
    let beyond: Vec<usize> = blocks.iter().skip(1).flatten().copied().collect();
    let mut t01 = t0.to_vec();
    if let Some(first) = blocks.first() {
        t01.extend_from_slice(first);
    }
    let lf = l as f64;
    let s = t0.len() as f64;

    let block_sum: f64 = blocks.iter().skip(1).map(|b| norm_on(h, b)).sum();
    let h_tail_l1 = l1_on(h, &complement);
    let x_tail_l1 = l1_on(x_star, &complement);

    PartitionReport {
        lemma3_inner: block_sum - norm_on(h, &beyond),
        lemma3_outer: h_tail_l1 / lf.sqrt() - block_sum,
        lemma4_l1: 3.0 * l1_on(h, t0) + 4.0 * x_tail_l1 - h_tail_l1,
        lemma4_l2: (1.0 + 9.0 * s / lf).sqrt() * norm_on(h, &t01) + 4.0 * x_tail_l1 / lf.sqrt() - h.norm(),
    }
}

/// `Δ − ‖Φ̃(x̂ − x*)‖∞`, nonnegative whenever both points satisfy the ℓ∞
/// constraint.
pub fn check_lemma1(system: &PartitionedSystem, x_hat: &DVector<f64>, x_star: &DVector<f64>) -> f64 {
    system.delta - (&system.phi_tilde * (x_hat - x_star)).amax()
}
