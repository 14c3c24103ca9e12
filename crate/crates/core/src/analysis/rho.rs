use itertools::Itertools;
use nalgebra::DMatrix;
use rand::seq::index;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng;

/// Default cap on the number of subsets visited in exhaustive mode.
pub const DEFAULT_BUDGET: u64 = 200_000;

/// Which block of the sensing matrix a report describes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatrixTag {
    Phi,
    PhiTilde,
    PhiBar,
    Other,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum RhoMode {
    /// Every subset; exact. Fails when more than `budget` subsets are needed.
    Exhaustive { budget: u64 },
    /// `subsets` random subsets of size exactly `k`. The sampled `ρ⁻` is an
    /// upper bound on the true value and the sampled `ρ⁺` a lower bound.
    Sampled { subsets: usize, seed: u64 },
}

impl RhoMode {
    pub fn exhaustive() -> Self {
        RhoMode::Exhaustive { budget: DEFAULT_BUDGET }
    }
}

/// Extreme squared singular values over column subsets of size at most `k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoReport {
    pub k: usize,
    pub rho_minus: f64,
    pub rho_plus: f64,
    pub mode: RhoMode,
    pub matrix_tag: MatrixTag,
}

impl RhoReport {
    /// True when both values are exact rather than one-sided estimates.
    pub fn is_exact(&self) -> bool {
        matches!(self.mode, RhoMode::Exhaustive { .. })
    }
}

/// `C(n, k)`, saturating at `u64::MAX`.
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

fn extremes(gram: &DMatrix<f64>, subset: &[usize]) -> (f64, f64) {
    let k = subset.len();
    if k == 1 {
        let v = gram[(subset[0], subset[0])];
        return (v, v);
    }
    let sub = DMatrix::from_fn(k, k, |a, b| gram[(subset[a], subset[b])]);
    let eig = sub.symmetric_eigenvalues();
    (eig.min().max(0.0), eig.max())
}

fn fold_extremes<'a, I>(gram: &DMatrix<f64>, subsets: I) -> (f64, f64)
where
    I: IntoParallelIterator<Item = &'a Vec<usize>>,
{
    subsets
        .into_par_iter()
        .map(|s| extremes(gram, s))
        .reduce(|| (f64::INFINITY, f64::NEG_INFINITY), |a, b| (a.0.min(b.0), a.1.max(b.1)))
}

/// Computes `ρ⁻(k, Ψ)` and `ρ⁺(k, Ψ)`.
///
/// Exhaustive mode takes the minimum over every subset of size `1..=k` and
/// the maximum over every subset of size `k`; the budget counts all of them.
pub fn rho_extremes(k: usize, psi: &DMatrix<f64>, tag: MatrixTag, mode: RhoMode) -> Result<RhoReport> {
    let n = psi.ncols();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!("subset size must be in 1..={n}, got {k}")));
    }
    let gram = psi.tr_mul(psi);
    let (rho_minus, rho_plus) = match mode {
        RhoMode::Exhaustive { budget } => {
            let needed = (1..=k).fold(0u64, |acc, j| acc.saturating_add(binomial(n, j)));
            if needed > budget {
                return Err(Error::BudgetExceeded { needed: needed.into(), budget: budget.into() });
            }
            let mut lo = f64::INFINITY;
            let mut hi = 0.0;
            for size in 1..=k {
                let subsets: Vec<Vec<usize>> = (0..n).combinations(size).collect();
                let (a, b) = fold_extremes(&gram, &subsets);
                lo = lo.min(a);
                if size == k {
                    hi = b;
                }
            }
            (lo, hi)
        }
        RhoMode::Sampled { subsets, seed } => {
            if subsets == 0 {
                return Err(Error::InvalidArgument("sampled mode needs at least one subset".into()));
            }
            let mut g = rng::stream(seed);
            let drawn: Vec<Vec<usize>> = (0..subsets)
                .map(|_| {
                    let mut s = index::sample(&mut g, n, k).into_vec();
                    s.sort_unstable();
                    s
                })
                .collect();
            fold_extremes(&gram, &drawn)
        }
    };
    Ok(RhoReport { k, rho_minus, rho_plus, mode, matrix_tag: tag })
}
