use nalgebra::{DMatrix, DVector};
use rand::Rng;

use crate::rng;

/// Power-iteration estimate of `λ_max(AᵀA)` (the squared spectral norm).
///
/// Starts from a fixed pseudo-random vector so results are reproducible.
/// The estimate approaches the true value from below.
pub fn gram_top_eigenvalue(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.ncols();
    if n == 0 || a.nrows() == 0 {
        return 0.0;
    }
    let mut g = rng::stream(0x5eed);
    let mut v = DVector::from_fn(n, |_, _| g.gen_range(0.5..1.5));
    v /= v.norm();
    let mut estimate = 0.0;
    let mut av = DVector::zeros(a.nrows());
    let mut w = DVector::zeros(n);
    for _ in 0..iterations.max(1) {
        av.gemv(1.0, a, &v, 0.0);
        w.gemv_tr(1.0, a, &av, 0.0);
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = v.dot(&w);
        v.copy_from(&w);
        v /= norm;
    }
    estimate.max(0.0)
}
