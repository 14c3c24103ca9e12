//! Restricted extreme eigenvalues: exact enumeration against random subsets.

use dequant::analysis::{binomial, rho_extremes, MatrixTag, RhoMode};
use nalgebra::DMatrix;
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> dequant::Result<()> {
    let mut g = dequant::rng::stream(5);
    let (m, n) = (20, 16);
    let phi = DMatrix::from_fn(m, n, |_, _| g.sample::<f64, _>(StandardNormal) / (m as f64).sqrt());
    for k in 1..=4 {
        let exact = rho_extremes(k, &phi, MatrixTag::Phi, RhoMode::exhaustive())?;
        let sampled = rho_extremes(k, &phi, MatrixTag::Phi, RhoMode::Sampled { subsets: 200, seed: 1 })?;
        println!(
            "k={k} C(N,k)={:<5} exact [{:.4}, {:.4}]  sampled [{:.4}, {:.4}]",
            binomial(n, k),
            exact.rho_minus,
            exact.rho_plus,
            sampled.rho_minus,
            sampled.rho_plus
        );
    }
    match rho_extremes(10, &DMatrix::<f64>::identity(40, 40), MatrixTag::Other, RhoMode::exhaustive()) {
        Err(e) => println!("too large: {e}"),
        Ok(_) => unreachable!(),
    }
    Ok(())
}
