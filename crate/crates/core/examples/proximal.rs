//! The proximal building blocks shared by the solvers.

use dequant::prox::{project_l2_ball, project_linf_ball, project_nonneg, soft_threshold};
use nalgebra::DVector;

fn main() -> dequant::Result<()> {
    let x = DVector::from_column_slice(&[3.0, -0.5, 1.2, -2.0]);
    println!("x              {:?}", x.as_slice());
    println!("soft(x, 1)     {:?}", soft_threshold(&x, 1.0)?.as_slice());
    println!("Π∞(x, 1)       {:?}", project_linf_ball(&x, 1.0)?.as_slice());
    println!("Π₂(x, 1)       {:?}", project_l2_ball(&x, 1.0)?.as_slice());
    println!("Π₊(x)          {:?}", project_nonneg(&x).as_slice());
    Ok(())
}
