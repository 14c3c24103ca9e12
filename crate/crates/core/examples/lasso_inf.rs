//! Recover a sparse vector with the LASSO∞ model, printing the ADMM trace
//! every 50 iterations.

use dequant::analysis::snr;
use dequant::calibration::{calibrate, Method};
use dequant::instance::generate_instance;
use dequant::lasso_inf::{solve_lasso_inf_with, AdmmOptions};
use dequant::partition::partition;
use dequant::quantizer::QuantizerConfig;
use dequant::report::TraceRow;

fn main() -> dequant::Result<()> {
    let inst = generate_instance(200, 120, 6, 10.0, QuantizerConfig::new(3, 0.4)?, 7)?;
    let system = partition(&inst);
    let cal = calibrate(&system, Method::Oracle, 0.05, 0, 0, Some(&inst.x_star))?;

    let mut trace = |row: &TraceRow| {
        if row.iteration % 50 == 1 {
            println!(
                "{:>5}  θ={:<8.3} r={:.2e} s={:.2e} f={:.6}",
                row.iteration, row.theta, row.primal_residual, row.dual_residual, row.objective
            );
        }
    };
    let report = solve_lasso_inf_with(&system, cal.lambda, &AdmmOptions::default(), None, Some(&mut trace))?;

    println!("λ = {:.4}, converged = {}, iterations = {}", cal.lambda, report.converged, report.iterations);
    println!("max violation {:e}", report.feasibility.max_violation());
    println!("SNR {:.2} dB", snr(&report.x_hat, &inst.x_star)?);
    Ok(())
}
