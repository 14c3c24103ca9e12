//! Solve one instance with every model and compare the reconstructions.

use dequant::analysis::snr;
use dequant::calibration::{calibrate, Method};
use dequant::harness::solve_model;
use dequant::instance::generate_instance;
use dequant::lasso_inf::AdmmOptions;
use dequant::partition::partition;
use dequant::quantizer::QuantizerConfig;
use dequant::constrained::Preset;

fn main() -> dequant::Result<()> {
    let inst = generate_instance(200, 150, 8, 10.0, QuantizerConfig::new(4, 0.4)?, 11)?;
    let system = partition(&inst);
    let cal = calibrate(&system, Method::Oracle, 0.05, 0, 0, Some(&inst.x_star))?;
    println!("oracle ε = {:.4}, λ = {:.4}", cal.epsilon, cal.lambda);
    println!("{:<14} {:>9} {:>8} {:>6} {:>10}", "model", "SNR (dB)", "‖x̂‖₁", "iters", "violation");
    for model in Preset::ALL {
        let r = solve_model(&system, model, &cal, &AdmmOptions::default())?;
        println!(
            "{:<14} {:>9.2} {:>8.4} {:>6} {:>10.1e}",
            model.name(),
            snr(&r.x_hat, &inst.x_star)?,
            r.x_hat.lp_norm(1),
            r.iterations,
            r.feasibility.max_violation()
        );
    }
    Ok(())
}
