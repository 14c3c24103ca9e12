//! Compare the three ways of choosing ε and λ.

use dequant::calibration::{calibrate, Method};
use dequant::instance::generate_instance;
use dequant::partition::partition;
use dequant::quantizer::QuantizerConfig;

fn main() -> dequant::Result<()> {
    let inst = generate_instance(200, 180, 5, 10.0, QuantizerConfig::new(4, 0.5)?, 3)?;
    let system = partition(&inst);
    println!("M̃ = {}, Δ = {}", system.m_tilde(), system.delta);
    for method in [Method::Oracle, Method::Empirical, Method::Hoeffding] {
        let c = calibrate(&system, method, 0.05, 20_000, 9, Some(&inst.x_star))?;
        println!("{method:<10} ε = {:>8.4}  λ = {:>8.4}  (P = {}, {} samples)", c.epsilon, c.lambda, c.confidence, c.samples);
    }
    // the ℓ2 radius concentrates around √(M̃/12)
    println!("√(M̃/12) = {:.4}", (system.m_tilde() as f64 / 12.0).sqrt());
    Ok(())
}
