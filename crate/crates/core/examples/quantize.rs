//! Quantize a few values, then split a random instance into its unsaturated
//! and saturated blocks.

use dequant::instance::generate_instance;
use dequant::partition::{partition, saturation_ratio};
use dequant::quantizer::{quantize, representable_levels, QuantizerConfig};

fn main() -> dequant::Result<()> {
    let cfg = QuantizerConfig::new(3, 1.0)?;
    println!("B = {}, G = {}, Δ = {}", cfg.bits(), cfg.saturation_level(), cfg.interval());
    println!("levels: {:?}", representable_levels(&cfg));
    for t in [0.0, 0.25, -0.6, 0.9, 3.0, -7.5] {
        let r = quantize(&cfg, t)?;
        println!("{t:>6} -> {:>6} ({:?})", r.level, r.saturation);
    }

    let inst = generate_instance(100, 60, 5, 5.0, QuantizerConfig::new(4, 0.4)?, 1)?;
    let system = partition(&inst);
    println!(
        "M = {}: {} unsaturated, {} saturated (ratio {:.3})",
        inst.rows(),
        system.m_tilde(),
        system.m_bar(),
        saturation_ratio(&system)
    );
    // x* satisfies every constraint it induces
    println!("ℓ∞ violation of x*: {:e}", system.linf_violation(&inst.x_star));
    println!("saturation violation of x*: {:e}", system.saturation_violation(&inst.x_star));
    Ok(())
}
