//! Evaluate the recovery guarantees on a small, well-conditioned instance
//! and compare them with the measured LASSO∞ error.

use dequant::analysis::{bound_report, check_lemma1, check_partition_inequalities, RhoMode};
use dequant::calibration::{calibrate, Method};
use dequant::instance::generate_instance;
use dequant::lasso_inf::{solve_lasso_inf, AdmmOptions};
use dequant::partition::partition;
use dequant::quantizer::QuantizerConfig;

fn main() -> dequant::Result<()> {
    // tall matrices keep A₀ positive
    let inst = generate_instance(12, 2000, 1, 20.0, QuantizerConfig::new(6, 1.0)?, 2)?;
    let system = partition(&inst);
    let cal = calibrate(&system, Method::Oracle, 0.05, 0, 0, Some(&inst.x_star))?;
    let report = bound_report(&system, &inst.x_star, &inst.support, 1, cal.lambda, RhoMode::exhaustive())?;
    println!("A₀ = {:.4}, A₁ = {:.4}, valid = {}", report.a0, report.a1, report.valid);

    let x_hat = solve_lasso_inf(&system, cal.lambda, &AdmmOptions::default())?.x_hat;
    let h = &x_hat - &inst.x_star;
    println!("‖x̂ − x*‖ = {:.4e}", h.norm());
    if let (Some(a), Some(b)) = (report.bound_lasso, report.bound_linf) {
        println!("LASSO bound {a:.4e}, ℓ∞ bound {b:.4e}");
    }
    println!("‖Φ̃h‖∞ margin: {:.3e}", check_lemma1(&system, &x_hat, &inst.x_star));
    let p = check_partition_inequalities(&h, &inst.x_star, &inst.support, 1);
    println!("block margins: {:.3e} {:.3e}, cone margins: {:.3e} {:.3e}", p.lemma3_inner, p.lemma3_outer, p.lemma4_l1, p.lemma4_l2);
    Ok(())
}
