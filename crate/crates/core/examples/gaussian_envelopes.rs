//! Restricted singular values of Gaussian matrices stay within
//! `[15/16, 17/16]·√M` once `M` is large against `k log N`.

use dequant::analysis::check_gaussian_envelopes;

fn main() -> dequant::Result<()> {
    for m in [50, 100, 400, 1600] {
        let r = check_gaussian_envelopes(m, 100, 2, 20, 4)?;
        let hi = r.upper_ratios.iter().cloned().fold(f64::MIN, f64::max);
        let lo = r.lower_ratios.iter().cloned().fold(f64::MAX, f64::min);
        println!("M={m:<5} load={:.3}  √ρ⁻/√M ≥ {lo:.3}  √ρ⁺/√M ≤ {hi:.3}  pass {:.0}%", r.load, 100.0 * r.pass_fraction);
    }
    Ok(())
}
