//! A small bit-depth sweep with a model ranking per value.

use dequant::harness::{compare_models, run_sweep, SweepConfig};

fn main() -> dequant::Result<()> {
    let cfg = SweepConfig::from_json(
        r#"{
            "swept": {"name": "B", "values": [2, 3, 4, 5]},
            "fixed": {"N": 100, "M": 80, "S": 4, "G": 0.4, "R": 10},
            "models": ["LassoInf", "Linf", "L2", "Dantzig"],
            "trials": 4,
            "master_seed": 2024
        }"#,
    )?;
    let result = run_sweep(&cfg)?;
    print!("{}", result.aggregates_to_csv());
    for ranking in compare_models(&result) {
        let order: Vec<String> = ranking
            .standings
            .iter()
            .map(|s| format!("{} ({:+.2} ± {:.2})", s.model.name(), s.gap_to_best, s.paired_std_error))
            .collect();
        println!("B = {}: {}", ranking.swept_value, order.join(", "));
    }
    Ok(())
}
