//! Sweep the fraction of saturated measurements; `G` is tuned per trial.

use dequant::harness::{run_sweep, SweepConfig};

fn main() -> dequant::Result<()> {
    let cfg = SweepConfig::from_json(
        r#"{
            "swept": {"name": "saturation_ratio", "values": [0.02, 0.1, 0.3]},
            "fixed": {"N": 100, "M": 80, "S": 4, "B": 4, "R": 10},
            "models": ["LassoInf", "L2DantzigInf"],
            "trials": 3
        }"#,
    )?;
    let result = run_sweep(&cfg)?;
    for row in &result.rows {
        println!(
            "target {:<5} realized {:.3}  {:<13} trial {}  {:.2} dB",
            row.swept_value,
            row.saturation_ratio,
            row.model.name(),
            row.trial,
            row.snr_db
        );
    }
    Ok(())
}
