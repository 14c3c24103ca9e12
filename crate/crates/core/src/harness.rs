//! Parameter sweeps: generate, calibrate, solve every model, record SNR.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::analysis::snr;
use crate::calibration::{calibrate, CalibrationResult, Method, DEFAULT_SAMPLES};
use crate::constrained::{preset, solve_constrained, Preset};
use crate::error::{Error, Result};
use crate::instance::{generate_instance, ProblemInstance};
use crate::lasso_inf::{solve_lasso_inf, AdmmOptions};
use crate::partition::{partition, saturation_ratio, PartitionedSystem};
use crate::quantizer::QuantizerConfig;
use crate::report::SolveReport;
use crate::rng;

/// CSV header of the per-trial file.
pub const CSV_HEADER: &str = "swept_value,model,trial,snr_db,saturation_ratio,iterations,converged,wall_ms";
/// CSV header of the aggregate file.
pub const AGG_HEADER: &str = "swept_value,model,mean_snr,std_snr";
/// Bisection steps allowed when tuning `G` to a saturation ratio.
pub const G_BISECTION_STEPS: usize = 30;
/// Relative tolerance on the realized saturation ratio.
pub const RATIO_TOLERANCE: f64 = 0.1;

/// A sweep parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Variable {
    N,
    M,
    S,
    B,
    G,
    R,
    /// Confidence `1 − π`; 1 selects oracle calibration.
    P,
    #[serde(rename = "saturation_ratio")]
    SaturationRatio,
}

impl Variable {
    pub fn name(self) -> &'static str {
        match self {
            Variable::N => "N",
            Variable::M => "M",
            Variable::S => "S",
            Variable::B => "B",
            Variable::G => "G",
            Variable::R => "R",
            Variable::P => "P",
            Variable::SaturationRatio => "saturation_ratio",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Swept {
    pub name: Variable,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationOptions {
    /// Used whenever `P < 1`.
    pub method: Method,
    pub samples: usize,
}

impl Default for CalibrationOptions {
    fn default() -> Self {
        CalibrationOptions { method: Method::Empirical, samples: DEFAULT_SAMPLES }
    }
}

fn default_trials() -> usize {
    30
}

fn default_models() -> Vec<Preset> {
    Preset::ALL.to_vec()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    pub swept: Swept,
    /// Values for every parameter other than the swept one.
    pub fixed: BTreeMap<Variable, f64>,
    #[serde(default = "default_models")]
    pub models: Vec<Preset>,
    #[serde(default = "default_trials")]
    pub trials: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default)]
    pub solver: AdmmOptions,
    #[serde(default)]
    pub calibration: CalibrationOptions,
    /// Record wall-clock time per solve. Off by default because it makes the
    /// output differ between runs.
    #[serde(default)]
    pub record_timing: bool,
}

/// Fully resolved parameters of one swept value.
#[derive(Debug, Clone, Copy, PartialEq)]
struct Point {
    n: usize,
    m: usize,
    s: usize,
    b: u32,
    g: Option<f64>,
    r: f64,
    p: f64,
    ratio: Option<f64>,
}

fn as_count(var: Variable, v: f64) -> Result<usize> {
    if v >= 1.0 && v.fract() == 0.0 && v <= u32::MAX as f64 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidConfig(format!("{} must be a positive integer, got {v}", var.name())))
    }
}

impl SweepConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: SweepConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.fixed.contains_key(&self.swept.name) {
            return bad(format!("{} is both swept and fixed", self.swept.name.name()));
        }
        if self.swept.values.is_empty() {
            return bad("the swept variable needs at least one value".into());
        }
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.models.is_empty() {
            return bad("at least one model is required".into());
        }
        self.solver.validate()?;
        for i in 0..self.swept.values.len() {
            self.point(i)?;
        }
        Ok(())
    }

    fn value(&self, var: Variable, idx: usize) -> Option<f64> {
        if self.swept.name == var {
            Some(self.swept.values[idx])
        } else {
            self.fixed.get(&var).copied()
        }
    }

    fn point(&self, idx: usize) -> Result<Point> {
        let need = |var: Variable, name: &'static str| self.value(var, idx).ok_or(Error::MissingParameter(name));
        let n = as_count(Variable::N, need(Variable::N, "N")?)?;
        let m = as_count(Variable::M, need(Variable::M, "M")?)?;
        let s = as_count(Variable::S, need(Variable::S, "S")?)?;
        let b = as_count(Variable::B, need(Variable::B, "B")?)? as u32;
        let r = need(Variable::R, "R")?;
        let p = self.value(Variable::P, idx).unwrap_or(1.0);
        let ratio = self.value(Variable::SaturationRatio, idx);
        let g = self.value(Variable::G, idx);
        if s > n {
            return Err(Error::InvalidConfig(format!("S = {s} exceeds N = {n}")));
        }
        if !(r > 0.0 && r.is_finite()) {
            return Err(Error::InvalidConfig(format!("R must be positive, got {r}")));
        }
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidConfig(format!("P must lie in (0, 1], got {p}")));
        }
        match (g, ratio) {
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("give either G or saturation_ratio, not both".into())),
            (None, None) => return Err(Error::MissingParameter("G")),
            (Some(g), None) => {
                QuantizerConfig::new(b, g)?;
            }
            (None, Some(t)) => {
                if !(0.0..1.0).contains(&t) {
                    return Err(Error::InvalidConfig(format!("saturation_ratio must lie in [0, 1), got {t}")));
                }
            }
        }
        Ok(Point { n, m, s, b, g, r, p, ratio })
    }
}

/// One solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub swept_value: f64,
    pub model: Preset,
    pub trial: usize,
    pub snr_db: f64,
    pub saturation_ratio: f64,
    pub iterations: usize,
    pub converged: bool,
    pub wall_ms: f64,
    /// `‖x̂ − x*‖`.
    pub error_norm: f64,
    /// Largest recomputed violation of the model's constraints.
    pub max_violation: f64,
    /// Calibration used for this trial.
    pub epsilon: f64,
    pub lambda: f64,
    pub method: Method,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateRow {
    pub swept_value: f64,
    pub model: Preset,
    pub mean_snr: f64,
    /// Sample standard deviation (`n − 1` denominator, 0 for one trial).
    pub std_snr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub variable: Variable,
    /// Sorted by value index, then model in configuration order, then trial.
    pub rows: Vec<SweepRow>,
    pub aggregates: Vec<AggregateRow>,
}

/// `G` for a target saturation ratio: bisection on the instance's own
/// `Φx*`, since the realized ratio decreases as `G` grows.
pub fn tune_saturation_level(instance: &ProblemInstance, bits: u32, target: f64) -> Result<(f64, f64)> {
    let peak = instance.true_obs.amax();
    if peak == 0.0 {
        return Err(Error::InvalidArgument("Φx* is zero, so no G yields saturation".into()));
    }
    let ratio_at = |g: f64| -> Result<f64> {
        let cfg = QuantizerConfig::new(bits, g)?;
        let inst = instance.requantize(cfg)?;
        Ok(inst.recorded.iter().filter(|r| r.is_saturated()).count() as f64 / inst.recorded.len() as f64)
    };
    let close = |r: f64| (r - target).abs() <= RATIO_TOLERANCE * target || (target == 0.0 && r == 0.0);
    let mut hi = 2.0 * peak;
    let mut lo = peak * 1e-6;
    let mut best = (hi, ratio_at(hi)?);
    if close(best.1) {
        return Ok(best);
    }
    for _ in 0..G_BISECTION_STEPS {
        let mid = 0.5 * (lo + hi);
        let r = ratio_at(mid)?;
        if (r - target).abs() < (best.1 - target).abs() {
            best = (mid, r);
        }
        if close(r) {
            return Ok((mid, r));
        }
        if r > target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(best)
}

/// Trial work unit: everything for one `(value, trial)` pair.
fn run_trial(cfg: &SweepConfig, value_idx: usize, trial: usize) -> Result<Vec<SweepRow>> {
    let pt = cfg.point(value_idx)?;
    let seed = rng::derive_seed(cfg.master_seed, &[value_idx as u64, trial as u64]);
    let swept_value = cfg.swept.values[value_idx];

    let instance = match (pt.g, pt.ratio) {
        (Some(g), _) => generate_instance(pt.n, pt.m, pt.s, pt.r, QuantizerConfig::new(pt.b, g)?, seed)?,
        (None, Some(target)) => {
            let draft = generate_instance(pt.n, pt.m, pt.s, pt.r, QuantizerConfig::new(pt.b, 1.0)?, seed)?;
            let (g, _) = tune_saturation_level(&draft, pt.b, target)?;
            draft.requantize(QuantizerConfig::new(pt.b, g)?)?
        }
        (None, None) => unreachable!("validated"),
    };
    let system = partition(&instance);
    let ratio = saturation_ratio(&system);
    let x_star = &instance.x_star;

    let cal = if system.m_tilde() == 0 {
        None
    } else if pt.p >= 1.0 {
        Some(calibrate(&system, Method::Oracle, 0.5, 0, 0, Some(x_star))?)
    } else {
        let cal_seed = rng::derive_seed(seed, &[u64::from(u32::MAX)]);
        Some(calibrate(&system, cfg.calibration.method, 1.0 - pt.p, cfg.calibration.samples, cal_seed, None)?)
    };

    let mut rows = Vec::with_capacity(cfg.models.len());
    for &model in &cfg.models {
        let start = Instant::now();
        let outcome = cal.as_ref().map(|c| solve_model(&system, model, c, &cfg.solver));
        let elapsed = start.elapsed().as_secs_f64() * 1e3;
        let (x_hat, iterations, converged, violation) = match outcome {
            Some(Ok(rep)) => {
                let v = rep.feasibility.max_violation();
                (rep.x_hat, rep.iterations, rep.converged, v)
            }
            // no unsaturated rows or a solver error: fall back to x̂ = 0
            _ => (DVector::zeros(pt.n), 0, false, f64::NAN),
        };
        rows.push(SweepRow {
            swept_value,
            model,
            trial,
            snr_db: snr(&x_hat, x_star)?,
            saturation_ratio: ratio,
            iterations,
            converged,
            wall_ms: if cfg.record_timing { elapsed } else { 0.0 },
            error_norm: (&x_hat - x_star).norm(),
            max_violation: violation,
            epsilon: cal.map_or(f64::NAN, |c| c.epsilon),
            lambda: cal.map_or(f64::NAN, |c| c.lambda),
            method: cal.map_or(Method::Oracle, |c| c.method),
        });
    }
    Ok(rows)
}

/// Solves one preset with the calibrated parameters. LassoInf uses the
/// dedicated solver.
pub fn solve_model(
    system: &PartitionedSystem,
    model: Preset,
    cal: &CalibrationResult,
    options: &AdmmOptions,
) -> Result<SolveReport> {
    if model == Preset::LassoInf {
        return solve_lasso_inf(system, cal.lambda, options);
    }
    let spec = preset(model, Some(cal.epsilon), Some(cal.lambda))?;
    solve_constrained(system, &spec, options)
}

/// Runs every `(value, trial)` pair, in parallel on the current rayon pool.
/// The output does not depend on the number of threads.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let units: Vec<(usize, usize)> =
        (0..cfg.swept.values.len()).flat_map(|v| (0..cfg.trials).map(move |t| (v, t))).collect();
    let per_unit: Vec<Vec<SweepRow>> = units.par_iter().map(|&(v, t)| run_trial(cfg, v, t)).collect::<Result<_>>()?;

    let models = cfg.models.len();
    let mut rows = Vec::with_capacity(units.len() * models);
    for trials in per_unit.chunks(cfg.trials) {
        for k in 0..models {
            rows.extend(trials.iter().map(|unit| unit[k].clone()));
        }
    }
    let aggregates = aggregate(&rows, cfg.trials);
    Ok(SweepResult { variable: cfg.swept.name, rows, aggregates })
}

/// Mean and sample standard deviation of SNR over consecutive runs of
/// `trials` rows.
pub fn aggregate(rows: &[SweepRow], trials: usize) -> Vec<AggregateRow> {
    rows.chunks(trials.max(1))
        .map(|chunk| {
            let (mean, std) = mean_std(chunk.iter().map(|r| r.snr_db));
            AggregateRow { swept_value: chunk[0].swept_value, model: chunk[0].model, mean_snr: mean, std_snr: std }
        })
        .collect()
}

fn mean_std(values: impl Iterator<Item = f64> + Clone) -> (f64, f64) {
    let n = values.clone().count();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.clone().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.map(|v| (v - mean) * (v - mean)).sum::<f64>() / (n - 1) as f64;
    (mean, var.sqrt())
}

impl SweepResult {
    pub fn to_csv(&self) -> String {
        let mut out = String::from(CSV_HEADER);
        out.push('\n');
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{}",
                r.swept_value,
                r.model.name(),
                r.trial,
                r.snr_db,
                r.saturation_ratio,
                r.iterations,
                r.converged,
                r.wall_ms
            );
        }
        out
    }

    pub fn aggregates_to_csv(&self) -> String {
        let mut out = String::from(AGG_HEADER);
        out.push('\n');
        for a in &self.aggregates {
            let _ = writeln!(out, "{},{},{},{}", a.swept_value, a.model.name(), a.mean_snr, a.std_snr);
        }
        out
    }

    /// Writes the rows to `path` and the aggregates to the `_agg` sibling.
    /// Returns the sibling path.
    pub fn write(&self, path: &Path) -> Result<PathBuf> {
        std::fs::write(path, self.to_csv())?;
        let agg = agg_path(path);
        std::fs::write(&agg, self.aggregates_to_csv())?;
        Ok(agg)
    }

    /// Mean SNR of `model` at swept value index `idx`, if present.
    pub fn mean_snr(&self, value: f64, model: Preset) -> Option<f64> {
        self.aggregates.iter().find(|a| a.swept_value == value && a.model == model).map(|a| a.mean_snr)
    }
}

/// `results.csv` → `results_agg.csv`.
pub fn agg_path(path: &Path) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let name = match path.extension() {
        Some(ext) => format!("{stem}_agg.{}", ext.to_string_lossy()),
        None => format!("{stem}_agg"),
    };
    path.with_file_name(name)
}

/// One model's standing at one swept value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelStanding {
    pub model: Preset,
    /// 1 for the best mean SNR.
    pub rank: usize,
    pub mean_snr: f64,
    /// Standard error of the mean SNR.
    pub std_error: f64,
    /// Mean of the per-trial SNR difference to the top-ranked model.
    pub gap_to_best: f64,
    /// Standard error of that paired difference.
    pub paired_std_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub swept_value: f64,
    pub standings: Vec<ModelStanding>,
}

/// Ranks the models by mean SNR at every swept value, with paired standard
/// errors against the leader (trials share instances, so differences are
/// paired by trial).
pub fn compare_models(result: &SweepResult) -> Vec<Ranking> {
    let mut values: Vec<f64> = Vec::new();
    for r in &result.rows {
        if !values.contains(&r.swept_value) {
            values.push(r.swept_value);
        }
    }
    values
        .into_iter()
        .map(|value| {
            let mut by_model: Vec<(Preset, Vec<(usize, f64)>)> = Vec::new();
            for r in result.rows.iter().filter(|r| r.swept_value == value) {
                match by_model.iter_mut().find(|(m, _)| *m == r.model) {
                    Some((_, v)) => v.push((r.trial, r.snr_db)),
                    None => by_model.push((r.model, vec![(r.trial, r.snr_db)])),
                }
            }
            // (model, mean, standard error, per-trial SNR)
            type Stats = (Preset, f64, f64, Vec<(usize, f64)>);
            let mut stats: Vec<Stats> = by_model
                .into_iter()
                .map(|(m, v)| {
                    let (mean, std) = mean_std(v.iter().map(|p| p.1));
                    (m, mean, std / (v.len() as f64).sqrt(), v)
                })
                .collect();
            stats.sort_by(|a, b| b.1.total_cmp(&a.1));
            let leader = stats[0].3.clone();
            let standings = stats
                .iter()
                .enumerate()
                .map(|(i, (model, mean, se, trials))| {
                    let diffs: Vec<f64> = trials
                        .iter()
                        .filter_map(|(t, v)| leader.iter().find(|(lt, _)| lt == t).map(|(_, lv)| v - lv))
                        .collect();
                    let (gap, sd) = mean_std(diffs.iter().copied());
                    ModelStanding {
                        model: *model,
                        rank: i + 1,
                        mean_snr: *mean,
                        std_error: *se,
                        gap_to_best: gap,
                        paired_std_error: sd / (diffs.len() as f64).sqrt(),
                    }
                })
                .collect();
            Ranking { swept_value: value, standings }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> SweepConfig {
        SweepConfig::from_json(
            r#"{
                "swept": {"name": "B", "values": [2, 4]},
                "fixed": {"N": 24, "M": 16, "S": 2, "G": 1.5, "R": 3},
                "models": ["LassoInf", "Linf", "L2"],
                "trials": 2,
                "master_seed": 5
            }"#,
        )
        .unwrap()
    }

    #[test]
    fn rows_are_accounted_and_ordered() {
        let cfg = small_config();
        let res = run_sweep(&cfg).unwrap();
        assert_eq!(res.rows.len(), 2 * 3 * 2);
        assert_eq!(res.aggregates.len(), 2 * 3);
        assert_eq!(res.rows[0].model, Preset::LassoInf);
        assert_eq!(res.rows[2].model, Preset::Linf);
        assert_eq!(res.rows[6].swept_value, 4.0);
        for a in &res.aggregates {
            let snrs: Vec<f64> =
                res.rows.iter().filter(|r| r.swept_value == a.swept_value && r.model == a.model).map(|r| r.snr_db).collect();
            let mean = snrs.iter().sum::<f64>() / snrs.len() as f64;
            assert!((mean - a.mean_snr).abs() <= 1e-12);
        }
        assert!(res.rows.iter().all(|r| r.wall_ms == 0.0 && r.max_violation <= 1e-6));
    }

    #[test]
    fn csv_is_reproducible() {
        let cfg = small_config();
        let a = run_sweep(&cfg).unwrap();
        let b = run_sweep(&cfg).unwrap();
        assert_eq!(a.to_csv(), b.to_csv());
        assert!(a.to_csv().starts_with(CSV_HEADER));
        assert_eq!(a.to_csv().lines().count(), 1 + a.rows.len());
        assert!(a.aggregates_to_csv().starts_with(AGG_HEADER));
    }

    #[test]
    fn config_validation() {
        let text = r#"{"swept": {"name": "B", "values": [2]}, "fixed": {"B": 3, "N": 4, "M": 4, "S": 1, "G": 1, "R": 1}}"#;
        assert!(SweepConfig::from_json(text).is_err());
        let text = r#"{"swept": {"name": "S", "values": [9]}, "fixed": {"N": 4, "M": 4, "B": 3, "G": 1, "R": 1}}"#;
        assert!(SweepConfig::from_json(text).is_err());
        let text = r#"{"swept": {"name": "S", "values": [1]}, "fixed": {"N": 4, "M": 4, "B": 3, "R": 1}}"#;
        assert!(matches!(SweepConfig::from_json(text), Err(Error::MissingParameter("G"))));
        let text = r#"{"swept": {"name": "S", "values": [1]}, "fixed": {"N": 4, "M": 4, "B": 3, "G": 1, "R": 1}, "trials": 0}"#;
        assert!(SweepConfig::from_json(text).is_err());
        let text = r#"{"swept": {"name": "N", "values": [4.5]}, "fixed": {"S": 1, "M": 4, "B": 3, "G": 1, "R": 1}}"#;
        assert!(SweepConfig::from_json(text).is_err());
    }

    #[test]
    fn saturation_ratio_is_tuned() {
        let inst = generate_instance(40, 200, 4, 2.0, QuantizerConfig::new(3, 1.0).unwrap(), 17).unwrap();
        for target in [0.05, 0.2, 0.4] {
            let (g, r) = tune_saturation_level(&inst, 3, target).unwrap();
            assert!((r - target).abs() <= RATIO_TOLERANCE * target, "{target}: {r} at G={g}");
        }
    }

    #[test]
    fn agg_sibling_path() {
        assert_eq!(agg_path(Path::new("/tmp/out.csv")), PathBuf::from("/tmp/out_agg.csv"));
        assert_eq!(agg_path(Path::new("res")), PathBuf::from("res_agg"));
    }

    #[test]
    fn ranking_of_duplicate_model_is_tied() {
        let cfg = small_config();
        let mut res = run_sweep(&cfg).unwrap();
        res.rows.retain(|r| r.model == Preset::Linf);
        let dup: Vec<SweepRow> = res.rows.iter().map(|r| SweepRow { model: Preset::L2, ..r.clone() }).collect();
        res.rows.extend(dup);
        for ranking in compare_models(&res) {
            assert_eq!(ranking.standings.len(), 2);
            assert_eq!(ranking.standings[1].gap_to_best, 0.0);
        }
    }
}
