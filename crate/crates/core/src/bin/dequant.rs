use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::Deserialize;

use dequant::analysis::{bound_report, RhoMode};
use dequant::calibration::{calibrate, CalibrationResult, Method, DEFAULT_SAMPLES};
use dequant::constrained::{preset, solve_constrained_with, Preset};
use dequant::harness::{run_sweep, SweepConfig};
use dequant::instance::{generate_instance, ProblemInstance};
use dequant::lasso_inf::{solve_lasso_inf_with, AdmmOptions};
use dequant::partition::{partition, PartitionedSystem};
use dequant::quantizer::QuantizerConfig;
use dequant::report::{CsvTrace, TraceSink};

#[derive(Parser)]
#[command(name = "dequant", version, about = "Sparse recovery from saturating quantized measurements")]
struct Cli {
    /// Input file: generator, instance or sweep JSON depending on the command.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output file; stdout when omitted.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (default: all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Per-iteration solver trace (CSV) or sweep progress, on stderr.
    #[arg(long, global = true)]
    trace: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a random instance and emit it as JSON.
    Gen,
    /// Solve one instance with one model and print the report as JSON.
    Solve(SolveArgs),
    /// Calibrate ε and λ for an instance.
    Calibrate(CalArgs),
    /// Evaluate the error bounds for an instance against a LASSO∞ solve.
    Bounds(BoundsArgs),
    /// Run a parameter sweep and write CSV.
    Sweep,
}

#[derive(Args)]
struct CalArgs {
    #[arg(long, default_value = "oracle")]
    method: Method,
    /// Confidence P = 1 − π, ignored by the oracle.
    #[arg(long, default_value_t = 0.95)]
    confidence: f64,
    #[arg(long, default_value_t = DEFAULT_SAMPLES)]
    samples: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long, default_value = "LassoInf", value_parser = parse_preset)]
    model: Preset,
    #[command(flatten)]
    cal: CalArgs,
    /// Solver options as JSON; missing fields take their defaults.
    #[arg(long)]
    solver: Option<PathBuf>,
}

#[derive(Args)]
struct BoundsArgs {
    /// Block size `l`.
    #[arg(long, default_value_t = 2)]
    l: usize,
    /// Use this many random subsets per order instead of exhaustive enumeration.
    #[arg(long)]
    sampled: Option<usize>,
    #[command(flatten)]
    cal: CalArgs,
}

fn parse_preset(s: &str) -> Result<Preset, String> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| format!("unknown model {s:?}; expected one of Linf, L2, Dantzig, L2DantzigInf, LassoInf"))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct GenConfig {
    #[serde(rename = "N")]
    n: usize,
    #[serde(rename = "M")]
    m: usize,
    #[serde(rename = "S")]
    s: usize,
    #[serde(rename = "B")]
    bits: u32,
    #[serde(rename = "G")]
    saturation_level: f64,
    #[serde(rename = "R")]
    scale: f64,
}

impl Default for GenConfig {
    fn default() -> Self {
        GenConfig { n: 500, m: 300, s: 10, bits: 4, saturation_level: 0.4, scale: 10.0 }
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        pool = pool.num_threads(n);
    }
    pool.build()?.install(|| run(&cli))
}

fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Gen => {
            let cfg: GenConfig = match &cli.config {
                Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => GenConfig::default(),
            };
            let q = QuantizerConfig::new(cfg.bits, cfg.saturation_level)?;
            let inst = generate_instance(cfg.n, cfg.m, cfg.s, cfg.scale, q, cli.seed.unwrap_or(0))?;
            emit(cli.out.as_deref(), &inst.to_json()?)
        }
        Command::Solve(args) => {
            let (inst, system) = load_instance(cli)?;
            let cal = calibration(cli, &args.cal, &inst, &system)?;
            let options: AdmmOptions = match &args.solver {
                Some(p) => serde_json::from_str(&read(p)?).with_context(|| format!("parsing {}", p.display()))?,
                None => AdmmOptions::default(),
            };
            let mut sink = cli.trace.then(|| CsvTrace::new(std::io::stderr()));
            let trace = sink.as_mut().map(|s| s as &mut dyn TraceSink);
            let report = if args.model == Preset::LassoInf {
                solve_lasso_inf_with(&system, cal.lambda, &options, None, trace)?
            } else {
                let spec = preset(args.model, Some(cal.epsilon), Some(cal.lambda))?;
                solve_constrained_with(&system, &spec, &options, trace)?
            };
            if let Some(s) = sink {
                s.finish()?;
            }
            emit(cli.out.as_deref(), &serde_json::to_string_pretty(&report)?)
        }
        Command::Calibrate(args) => {
            let (inst, system) = load_instance(cli)?;
            let cal = calibration(cli, args, &inst, &system)?;
            emit(cli.out.as_deref(), &serde_json::to_string_pretty(&cal)?)
        }
        Command::Bounds(args) => bounds(cli, args),
        Command::Sweep => {
            let path = cli.config.as_ref().context("sweep needs --config <sweep.json>")?;
            let mut cfg = SweepConfig::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
            if let Some(seed) = cli.seed {
                cfg.master_seed = seed;
            }
            if cli.trace {
                eprintln!(
                    "sweeping {} over {} values, {} models, {} trials",
                    cfg.swept.name.name(),
                    cfg.swept.values.len(),
                    cfg.models.len(),
                    cfg.trials
                );
            }
            let result = run_sweep(&cfg)?;
            match &cli.out {
                Some(p) => {
                    let agg = result.write(p)?;
                    if cli.trace {
                        eprintln!("wrote {} and {}", p.display(), agg.display());
                    }
                }
                None => {
                    print!("{}", result.to_csv());
                    eprint!("{}", result.aggregates_to_csv());
                }
            }
            let failed = result.rows.iter().filter(|r| !r.converged).count();
            if failed > 0 {
                eprintln!("{failed} of {} solves did not converge", result.rows.len());
            }
            Ok(())
        }
    }
}

fn bounds(cli: &Cli, args: &BoundsArgs) -> Result<()> {
    let (inst, system) = load_instance(cli)?;
    let cal = calibration(cli, &args.cal, &inst, &system)?;
    let mode = match args.sampled {
        Some(subsets) => RhoMode::Sampled { subsets, seed: cli.seed.unwrap_or(0) },
        None => RhoMode::exhaustive(),
    };
    let report = bound_report(&system, &inst.x_star, &inst.support, args.l, cal.lambda, mode)?;
    let solved = solve_lasso_inf_with(&system, cal.lambda, &AdmmOptions::default(), None, None)?;
    let error = (&solved.x_hat - &inst.x_star).norm();

    let fmt = |v: Option<f64>| v.map_or_else(|| "-".to_string(), |v| format!("{v:.6e}"));
    let mut table = String::new();
    table.push_str(&format!("s = {}, l = {}, λ = {:.6e}, Δ = {:.6e}\n", report.s, report.l, cal.lambda, system.delta));
    table.push_str(&format!("A0          {:.6e}\n", report.a0));
    table.push_str(&format!("A1          {:.6e}\n", report.a1));
    table.push_str(&format!("C1          {}\n", fmt(report.c1)));
    table.push_str(&format!("C2          {}\n", fmt(report.c2)));
    table.push_str(&format!("bound LASSO {}\n", fmt(report.bound_lasso)));
    table.push_str(&format!("bound ℓ∞    {}\n", fmt(report.bound_linf)));
    table.push_str(&format!("‖x̂ − x*‖    {error:.6e}\n"));
    if !report.valid {
        table.push_str("A0 ≤ 0: no bound for this instance\n");
    }
    eprint!("{table}");

    let json = serde_json::json!({ "report": report, "lambda": cal.lambda, "error_norm": error });
    emit(cli.out.as_deref(), &serde_json::to_string_pretty(&json)?)
}

fn calibration(
    cli: &Cli,
    args: &CalArgs,
    inst: &ProblemInstance,
    system: &PartitionedSystem,
) -> Result<CalibrationResult> {
    Ok(calibrate(system, args.method, 1.0 - args.confidence, args.samples, cli.seed.unwrap_or(0), Some(&inst.x_star))?)
}

fn load_instance(cli: &Cli) -> Result<(ProblemInstance, PartitionedSystem)> {
    let path = cli.config.as_ref().context("this command needs --config <instance.json>")?;
    let inst = ProblemInstance::from_json(&read(path)?).with_context(|| format!("parsing {}", path.display()))?;
    let system = partition(&inst);
    Ok((inst, system))
}

fn read(path: &Path) -> Result<String> {
    fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(p) => fs::write(p, format!("{text}\n")).with_context(|| format!("writing {}", p.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")?;
            Ok(())
        }
    }
}
