//! Command-line front end. `run` parses arguments, dispatches, and maps
//! errors to exit codes.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::complexity::{reduction_report, ComplexityConfig};
use crate::data::{
    load_dataset, make_dataset_with, save_dataset, ArrayGeometry, DataFormat, NoiseConvention, LOAD_TOLERANCE,
};
use crate::error::{config, Error, Result};
use crate::net::{Network, NetworkConfig};
use crate::train::{evaluate, train, train_restarts, LrSchedule, OptimizerConfig, OptimizerKind};
use crate::verify::{default_lambda, run_checks, VerifyOptions};
use crate::VERSION;

pub const EXIT_OK: i32 = 0;
pub const EXIT_VERIFY: i32 = 1;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGENCE: i32 = 4;
pub const EXIT_SHAPE: i32 = 5;

#[derive(Debug, Parser)]
#[command(
    name = "stnn",
    version,
    about = "Structured DVM beamforming networks",
    args_override_self = true
)]
struct Cli {
    /// File of `key = value` lines supplying flag defaults; flags on the
    /// command line win.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate a uniform linear array and write a dataset.
    GenData(GenDataArgs),
    /// Train a structured or fully connected network.
    Train(TrainArgs),
    /// Run the numerical self-checks.
    Verify(VerifyArgs),
    /// Tabulate parameter and FLOP counts.
    Bench(BenchArgs),
    /// Evaluate a saved model on a dataset.
    Eval(EvalArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum FormatArg {
    Binary,
    Csv,
}

impl From<FormatArg> for DataFormat {
    fn from(f: FormatArg) -> Self {
        match f {
            FormatArg::Binary => DataFormat::Binary,
            FormatArg::Csv => DataFormat::Csv,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ModelArg {
    Stnn,
    Ffnn,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum OptimizerArg {
    Adam,
    Sgd,
    Lm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum ScheduleArg {
    Constant,
    Cosine,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
enum NoiseArg {
    ComplexTotal,
    PerComponent,
}

#[derive(Debug, Args, Serialize)]
struct GenDataArgs {
    #[arg(long, default_value_t = 16)]
    n: usize,
    #[arg(long, default_value_t = 24.0)]
    freq_ghz: f64,
    #[arg(long, value_delimiter = ',', default_value = "30,40,50")]
    angles: Vec<f64>,
    #[arg(long, default_value_t = 1000)]
    samples_per_angle: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_std: f64,
    /// How `--noise-std` is shared between real and imaginary parts.
    #[arg(long, value_enum, default_value_t = NoiseArg::ComplexTotal)]
    noise_convention: NoiseArg,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value_t = FormatArg::Binary)]
    format: FormatArg,
    /// Top of the band; sets the inter-element delay when `--tau-s` is absent.
    #[arg(long, default_value_t = 32.0)]
    f_max_ghz: f64,
    #[arg(long)]
    tau_s: Option<f64>,
    #[arg(long)]
    spacing_m: Option<f64>,
}

#[derive(Debug, Args, Serialize)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long, value_enum, default_value_t = ModelArg::Stnn)]
    model: ModelArg,
    #[arg(long, default_value_t = 1)]
    p: usize,
    /// Recursion depth; defaults to 4, 5, 6 for N = 8, 16, 32.
    #[arg(long)]
    lambda: Option<u32>,
    #[arg(long, default_value_t = 100)]
    epochs: usize,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    optimizer: OptimizerArg,
    #[arg(long, default_value_t = 1e-3)]
    lr: f64,
    #[arg(long, value_enum, default_value_t = ScheduleArg::Constant)]
    lr_schedule: ScheduleArg,
    /// Adam second-moment decay.
    #[arg(long, default_value_t = 0.999)]
    beta2: f64,
    #[arg(long, default_value_t = 32)]
    batch_size: usize,
    #[arg(long)]
    target_mse: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 1)]
    threads: usize,
    /// Fresh seeds to try in turn until one reaches `--target-mse`.
    #[arg(long, default_value_t = 1)]
    restarts: usize,
    #[arg(long, default_value_t = 0.2)]
    slope: f64,
    #[arg(long)]
    out_model: Option<PathBuf>,
    #[arg(long)]
    out_report: Option<PathBuf>,
    /// Start from a saved model instead of a fresh one.
    #[arg(long)]
    init_model: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
struct VerifyArgs {
    #[arg(long, default_value_t = 256)]
    n_max: usize,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, hide = true)]
    corrupt_twiddle: bool,
}

#[derive(Debug, Args, Serialize)]
struct BenchArgs {
    #[arg(long, value_delimiter = ',', default_value = "8,16,32")]
    n_list: Vec<usize>,
    #[arg(long, default_value_t = 1)]
    p: usize,
    #[arg(long, default_value = "bench")]
    out: PathBuf,
}

#[derive(Debug, Args, Serialize)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
}

/// Exit code for a library error.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_USAGE,
        Error::Io(_) | Error::Format(_) | Error::Json(_) | Error::Csv(_) => EXIT_IO,
        Error::Divergence(_) => EXIT_DIVERGENCE,
        Error::Shape(_) => EXIT_SHAPE,
    }
}

/// Flags from a config file, in `--key value` form.
fn config_file_flags(path: &Path) -> Result<Vec<String>> {
    let text = std::fs::read_to_string(path)?;
    let mut flags = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return config(format!("{}:{}: expected `key = value`", path.display(), i + 1));
        };
        let key = key.trim().replace('_', "-");
        let value = value.trim();
        match value {
            "true" => flags.push(format!("--{key}")),
            "false" => {}
            _ => {
                flags.push(format!("--{key}"));
                flags.push(value.to_string());
            }
        }
    }
    Ok(flags)
}

/// Splices config-file flags in right after the subcommand so that anything
/// given on the command line overrides them.
fn expand_config(args: Vec<String>) -> Result<Vec<String>> {
    let mut path = None;
    let mut rest = Vec::with_capacity(args.len());
    let mut it = args.into_iter();
    while let Some(a) = it.next() {
        if a == "--config" {
            match it.next() {
                Some(p) => path = Some(PathBuf::from(p)),
                None => return config("--config needs a path"),
            }
        } else if let Some(p) = a.strip_prefix("--config=") {
            path = Some(PathBuf::from(p));
        } else {
            rest.push(a);
        }
    }
    let Some(path) = path else { return Ok(rest) };
    let flags = config_file_flags(&path)?;
    let sub = rest
        .iter()
        .skip(1)
        .position(|a| !a.starts_with('-'))
        .map(|i| i + 2)
        .unwrap_or(rest.len());
    rest.splice(sub..sub, flags);
    Ok(rest)
}

fn detect_format(path: &Path) -> DataFormat {
    match path.extension().and_then(|e| e.to_str()) {
        Some(e) if e.eq_ignore_ascii_case("csv") => DataFormat::Csv,
        _ => DataFormat::Binary,
    }
}

fn echo<T: Serialize>(out: &mut dyn Write, command: &str, args: &T) -> Result<()> {
    let cfg = serde_json::to_string(args)?;
    writeln!(out, "{VERSION} {command} {cfg}")?;
    Ok(())
}

fn gen_data(a: &GenDataArgs, out: &mut dyn Write) -> Result<i32> {
    echo(out, "gen-data", a)?;
    if a.samples_per_angle == 0 {
        return config("--samples-per-angle must be at least 1");
    }
    let mut geometry = ArrayGeometry::new(a.n, a.f_max_ghz * 1e9)?;
    if let Some(d) = a.spacing_m {
        geometry = geometry.with_spacing(d)?;
    }
    if let Some(t) = a.tau_s {
        geometry = geometry.with_tau(t)?;
    }
    let convention = match a.noise_convention {
        NoiseArg::ComplexTotal => NoiseConvention::ComplexTotal,
        NoiseArg::PerComponent => NoiseConvention::PerComponent,
    };
    let ds = make_dataset_with(
        &geometry,
        a.freq_ghz * 1e9,
        &a.angles,
        a.samples_per_angle,
        a.noise_std,
        convention,
        a.seed,
    )?;
    save_dataset(&ds, &a.out, a.format.into())?;
    let err = ds.max_target_error()?;
    let verdict = if err <= LOAD_TOLERANCE { "PASS" } else { "FAIL" };
    writeln!(out, "samples: {}", ds.len())?;
    writeln!(out, "target consistency: {verdict} (max error {err:.3e})")?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(if err <= LOAD_TOLERANCE { EXIT_OK } else { EXIT_VERIFY })
}

fn train_cmd(a: &TrainArgs, out: &mut dyn Write) -> Result<i32> {
    echo(out, "train", a)?;
    let ds = load_dataset(&a.data, detect_format(&a.data))?;
    let opt = OptimizerConfig {
        kind: match a.optimizer {
            OptimizerArg::Adam => OptimizerKind::Adam,
            OptimizerArg::Sgd => OptimizerKind::Sgd,
            OptimizerArg::Lm => OptimizerKind::GaussNewtonLm,
        },
        learning_rate: a.lr,
        lr_schedule: match a.lr_schedule {
            ScheduleArg::Constant => LrSchedule::Constant,
            ScheduleArg::Cosine => LrSchedule::Cosine,
        },
        beta2: a.beta2,
        batch_size: a.batch_size,
        epochs: a.epochs,
        seed: a.seed,
        target_mse: a.target_mse,
        patience: a.patience,
        threads: a.threads,
        ..Default::default()
    };
    let (trained, report) = match &a.init_model {
        Some(path) => {
            if a.restarts > 1 {
                return config("--restarts needs a fresh model, not --init-model");
            }
            train(&Network::load(path)?, &ds, &opt)?
        }
        None => {
            let cfg = match a.model {
                ModelArg::Stnn => {
                    NetworkConfig::structured(ds.n, a.p, a.lambda.unwrap_or_else(|| default_lambda(ds.n)))
                }
                ModelArg::Ffnn => NetworkConfig::fully_connected(ds.n, a.p),
            };
            let cfg = cfg
                .with_delay_alpha(ds.dvm()?.alpha())
                .with_seed(a.seed)
                .with_slope(a.slope);
            let outcome = train_restarts(&cfg, &ds, &opt, a.restarts)?;
            if outcome.reports.len() > 1 {
                for (i, r) in outcome.reports.iter().enumerate() {
                    writeln!(
                        out,
                        "attempt {i} (seed {}): val mse {:.6e} ({:?})",
                        r.seed, r.final_val_mse, r.stop_reason
                    )?;
                }
            }
            let report = outcome.best_report().clone();
            (outcome.network, report)
        }
    };
    writeln!(out, "params: {}", report.param_count)?;
    writeln!(
        out,
        "epochs: {} ({} steps, stop: {:?})",
        report.epochs_run, report.steps_run, report.stop_reason
    )?;
    writeln!(out, "final train mse: {:.6e}", report.final_train_mse)?;
    writeln!(out, "final val mse: {:.6e}", report.final_val_mse)?;
    if let Some(path) = &a.out_model {
        trained.save(path)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    if let Some(path) = &a.out_report {
        std::fs::write(path, report.to_json()?)?;
        writeln!(out, "wrote {}", path.display())?;
    }
    Ok(EXIT_OK)
}

fn verify_cmd(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    echo(out, "verify", a)?;
    let checks = run_checks(&VerifyOptions {
        n_max: a.n_max,
        trials: a.trials,
        seed: a.seed,
        corrupt_twiddle: a.corrupt_twiddle,
    })?;
    writeln!(
        out,
        "{:<14} {:>6} {:>12} {:>10}  worst case",
        "check", "result", "worst", "tolerance"
    )?;
    for c in &checks {
        let verdict = if c.passed { "PASS" } else { "FAIL" };
        writeln!(
            out,
            "{:<14} {:>6} {:>12.3e} {:>10.0e}  {}",
            c.name, verdict, c.worst, c.tolerance, c.worst_case
        )?;
    }
    match checks
        .iter()
        .filter(|c| !c.passed)
        .max_by(|a, b| (a.worst / a.tolerance).total_cmp(&(b.worst / b.tolerance)))
    {
        Some(bad) => {
            writeln!(out, "FAILED: {} ({})", bad.name, bad.worst_case)?;
            Ok(EXIT_VERIFY)
        }
        None => Ok(EXIT_OK),
    }
}

fn bench_cmd(a: &BenchArgs, out: &mut dyn Write) -> Result<i32> {
    echo(out, "bench", a)?;
    let configs: Vec<ComplexityConfig> = a
        .n_list
        .iter()
        .map(|&n| ComplexityConfig {
            n,
            p: a.p,
            lambda: default_lambda(n),
            l_layers: 5,
        })
        .collect();
    let report = reduction_report(&configs)?;
    report.write(&a.out)?;
    write!(out, "{}", report.to_csv()?)?;
    writeln!(out, "wrote {}", a.out.display())?;
    Ok(EXIT_OK)
}

fn eval_cmd(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    echo(out, "eval", a)?;
    let net = Network::load(&a.model)?;
    let ds = load_dataset(&a.data, detect_format(&a.data))?;
    let e = evaluate(&net, &ds)?;
    writeln!(out, "samples: {}", e.samples)?;
    writeln!(out, "mse: {:.6e}", e.mse)?;
    for g in &e.per_angle {
        writeln!(
            out,
            "angle {:>6.2}: mse {:.6e} ({} samples)",
            g.angle_deg, g.mse, g.samples
        )?;
    }
    Ok(EXIT_OK)
}

/// Runs the command line `args` (program name first), writing normal output
/// to `out` and diagnostics to `err`. Returns the process exit code.
pub fn run<I, S>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let args: Vec<String> = args.into_iter().map(Into::into).collect();
    let expanded = match expand_config(args) {
        Ok(a) => a,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            return exit_code(&e);
        }
    };
    let cli = match Cli::try_parse_from(expanded) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() {
                write!(err, "{text}")
            } else {
                write!(out, "{text}")
            };
            return code;
        }
    };
    let result = match &cli.command {
        Command::GenData(a) => gen_data(a, out),
        Command::Train(a) => train_cmd(a, out),
        Command::Verify(a) => verify_cmd(a, out),
        Command::Bench(a) => bench_cmd(a, out),
        Command::Eval(a) => eval_cmd(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run_capture(args: &[&str]) -> (i32, String, String) {
        let (mut out, mut err) = (Vec::new(), Vec::new());
        let code = run(std::iter::once("stnn").chain(args.iter().copied()), &mut out, &mut err);
        (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
    }

    #[test]
    fn config_file_is_overridden_by_flags() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("run.conf");
        std::fs::write(&cfg, "# verify settings\nn_max = 8\ntrials = 0\n").unwrap();
        let path = cfg.to_str().unwrap();
        let (code, _, _) = run_capture(&["verify", "--config", path]);
        assert_eq!(code, EXIT_USAGE);
        let (code, out, _) = run_capture(&["--config", path, "verify", "--trials", "1"]);
        assert_eq!(code, EXIT_OK, "{out}");
        assert!(out.contains("\"n_max\":8"));
        assert!(out.contains("\"trials\":1"));
    }

    #[test]
    fn malformed_config_line_is_usage_error() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = dir.path().join("bad.conf");
        std::fs::write(&cfg, "trials 3\n").unwrap();
        let (code, _, err) = run_capture(&["verify", "--config", cfg.to_str().unwrap()]);
        assert_eq!(code, EXIT_USAGE);
        assert!(err.contains("key = value"));
    }

    #[test]
    fn unknown_flag_is_usage_error() {
        let (code, _, err) = run_capture(&["bench", "--bogus"]);
        assert_eq!(code, EXIT_USAGE);
        assert!(!err.is_empty());
    }

    #[test]
    fn help_exits_zero() {
        let (code, out, _) = run_capture(&["--help"]);
        assert_eq!(code, EXIT_OK);
        for sub in ["gen-data", "train", "verify", "bench", "eval"] {
            assert!(out.contains(sub), "{sub}");
        }
    }

    #[test]
    fn error_codes() {
        assert_eq!(exit_code(&Error::Shape("x".into())), EXIT_SHAPE);
        assert_eq!(exit_code(&Error::Divergence("x".into())), EXIT_DIVERGENCE);
        assert_eq!(exit_code(&Error::Format("x".into())), EXIT_IO);
    }
}
