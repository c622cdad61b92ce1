//! Library behind the `pairrank` binary: argument parsing, commands, file formats.

mod commands;
mod config;
mod error;
mod formats;
mod manifest;
mod plot;

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use commands::{CheckKind, LambdaChoice, Run};
use error::{CliError, CliResult};
use formats::{blob_hash, write_atomic};
use manifest::{FileRecord, RunManifest, MANIFEST_NAME};

#[derive(Parser)]
#[command(
    name = "pairrank",
    version,
    about = "Collaborative ranking from pairwise comparisons"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Draw a low-rank ground truth and comparisons from it.
    Simulate(SimulateArgs),
    /// Estimate the preference matrix from a comparison CSV.
    Fit(FitArgs),
    /// Run an error-scaling experiment from a JSON spec.
    Experiment(ExperimentArgs),
    /// Monte Carlo checks of the events behind the error bound.
    Verify(VerifyArgs),
    /// Re-run a recorded command and compare its outputs.
    Replay(ReplayArgs),
}

#[derive(Args, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d1: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d2: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rank: Option<usize>,
    /// Number of comparisons.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    /// Spikiness bound: max |theta| <= alpha / sqrt(d1 d2). Default 10.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    /// Frobenius norm of the ground truth. Default 1.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    fro: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    /// JSON file of defaults; flags take precedence.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct FitArgs {
    /// Comparison CSV with header `user,item_a,item_b,y`.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    input: Option<PathBuf>,
    /// Ground truth matrix; adds error and ranking metrics to fit.json.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    truth: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d1: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d2: Option<usize>,
    /// `theory` or a nonnegative number.
    #[arg(long, value_parser = commands::parse_lambda, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda: Option<LambdaChoice>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    lambda_multiplier: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    max_iters: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rel_tol: Option<f64>,
    /// Also project onto max |theta| <= LINF.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    linf: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    svd_rank_cap: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct ExperimentArgs {
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<PathBuf>,
    /// Overrides the seed in the spec.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args, Serialize)]
struct VerifyArgs {
    #[arg(long, value_enum)]
    #[serde(skip_serializing_if = "Option::is_none")]
    check: Option<CheckKind>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d1: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    d2: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    n: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    trials: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    seed: Option<u64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    gamma: Option<f64>,
    /// Scales the gradient operator-norm threshold.
    #[arg(long, allow_hyphen_values = true)]
    #[serde(skip_serializing_if = "Option::is_none")]
    threshold_multiplier: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_rank: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    truth_alpha: Option<f64>,
    /// Spikiness of the restricted set.
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    membership_constant: Option<f64>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    rsc_rank: Option<usize>,
    #[arg(long)]
    #[serde(skip_serializing_if = "Option::is_none")]
    out_dir: Option<PathBuf>,
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
}

#[derive(Args)]
struct ReplayArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// Write the regenerated outputs here. Without it the replay only compares.
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

fn absolute(path: &Path) -> CliResult<PathBuf> {
    std::path::absolute(path).map_err(|e| CliError::io(path, e))
}

fn records(outputs: &[(String, Vec<u8>)]) -> Vec<FileRecord> {
    outputs
        .iter()
        .map(|(name, bytes)| FileRecord {
            path: PathBuf::from(name),
            blob_sha256: blob_hash(bytes),
            bytes: bytes.len() as u64,
        })
        .collect()
}

/// Writes the outputs and the manifest; returns the exit code.
fn finish(
    command: &str,
    config: Value,
    out_dir: &Path,
    run: Run,
    started: SystemTime,
    clock: Instant,
) -> CliResult<u8> {
    std::fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, bytes) in &run.outputs {
        write_atomic(&out_dir.join(name), bytes)?;
    }
    let exit_code = run.verdict.as_ref().map_or(0, |e| e.code);
    let mut timings = run.timings;
    timings.insert("total".into(), clock.elapsed().as_secs_f64());
    let manifest = RunManifest {
        tool: env!("CARGO_PKG_NAME").into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: command.into(),
        config,
        seed: run.seed,
        working_dir: absolute(Path::new("."))?,
        out_dir: absolute(out_dir)?,
        inputs: run.inputs,
        outputs: records(&run.outputs),
        started_unix_ms: started.duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis()),
        timings,
        exit_code,
    };
    let mut bytes = serde_json::to_vec_pretty(&manifest).expect("serializable");
    bytes.push(b'\n');
    write_atomic(&out_dir.join(MANIFEST_NAME), &bytes)?;
    if !run.summary.is_empty() {
        println!("{}", run.summary);
    }
    if let Some(e) = run.verdict {
        eprintln!("error: {e}");
    }
    Ok(exit_code)
}

fn resolve_config(
    defaults: Value,
    file: Option<&Path>,
    flags: &impl Serialize,
    has_seed: bool,
) -> CliResult<Value> {
    // Resolve into a generic value; the command parses it with field pointers.
    config::resolve::<Value>(defaults, file, flags, has_seed)
}

fn run_command(command: &str, config: Value) -> CliResult<u8> {
    let started = SystemTime::now();
    let clock = Instant::now();
    let (run, out_dir, config) = commands::dispatch(command, config)?;
    finish(command, config, &out_dir, run, started, clock)
}

fn replay(args: &ReplayArgs) -> CliResult<u8> {
    let recorded = commands::read_manifest(&args.manifest)?;
    if recorded.version != env!("CARGO_PKG_VERSION") {
        eprintln!(
            "warning: manifest written by version {}, replaying with {}",
            recorded.version,
            env!("CARGO_PKG_VERSION")
        );
    }
    for input in &recorded.inputs {
        let bytes = formats::read_file(&input.path)?;
        if blob_hash(&bytes) != input.blob_sha256 {
            return Err(CliError::input(format!(
                "{}: content changed since the recorded run",
                input.path.display()
            )));
        }
    }
    let out_dir = args.out_dir.as_deref().map(absolute).transpose()?;
    std::env::set_current_dir(&recorded.working_dir).map_err(|e| CliError::io(&recorded.working_dir, e))?;
    let (run, _, config) = commands::dispatch(&recorded.command, recorded.config.clone())?;
    let fresh = records(&run.outputs);
    let mismatched: Vec<String> = recorded
        .outputs
        .iter()
        .filter(|r| !fresh.contains(r))
        .map(|r| r.path.display().to_string())
        .collect();
    if let Some(dir) = out_dir {
        let mut config = config;
        config["out_dir"] = Value::String(dir.display().to_string());
        finish(
            &recorded.command,
            config,
            &dir,
            run,
            SystemTime::now(),
            Instant::now(),
        )?;
    }
    if mismatched.is_empty() && fresh.len() == recorded.outputs.len() {
        println!("replay reproduced {} outputs", fresh.len());
        Ok(0)
    } else {
        Err(CliError::check_failed(format!(
            "replay differs from the recorded run: {}",
            if mismatched.is_empty() {
                "different output set".to_string()
            } else {
                mismatched.join(", ")
            }
        )))
    }
}

fn main_inner(cli: Cli) -> CliResult<u8> {
    match cli.command {
        Command::Simulate(a) => {
            let cfg = resolve_config(commands::simulate_defaults(), a.config.as_deref(), &a, true)?;
            run_command("simulate", cfg)
        }
        Command::Fit(a) => {
            let cfg = resolve_config(commands::fit_defaults(), a.config.as_deref(), &a, true)?;
            run_command("fit", cfg)
        }
        Command::Experiment(a) => {
            let cfg = resolve_config(commands::experiment_defaults(), a.config.as_deref(), &a, true)?;
            run_command("experiment", cfg)
        }
        Command::Verify(a) => {
            let cfg = resolve_config(commands::verify_defaults(), a.config.as_deref(), &a, true)?;
            run_command("verify", cfg)
        }
        Command::Replay(a) => replay(&a),
    }
}

/// Parses `args` (program name first), runs the command and returns the exit code.
pub fn run<I, T>(args: I) -> u8
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { error::code::INPUT } else { 0 };
        }
    };
    match main_inner(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            e.code
        }
    }
}
