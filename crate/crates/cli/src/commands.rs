//! The subcommands, each as a pure function from resolved config to files.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use pairrank::experiments::{ExperimentCell, ExperimentSpec};
use pairrank::optimizer::{SolveResult, SolverConfig};
use pairrank::sampling::{generate_ground_truth, sample_comparisons, GroundTruthSpec};
use pairrank::seed::derive_seed;
use pairrank::theory::lambda_theory;
use pairrank::verify::{verify_gradient_opnorm, verify_rsc, GradientCheck, RscCheck, VerificationReport};
use pairrank::{fit, kendall_tau_per_user, pairwise_accuracy, run_experiment, ComparisonDataset};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{from_value, parse_json};
use crate::error::{CliError, CliResult};
use crate::formats::{
    blob_hash, comparisons_to_bytes, matrix_to_bytes, parse_comparisons, parse_matrix, read_file,
};
use crate::manifest::FileRecord;
use crate::plot::{render, Chart, Scale, Series};

/// Everything a command produced, before anything touches the output directory.
pub struct Run {
    pub inputs: Vec<FileRecord>,
    /// File name (relative to the output directory) and content.
    pub outputs: Vec<(String, Vec<u8>)>,
    pub seed: Option<u64>,
    pub timings: BTreeMap<String, f64>,
    /// Set when the command completed but its verdict is a failure.
    pub verdict: Option<CliError>,
    pub summary: String,
}

impl Run {
    fn new(seed: Option<u64>) -> Run {
        Run {
            inputs: Vec::new(),
            outputs: Vec::new(),
            seed,
            timings: BTreeMap::new(),
            verdict: None,
            summary: String::new(),
        }
    }

    fn read_input(&mut self, path: &Path) -> CliResult<Vec<u8>> {
        let bytes = read_file(path)?;
        let abs = std::fs::canonicalize(path).map_err(|e| CliError::io(path, e))?;
        self.inputs.push(FileRecord {
            path: abs,
            blob_sha256: blob_hash(&bytes),
            bytes: bytes.len() as u64,
        });
        Ok(bytes)
    }

    fn timed<T>(&mut self, phase: &str, f: impl FnOnce() -> T) -> T {
        let start = Instant::now();
        let out = f();
        self.timings.insert(phase.into(), start.elapsed().as_secs_f64());
        out
    }
}

fn json_bytes(value: &impl Serialize) -> Vec<u8> {
    let mut v = serde_json::to_vec_pretty(value).expect("serializable");
    v.push(b'\n');
    v
}

fn default_out_dir() -> PathBuf {
    PathBuf::from(".")
}

// ---------------------------------------------------------------- simulate

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    pub n: usize,
    pub alpha: f64,
    pub fro: f64,
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn simulate_defaults() -> Value {
    json!({ "alpha": 10.0, "fro": 1.0, "seed": 0, "out_dir": default_out_dir() })
}

pub fn simulate(cfg: &SimulateConfig) -> CliResult<Run> {
    let mut run = Run::new(Some(cfg.seed));
    if cfg.n == 0 {
        return Err(CliError::input("--n must be at least 1"));
    }
    if !(cfg.fro > 0.0 && cfg.fro <= 1.0) {
        return Err(CliError::input(format!(
            "--fro must lie in (0, 1], got {}",
            cfg.fro
        )));
    }
    let spec = GroundTruthSpec {
        d1: cfg.d1,
        d2: cfg.d2,
        rank: cfg.rank,
        spikiness: cfg.alpha,
        frobenius_norm: cfg.fro,
        seed: derive_seed(cfg.seed, &[0]),
    };
    let theta = run.timed("ground_truth", || generate_ground_truth(&spec))?;
    let data = run.timed("sampling", || {
        sample_comparisons(&theta, cfg.n, derive_seed(cfg.seed, &[1]))
    })?;
    run.outputs
        .push(("theta_star.csv".into(), matrix_to_bytes(&theta)));
    run.outputs
        .push(("comparisons.csv".into(), comparisons_to_bytes(&data)));
    run.summary = format!(
        "simulated {} comparisons on a {}x{} rank-{} ground truth",
        cfg.n, cfg.d1, cfg.d2, cfg.rank
    );
    Ok(run)
}

// ---------------------------------------------------------------- fit

/// `--lambda`: a nonnegative number or `theory`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LambdaChoice {
    Value(f64),
    Named(NamedLambda),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NamedLambda {
    Theory,
}

pub fn parse_lambda(s: &str) -> Result<LambdaChoice, String> {
    if s == "theory" {
        return Ok(LambdaChoice::Named(NamedLambda::Theory));
    }
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v >= 0.0 => Ok(LambdaChoice::Value(v)),
        _ => Err(format!("expected `theory` or a nonnegative number, got `{s}`")),
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    pub input: PathBuf,
    pub truth: Option<PathBuf>,
    pub d1: Option<usize>,
    pub d2: Option<usize>,
    pub lambda: LambdaChoice,
    /// Applied to the theory value only.
    pub lambda_multiplier: f64,
    pub max_iters: usize,
    pub rel_tol: f64,
    pub linf: Option<f64>,
    pub svd_rank_cap: Option<usize>,
    /// Seed of the pairwise-accuracy Monte Carlo when `truth` is given.
    pub seed: u64,
    pub out_dir: PathBuf,
}

pub fn fit_defaults() -> Value {
    let d = SolverConfig::new(0.0);
    json!({
        "truth": null, "d1": null, "d2": null,
        "lambda": "theory", "lambda_multiplier": 1.0,
        "max_iters": d.max_iters, "rel_tol": d.rel_tol,
        "linf": null, "svd_rank_cap": null,
        "seed": 0, "out_dir": default_out_dir(),
    })
}

#[derive(Serialize)]
struct FitSummary<'a> {
    d1: usize,
    d2: usize,
    n: usize,
    lambda: f64,
    converged: bool,
    iterations: usize,
    final_step: f64,
    rank_estimate: usize,
    objective_trace: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    metrics: Option<FitMetrics>,
}

#[derive(Serialize)]
struct FitMetrics {
    sq_fro_error: f64,
    relative_fro_error: f64,
    pairwise_accuracy: f64,
    mean_kendall_tau: Option<f64>,
}

fn infer_dims(data: &[pairrank::ComparisonRecord]) -> (usize, usize) {
    let d1 = data.iter().map(|r| r.user + 1).max().unwrap_or(0);
    let d2 = data.iter().map(|r| r.item_a.max(r.item_b) + 1).max().unwrap_or(0);
    (d1, d2.max(2))
}

pub fn fit_cmd(cfg: &FitConfig) -> CliResult<Run> {
    let mut run = Run::new(Some(cfg.seed));
    let bytes = run.read_input(&cfg.input)?;
    let records = parse_comparisons(&cfg.input, &bytes)?;
    if records.is_empty() {
        return Err(CliError::input(format!(
            "{}: no comparisons",
            cfg.input.display()
        )));
    }
    let truth = match &cfg.truth {
        Some(p) => {
            let b = run.read_input(p)?;
            Some(parse_matrix(p, &b)?)
        }
        None => None,
    };
    let inferred = truth.as_ref().map_or_else(|| infer_dims(&records), |t| t.shape());
    let (d1, d2) = (cfg.d1.unwrap_or(inferred.0), cfg.d2.unwrap_or(inferred.1));
    let n = records.len();
    let data = ComparisonDataset::new(d1, d2, records)?;

    let lambda = match cfg.lambda {
        LambdaChoice::Named(NamedLambda::Theory) => cfg.lambda_multiplier * lambda_theory(d1, d2, n)?,
        LambdaChoice::Value(v) => {
            if cfg.lambda_multiplier != 1.0 {
                return Err(CliError::input(
                    "--lambda-multiplier applies only to --lambda theory",
                ));
            }
            v
        }
    };
    if !(lambda.is_finite() && lambda >= 0.0) {
        return Err(CliError::input(format!(
            "lambda must be a nonnegative number, got {lambda}"
        )));
    }
    let mut solver = SolverConfig::new(lambda);
    solver.max_iters = cfg.max_iters;
    solver.rel_tol = cfg.rel_tol;
    solver.enforce_linf = cfg.linf;
    solver.svd_rank_cap = cfg.svd_rank_cap;
    let result: SolveResult = run.timed("fit", || fit(&data, &solver, None))?;

    let metrics = match &truth {
        Some(t) => {
            if t.shape() != (d1, d2) {
                return Err(CliError::input(format!(
                    "truth is {}x{} but the data is {d1}x{d2}",
                    t.rows(),
                    t.cols()
                )));
            }
            let err = (&result.theta_hat - t).frobenius_norm();
            let taus: Vec<f64> = kendall_tau_per_user(&result.theta_hat, t)?
                .into_iter()
                .flatten()
                .collect();
            Some(FitMetrics {
                sq_fro_error: err * err,
                relative_fro_error: err / t.frobenius_norm(),
                pairwise_accuracy: pairwise_accuracy(&result.theta_hat, t, 100_000, cfg.seed)?,
                mean_kendall_tau: (!taus.is_empty()).then(|| taus.iter().sum::<f64>() / taus.len() as f64),
            })
        }
        None => None,
    };
    let summary = FitSummary {
        d1,
        d2,
        n,
        lambda,
        converged: result.converged,
        iterations: result.iterations,
        final_step: result.final_step,
        rank_estimate: result.rank_estimate,
        objective_trace: &result.objective_trace,
        metrics,
    };
    run.outputs
        .push(("theta_hat.csv".into(), matrix_to_bytes(&result.theta_hat)));
    run.outputs.push(("fit.json".into(), json_bytes(&summary)));
    run.summary = format!(
        "fit {d1}x{d2} from {n} comparisons: lambda {lambda:.6}, {} iterations, converged {}, rank {}",
        result.iterations, result.converged, result.rank_estimate
    );
    Ok(run)
}

// ---------------------------------------------------------------- experiment

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub spec: PathBuf,
    /// Replaces the seed inside the spec file.
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
}

pub fn experiment_defaults() -> Value {
    json!({ "seed": null, "out_dir": default_out_dir() })
}

pub fn load_spec(path: &Path, bytes: &[u8]) -> CliResult<ExperimentSpec> {
    let value: Value = serde_json::from_slice(bytes)
        .map_err(|e| CliError::input(format!("{}: invalid JSON: {e}", path.display())))?;
    let spec: ExperimentSpec = from_value(value, "experiment spec")?;
    spec.validate()
        .map_err(|v| CliError::input(format!("experiment spec: {}: {}", v.pointer, v.message)))?;
    Ok(spec)
}

pub const RESULTS_HEADER: &str = "d,n,N_rescaled,mean_sq_fro_err,stderr,mean_rank,mean_iters";

pub fn results_csv(cells: &[ExperimentCell]) -> Vec<u8> {
    let mut out = String::from(RESULTS_HEADER);
    out.push('\n');
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            c.d, c.n, c.n_rescaled, c.mean_sq_fro_err, c.stderr, c.mean_rank, c.mean_iters
        ));
    }
    out.into_bytes()
}

fn series_by_dim(cells: &[ExperimentCell], x: impl Fn(&ExperimentCell) -> f64) -> Vec<Series> {
    let mut dims: Vec<usize> = cells.iter().map(|c| c.d).collect();
    dims.dedup();
    dims.sort_unstable();
    dims.dedup();
    dims.into_iter()
        .map(|d| Series {
            label: format!("d = {d}"),
            points: cells
                .iter()
                .filter(|c| c.d == d)
                .map(|c| (x(c), c.mean_sq_fro_err))
                .collect(),
        })
        .collect()
}

pub fn experiment(cfg: &ExperimentConfig) -> CliResult<Run> {
    let mut run = Run::new(None);
    let bytes = run.read_input(&cfg.spec)?;
    let mut spec = load_spec(&cfg.spec, &bytes)?;
    if let Some(s) = cfg.seed {
        spec.seed = s;
    }
    run.seed = Some(spec.seed);
    let result = run.timed("experiment", || run_experiment(&spec))?;
    let by_n = series_by_dim(&result.cells, |c| c.n as f64);
    let by_rescaled = series_by_dim(&result.cells, |c| c.n_rescaled);
    let title = format!("rank {}", spec.rank);
    let panel_a = render(&Chart {
        title: &title,
        x_label: "sample size n",
        y_label: "squared Frobenius error",
        x_scale: Scale::Log,
        y_scale: Scale::Log,
        series: &by_n,
    });
    let panel_b = render(&Chart {
        title: &title,
        x_label: "rescaled sample size N = n / (r d ln d)",
        y_label: "squared Frobenius error",
        x_scale: Scale::Linear,
        y_scale: Scale::Linear,
        series: &by_rescaled,
    });
    run.outputs
        .push(("results.csv".into(), results_csv(&result.cells)));
    run.outputs.push(("error_vs_n.svg".into(), panel_a.into_bytes()));
    run.outputs.push(("error_vs_N.svg".into(), panel_b.into_bytes()));
    run.outputs.push(("result.json".into(), json_bytes(&result)));
    let failed: usize = result.cells.iter().map(|c| c.failed_trials).sum();
    run.summary = format!(
        "ran {} cells x {} trials ({failed} failed trials)",
        result.cells.len(),
        spec.trials
    );
    Ok(run)
}

// ---------------------------------------------------------------- verify

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum CheckKind {
    All,
    Rsc,
    Gradient,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifyConfig {
    pub check: CheckKind,
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub trials: usize,
    pub seed: u64,
    /// Noise scale of the gradient check.
    pub gamma: f64,
    pub threshold_multiplier: f64,
    /// Ground truth used to generate the gradient-check noise.
    pub truth_rank: usize,
    pub truth_alpha: f64,
    /// Spikiness of the restricted set.
    pub alpha: f64,
    pub membership_constant: f64,
    pub rsc_rank: usize,
    pub out_dir: PathBuf,
}

pub fn verify_defaults() -> Value {
    json!({
        "check": "all", "d1": 50, "d2": 50, "n": 5000, "trials": 100, "seed": 0,
        "gamma": 1.0, "threshold_multiplier": 1.0, "truth_rank": 2, "truth_alpha": 10.0,
        "alpha": 1.0, "membership_constant": 128.0, "rsc_rank": 1,
        "out_dir": default_out_dir(),
    })
}

pub fn verify(cfg: &VerifyConfig) -> CliResult<Run> {
    let mut run = Run::new(Some(cfg.seed));
    let mut reports: Vec<VerificationReport> = Vec::new();
    if matches!(cfg.check, CheckKind::All | CheckKind::Gradient) {
        let mut check = GradientCheck::new(
            cfg.d1,
            cfg.d2,
            cfg.n,
            cfg.gamma,
            cfg.trials,
            derive_seed(cfg.seed, &[0]),
        );
        check.threshold_multiplier = cfg.threshold_multiplier;
        check.rank = cfg.truth_rank;
        check.spikiness = cfg.truth_alpha;
        reports.push(run.timed("gradient", || verify_gradient_opnorm(&check))?);
    }
    if matches!(cfg.check, CheckKind::All | CheckKind::Rsc) {
        let mut check = RscCheck::new(
            cfg.d1,
            cfg.d2,
            cfg.n,
            cfg.alpha,
            cfg.trials,
            derive_seed(cfg.seed, &[1]),
        );
        check.membership_constant = cfg.membership_constant;
        check.test_rank = cfg.rsc_rank;
        reports.push(run.timed("rsc", || verify_rsc(&check))?);
    }
    let lines: Vec<String> = reports
        .iter()
        .map(|r| {
            let verdict = if r.infeasible {
                "INFEASIBLE"
            } else if r.pass {
                "PASS"
            } else {
                "FAIL"
            };
            let mut line = format!(
                "{}: {verdict} ({} of {} trials failed, allowed rate {:.3e})",
                r.check, r.failures, r.trials, r.allowed_failure_rate
            );
            if let Some(note) = &r.note {
                line.push_str(&format!(": {note}"));
            }
            line
        })
        .collect();
    run.summary = lines.join("\n");
    if let Some(r) = reports.iter().find(|r| r.infeasible) {
        run.verdict = Some(CliError::infeasible(format!("{} could not be set up", r.check)));
    } else if let Some(r) = reports.iter().find(|r| !r.pass) {
        run.verdict = Some(CliError::check_failed(format!("{} failed", r.check)));
    }
    run.outputs
        .push(("verify.json".into(), json_bytes(&json!({ "reports": reports }))));
    Ok(run)
}

/// Parses a replayable config value for `command` and runs it.
pub fn dispatch(command: &str, config: Value) -> CliResult<(Run, PathBuf, Value)> {
    fn go<T: Serialize + serde::de::DeserializeOwned>(
        config: Value,
        out_dir: impl Fn(&T) -> PathBuf,
        f: impl Fn(&T) -> CliResult<Run>,
    ) -> CliResult<(Run, PathBuf, Value)> {
        let cfg: T = from_value(config, "configuration")?;
        let run = f(&cfg)?;
        Ok((
            run,
            out_dir(&cfg),
            serde_json::to_value(&cfg).expect("serializable"),
        ))
    }
    match command {
        "simulate" => go(config, |c: &SimulateConfig| c.out_dir.clone(), simulate),
        "fit" => go(config, |c: &FitConfig| c.out_dir.clone(), fit_cmd),
        "experiment" => go(config, |c: &ExperimentConfig| c.out_dir.clone(), experiment),
        "verify" => go(config, |c: &VerifyConfig| c.out_dir.clone(), verify),
        other => Err(CliError::input(format!("unknown command `{other}`"))),
    }
}

pub fn read_manifest(path: &Path) -> CliResult<crate::manifest::RunManifest> {
    from_value(parse_json(path)?, &path.display().to_string())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lambda_flag_parsing() {
        assert_eq!(
            parse_lambda("theory"),
            Ok(LambdaChoice::Named(NamedLambda::Theory))
        );
        assert_eq!(parse_lambda("0.25"), Ok(LambdaChoice::Value(0.25)));
        assert!(parse_lambda("-1").is_err());
        assert!(parse_lambda("nan").is_err());
        assert!(parse_lambda("inf").is_err());
        let v: LambdaChoice = serde_json::from_value(json!("theory")).unwrap();
        assert_eq!(v, LambdaChoice::Named(NamedLambda::Theory));
        let v: LambdaChoice = serde_json::from_value(json!(2.0)).unwrap();
        assert_eq!(v, LambdaChoice::Value(2.0));
    }

    #[test]
    fn results_csv_has_one_row_per_cell() {
        let cell = ExperimentCell {
            d: 20,
            n: 100,
            n_rescaled: 0.5,
            lambda: 1.0,
            mean_sq_fro_err: 0.25,
            stderr: 0.01,
            mean_rank: 2.0,
            mean_iters: 7.5,
            failed_trials: 0,
            first_failure: None,
            trials: vec![],
        };
        let text = String::from_utf8(results_csv(&[cell.clone(), cell])).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], RESULTS_HEADER);
        assert_eq!(lines[1], "20,100,0.5,0.25,0.01,2,7.5");
        assert_eq!(lines.len(), 3);
    }
}
