//! Error-versus-sample-size simulation over a grid of problem sizes.
//!
//! Each cell `(d, n)` of the grid runs independent trials: draw a fresh
//! `d x d` ground truth, sample `n` comparisons, fit, and record the squared
//! Frobenius error. Seeds are derived from `(seed, d, n, trial)` so the table
//! does not depend on scheduling.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optimizer::{fit, SolverConfig, StepRule};
use crate::sampling::{generate_ground_truth, sample_comparisons, GroundTruthSpec};
use crate::seed::derive_seed;
use crate::theory::lambda_theory;

/// A cell may lose at most this fraction of its trials to solver failures.
pub const MAX_FAILED_FRACTION: f64 = 0.2;

/// Multiplier on the theory lambda used by the reference simulations. At
/// simulation sizes the theory constant makes zero the exact solution.
pub const BASELINE_MULTIPLIER: f64 = 0.0125;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SampleGrid {
    /// Raw sample sizes.
    Raw(Vec<usize>),
    /// Rescaled sizes `N`; the sample size is `ceil(N r d ln d)`.
    Rescaled(Vec<f64>),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LambdaRule {
    /// `32 sqrt(d ln d / n)`.
    #[default]
    Theory,
    Fixed {
        value: f64,
    },
    /// `multiplier * 32 sqrt(d ln d / n)`.
    Scaled {
        multiplier: f64,
    },
}

impl LambdaRule {
    pub fn resolve(&self, d1: usize, d2: usize, n: usize) -> Result<f64> {
        match *self {
            LambdaRule::Theory => lambda_theory(d1, d2, n),
            LambdaRule::Fixed { value } => Ok(value),
            LambdaRule::Scaled { multiplier } => Ok(multiplier * lambda_theory(d1, d2, n)?),
        }
    }
}

/// Optional replacements for the solver defaults.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverOverrides {
    #[serde(default)]
    pub max_iters: Option<usize>,
    #[serde(default)]
    pub rel_tol: Option<f64>,
    #[serde(default)]
    pub step_rule: Option<StepRule>,
    #[serde(default)]
    pub enforce_linf: Option<f64>,
    #[serde(default)]
    pub svd_rank_cap: Option<usize>,
}

impl SolverOverrides {
    pub fn apply(&self, lambda: f64) -> SolverConfig {
        let mut cfg = SolverConfig::new(lambda);
        if let Some(v) = self.max_iters {
            cfg.max_iters = v;
        }
        if let Some(v) = self.rel_tol {
            cfg.rel_tol = v;
        }
        if let Some(v) = self.step_rule {
            cfg.step_rule = v;
        }
        cfg.enforce_linf = self.enforce_linf;
        cfg.svd_rank_cap = self.svd_rank_cap;
        cfg
    }
}

fn default_alpha() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    /// Square problem sizes `d1 = d2 = d`.
    pub dims: Vec<usize>,
    pub rank: usize,
    pub n_grid: SampleGrid,
    pub trials: usize,
    /// Spikiness bound handed to the ground-truth generator.
    #[serde(default = "default_alpha")]
    pub alpha: f64,
    #[serde(default)]
    pub lambda_rule: LambdaRule,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOverrides,
}

/// A semantic problem with a spec, located by JSON pointer.
#[derive(Debug, Clone, PartialEq)]
pub struct SpecViolation {
    pub pointer: String,
    pub message: String,
}

impl std::fmt::Display for SpecViolation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.pointer, self.message)
    }
}

fn violation(pointer: impl Into<String>, message: impl Into<String>) -> SpecViolation {
    SpecViolation {
        pointer: pointer.into(),
        message: message.into(),
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> std::result::Result<(), SpecViolation> {
        if self.dims.is_empty() {
            return Err(violation("/dims", "must list at least one dimension"));
        }
        if self.rank == 0 {
            return Err(violation("/rank", "must be positive"));
        }
        for (i, &d) in self.dims.iter().enumerate() {
            if d < 2 || self.rank > d - 1 {
                return Err(violation(
                    format!("/dims/{i}"),
                    format!("d={d} cannot hold a centered rank-{} matrix", self.rank),
                ));
            }
        }
        match &self.n_grid {
            SampleGrid::Raw(ns) => {
                if ns.is_empty() {
                    return Err(violation("/n_grid/raw", "must not be empty"));
                }
                if let Some(i) = ns.iter().position(|&n| n == 0) {
                    return Err(violation(format!("/n_grid/raw/{i}"), "must be positive"));
                }
            }
            SampleGrid::Rescaled(ns) => {
                if ns.is_empty() {
                    return Err(violation("/n_grid/rescaled", "must not be empty"));
                }
                if let Some(i) = ns.iter().position(|&n| !(n.is_finite() && n > 0.0)) {
                    return Err(violation(format!("/n_grid/rescaled/{i}"), "must be positive"));
                }
            }
        }
        if self.trials == 0 {
            return Err(violation("/trials", "must be at least 1"));
        }
        if !(self.alpha.is_finite() && self.alpha > 0.0) {
            return Err(violation("/alpha", "must be positive"));
        }
        match self.lambda_rule {
            LambdaRule::Fixed { value } if !(value.is_finite() && value >= 0.0) => {
                return Err(violation("/lambda_rule/value", "must be nonnegative"));
            }
            LambdaRule::Scaled { multiplier } if !(multiplier.is_finite() && multiplier >= 0.0) => {
                return Err(violation("/lambda_rule/multiplier", "must be nonnegative"));
            }
            _ => {}
        }
        self.solver
            .apply(0.0)
            .validate()
            .map_err(|e| violation("/solver", e.to_string()))
    }

    /// Sample sizes for dimension `d`, in grid order.
    pub fn sample_sizes(&self, d: usize) -> Vec<usize> {
        match &self.n_grid {
            SampleGrid::Raw(ns) => ns.clone(),
            SampleGrid::Rescaled(ns) => ns
                .iter()
                .map(|&big_n| (big_n * rescale_factor(self.rank, d)).ceil() as usize)
                .collect(),
        }
    }

    /// All `(d, n)` cells, dimension-major.
    pub fn cells(&self) -> Vec<(usize, usize)> {
        self.dims
            .iter()
            .flat_map(|&d| self.sample_sizes(d).into_iter().map(move |n| (d, n)))
            .collect()
    }
}

/// `r d ln d`, the sample size corresponding to rescaled size 1.
pub fn rescale_factor(rank: usize, d: usize) -> f64 {
    let d = d as f64;
    rank as f64 * d * d.ln()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: usize,
    pub sq_fro_error: f64,
    pub rank_estimate: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentCell {
    pub d: usize,
    pub n: usize,
    /// `n / (r d ln d)`.
    pub n_rescaled: f64,
    pub lambda: f64,
    pub mean_sq_fro_err: f64,
    /// Standard error of the mean over completed trials.
    pub stderr: f64,
    pub mean_rank: f64,
    pub mean_iters: f64,
    pub failed_trials: usize,
    pub first_failure: Option<String>,
    pub trials: Vec<TrialRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub rank: usize,
    pub cells: Vec<ExperimentCell>,
}

impl ExperimentResult {
    pub fn cell(&self, d: usize, n: usize) -> Option<&ExperimentCell> {
        self.cells.iter().find(|c| c.d == d && c.n == n)
    }

    /// Cells for one dimension, in grid order.
    pub fn series(&self, d: usize) -> Vec<&ExperimentCell> {
        self.cells.iter().filter(|c| c.d == d).collect()
    }
}

/// Mean and standard error of the mean (sample standard deviation over `sqrt(len)`).
pub fn mean_and_stderr(values: &[f64]) -> (f64, f64) {
    let len = values.len() as f64;
    let mean = values.iter().sum::<f64>() / len;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (len - 1.0);
    (mean, (var / len).sqrt())
}

fn run_trial(spec: &ExperimentSpec, d: usize, n: usize, trial: usize) -> Result<TrialRecord> {
    let seed = derive_seed(spec.seed, &[d as u64, n as u64, trial as u64]);
    let truth_spec = GroundTruthSpec::new(d, d, spec.rank, spec.alpha, derive_seed(seed, &[0]));
    let theta_star = generate_ground_truth(&truth_spec)?;
    let data = sample_comparisons(&theta_star, n, derive_seed(seed, &[1]))?;
    let lambda = spec.lambda_rule.resolve(d, d, n)?;
    let result = fit(&data, &spec.solver.apply(lambda), None)?;
    let err = &result.theta_hat - &theta_star;
    Ok(TrialRecord {
        trial,
        sq_fro_error: err.frobenius_norm().powi(2),
        rank_estimate: result.rank_estimate,
        iterations: result.iterations,
        converged: result.converged,
    })
}

/// Runs every `(d, n, trial)` of `spec` and aggregates per cell.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<ExperimentResult> {
    spec.validate().map_err(|v| Error::input(v.to_string()))?;
    let cells = spec.cells();
    let jobs: Vec<(usize, usize, usize)> = cells
        .iter()
        .flat_map(|&(d, n)| (0..spec.trials).map(move |t| (d, n, t)))
        .collect();
    let outcomes: Vec<Result<TrialRecord>> = jobs
        .par_iter()
        .map(|&(d, n, t)| run_trial(spec, d, n, t))
        .collect();

    let mut out = Vec::with_capacity(cells.len());
    for (idx, &(d, n)) in cells.iter().enumerate() {
        let chunk = &outcomes[idx * spec.trials..(idx + 1) * spec.trials];
        let mut trials = Vec::new();
        let mut failures = Vec::new();
        for outcome in chunk {
            match outcome {
                Ok(rec) => trials.push(rec.clone()),
                Err(e) => failures.push(e.to_string()),
            }
        }
        if failures.len() as f64 > MAX_FAILED_FRACTION * spec.trials as f64 || trials.is_empty() {
            return Err(Error::Numerical(format!(
                "cell d={d}, n={n}: {} of {} trials failed; first failure: {}",
                failures.len(),
                spec.trials,
                failures[0]
            )));
        }
        let errs: Vec<f64> = trials.iter().map(|t| t.sq_fro_error).collect();
        let (mean, stderr) = mean_and_stderr(&errs);
        let count = trials.len() as f64;
        out.push(ExperimentCell {
            d,
            n,
            n_rescaled: n as f64 / rescale_factor(spec.rank, d),
            lambda: spec.lambda_rule.resolve(d, d, n)?,
            mean_sq_fro_err: mean,
            stderr,
            mean_rank: trials.iter().map(|t| t.rank_estimate as f64).sum::<f64>() / count,
            mean_iters: trials.iter().map(|t| t.iterations as f64).sum::<f64>() / count,
            failed_trials: failures.len(),
            first_failure: failures.into_iter().next(),
            trials,
        });
    }
    Ok(ExperimentResult {
        rank: spec.rank,
        cells: out,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy() -> ExperimentSpec {
        ExperimentSpec {
            dims: vec![8],
            rank: 1,
            n_grid: SampleGrid::Raw(vec![200, 800]),
            trials: 2,
            alpha: 10.0,
            lambda_rule: LambdaRule::Scaled { multiplier: 0.05 },
            seed: 3,
            solver: SolverOverrides::default(),
        }
    }

    #[test]
    fn rescaled_grid_rounds_up() {
        let spec = ExperimentSpec {
            n_grid: SampleGrid::Rescaled(vec![1.0, 2.5]),
            rank: 2,
            dims: vec![10],
            ..toy()
        };
        let base = 2.0 * 10.0 * 10f64.ln();
        assert_eq!(
            spec.sample_sizes(10),
            vec![base.ceil() as usize, (2.5 * base).ceil() as usize]
        );
    }

    #[test]
    fn validation_points_at_field() {
        let bad = ExperimentSpec { trials: 0, ..toy() };
        assert_eq!(bad.validate().unwrap_err().pointer, "/trials");
        let bad = ExperimentSpec {
            n_grid: SampleGrid::Raw(vec![]),
            ..toy()
        };
        assert_eq!(bad.validate().unwrap_err().pointer, "/n_grid/raw");
        let bad = ExperimentSpec {
            dims: vec![8, 1],
            ..toy()
        };
        assert_eq!(bad.validate().unwrap_err().pointer, "/dims/1");
        let bad = ExperimentSpec {
            lambda_rule: LambdaRule::Fixed { value: -1.0 },
            ..toy()
        };
        assert_eq!(bad.validate().unwrap_err().pointer, "/lambda_rule/value");
    }

    #[test]
    fn deterministic_and_complete() {
        let a = run_experiment(&toy()).unwrap();
        let b = run_experiment(&toy()).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.cells.len(), 2);
        assert!(a.cells.iter().all(|c| c.trials.len() == 2 && c.stderr >= 0.0));
    }

    #[test]
    fn infeasible_alpha_fails_cells() {
        let spec = ExperimentSpec { alpha: 0.5, ..toy() };
        assert!(run_experiment(&spec).is_err());
    }

    #[test]
    fn stderr_of_single_value_is_zero() {
        assert_eq!(mean_and_stderr(&[3.0]), (3.0, 0.0));
        let (m, s) = mean_and_stderr(&[1.0, 3.0]);
        assert_eq!(m, 2.0);
        assert!((s - 1.0).abs() < 1e-15);
    }
}
