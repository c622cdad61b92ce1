mod common;

use common::spearman;
use pairrank::experiments::{mean_and_stderr, BASELINE_MULTIPLIER};
use pairrank::{run_experiment, ExperimentSpec, LambdaRule, SampleGrid};

fn spec(dims: Vec<usize>, grid: Vec<f64>, trials: usize, rule: LambdaRule) -> ExperimentSpec {
    ExperimentSpec {
        dims,
        rank: 2,
        n_grid: SampleGrid::Rescaled(grid),
        trials,
        alpha: 10.0,
        lambda_rule: rule,
        seed: 2024,
        solver: Default::default(),
    }
}

#[test]
fn cell_aggregates_match_an_independent_pass() {
    let result = run_experiment(&spec(
        vec![15, 20],
        vec![4.0, 8.0],
        4,
        LambdaRule::Scaled {
            multiplier: BASELINE_MULTIPLIER,
        },
    ))
    .unwrap();
    assert_eq!(result.cells.len(), 4);
    for cell in &result.cells {
        let errs: Vec<f64> = cell.trials.iter().map(|t| t.sq_fro_error).collect();
        let m = errs.len() as f64;
        let mean = errs.iter().sum::<f64>() / m;
        let sd = (errs.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt();
        assert!((cell.mean_sq_fro_err - mean).abs() <= 1e-12);
        assert!((cell.stderr - sd / m.sqrt()).abs() <= 1e-12);
        let ranks = cell.trials.iter().map(|t| t.rank_estimate as f64).sum::<f64>() / m;
        let iters = cell.trials.iter().map(|t| t.iterations as f64).sum::<f64>() / m;
        assert!((cell.mean_rank - ranks).abs() <= 1e-12);
        assert!((cell.mean_iters - iters).abs() <= 1e-12);
        assert_eq!(cell.failed_trials, 0);
    }
    assert_eq!(mean_and_stderr(&[2.0]), (2.0, 0.0));
}

#[test]
fn error_falls_with_sample_size_in_the_baseline() {
    let grid = vec![4.0, 8.0, 16.0, 32.0, 64.0];
    let result = run_experiment(&spec(
        vec![60],
        grid.clone(),
        5,
        LambdaRule::Scaled {
            multiplier: BASELINE_MULTIPLIER,
        },
    ))
    .unwrap();
    let ns: Vec<f64> = result.cells.iter().map(|c| c.n as f64).collect();
    let errs: Vec<f64> = result.cells.iter().map(|c| c.mean_sq_fro_err).collect();
    let rho = spearman(&ns, &errs);
    assert!(rho <= -0.9, "spearman {rho}, errors {errs:?}");
    let first = errs[0];
    let last = *errs.last().unwrap();
    assert!(last < first);
}

#[test]
fn theory_lambda_returns_zero_at_simulation_sizes() {
    // The regime the reference multiplier exists for.
    let result = run_experiment(&spec(vec![30], vec![8.0, 32.0], 2, LambdaRule::Theory)).unwrap();
    for cell in &result.cells {
        assert!((cell.mean_sq_fro_err - 1.0).abs() <= 1e-12);
        assert_eq!(cell.mean_rank, 0.0);
    }
}

#[test]
fn rescaled_grid_rounds_up() {
    let s = spec(vec![40], vec![8.0], 1, LambdaRule::Theory);
    let n = s.sample_sizes(40)[0];
    let exact = 8.0 * 2.0 * 40.0 * 40f64.ln();
    assert_eq!(n, exact.ceil() as usize);
}

#[test]
fn reruns_are_identical() {
    let s = spec(vec![12], vec![8.0], 1, LambdaRule::Scaled { multiplier: 0.05 });
    assert_eq!(run_experiment(&s).unwrap(), run_experiment(&s).unwrap());
}

#[test]
fn spec_round_trips_through_json() {
    let s = spec(
        vec![40, 60],
        vec![8.0, 16.0],
        3,
        LambdaRule::Scaled { multiplier: 0.5 },
    );
    let text = serde_json::to_string(&s).unwrap();
    let back: ExperimentSpec = serde_json::from_str(&text).unwrap();
    assert_eq!(s, back);
}
