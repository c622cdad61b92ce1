mod common;

use std::collections::BTreeMap;

use common::*;
use pairrank::optimizer::{fit_with_observer, optimality_residual, StepRule};
use pairrank::sampling::{generate_ground_truth, sample_comparisons, GroundTruthSpec};
use pairrank::{fit, loss_gradient, project_omega, svt, ComparisonDataset, PreferenceMatrix, SolverConfig};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn svt_satisfies_prox_optimality(
        (rows, cols, seed, frac) in (1usize..=8, 1usize..=8, any::<u64>(), 0.0f64..1.2)
    ) {
        let mut r = rng(seed);
        let m = random_matrix(&mut r, rows, cols, 4.0);
        let top = m.operator_norm().unwrap();
        let tau = (frac * top).max(1e-3);
        let z = svt(&m, tau).unwrap();
        prop_assert!(prox_residual(&m, &z, tau) <= 1e-8);
        let zero = svt(&m, top).unwrap();
        prop_assert!(zero.as_slice().iter().all(|&v| v == 0.0));
        let zero = svt(&m, 2.0 * top).unwrap();
        prop_assert!(zero.as_slice().iter().all(|&v| v == 0.0));
    }
}

fn instance(d1: usize, d2: usize, r: usize, n: usize, seed: u64) -> (PreferenceMatrix, ComparisonDataset) {
    let star = generate_ground_truth(&GroundTruthSpec::new(d1, d2, r, 10.0, seed)).unwrap();
    let data = sample_comparisons(&star, n, seed + 1).unwrap();
    (star, data)
}

/// Unregularized MLE by plain gradient descent on grouped counts, centered
/// after every step.
fn mle_oracle(data: &ComparisonDataset) -> Vec<f64> {
    let (d1, d2) = data.dims();
    let s = ((d1 * d2) as f64).sqrt();
    let n = data.len() as f64;
    let mut groups: BTreeMap<(usize, usize, usize), (f64, f64)> = BTreeMap::new();
    for rec in data.records() {
        let e = groups.entry((rec.user, rec.item_a, rec.item_b)).or_default();
        e.0 += 1.0;
        e.1 += rec.y();
    }
    let mut theta = vec![0.0; d1 * d2];
    let step = 1.0 / (0.5 * s * s);
    for _ in 0..200_000 {
        let mut g = vec![0.0; d1 * d2];
        for (&(k, l, j), &(count, wins)) in &groups {
            let z = s * (theta[k * d2 + l] - theta[k * d2 + j]);
            let c = (count / (1.0 + (-z).exp()) - wins) / n;
            g[k * d2 + l] += c * s;
            g[k * d2 + j] -= c * s;
        }
        let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        for (t, gv) in theta.iter_mut().zip(&g) {
            *t -= step * gv;
        }
        for k in 0..d1 {
            let mean = theta[k * d2..(k + 1) * d2].iter().sum::<f64>() / d2 as f64;
            theta[k * d2..(k + 1) * d2].iter_mut().for_each(|v| *v -= mean);
        }
        if norm < 1e-13 {
            break;
        }
    }
    theta
}

#[test]
fn unregularized_fit_matches_gradient_descent_mle() {
    let (_, data) = instance(3, 3, 1, 20_000, 41);
    let oracle = mle_oracle(&data);
    // The default stopping rule leaves the iterate about sqrt(rel_tol) away
    // from the optimum, so the comparison runs to a tight tolerance.
    let mut config = SolverConfig::new(0.0);
    config.rel_tol = 1e-12;
    let result = fit(&data, &config, None).unwrap();
    assert!(result.converged);
    let diff: f64 = result
        .theta_hat
        .as_slice()
        .iter()
        .zip(&oracle)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    assert!(diff <= 1e-4, "distance to oracle {diff}");
}

#[test]
fn large_lambda_returns_zero() {
    let (_, data) = instance(10, 8, 2, 3_000, 3);
    let g0 = loss_gradient(&PreferenceMatrix::zeros(10, 8).unwrap(), &data).unwrap();
    let lambda = 2.0 * g0.operator_norm().unwrap();
    let result = fit(&data, &SolverConfig::new(lambda), None).unwrap();
    assert!(result.theta_hat.max_abs() <= 1e-8);
    assert_eq!(result.rank_estimate, 0);
}

#[test]
fn objective_trace_never_increases() {
    for (seed, mult) in [(5u64, 0.01), (6, 0.05), (7, 0.3)] {
        let (_, data) = instance(15, 12, 2, 4_000, seed);
        let lambda = mult * pairrank::theory::lambda_theory(15, 12, 4_000).unwrap();
        let result = fit(&data, &SolverConfig::new(lambda), None).unwrap();
        assert_eq!(result.objective_trace.len(), result.iterations + 1);
        for w in result.objective_trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-10, "{} -> {}", w[0], w[1]);
        }
    }
}

#[test]
fn iterates_stay_centered_without_correction() {
    let (_, data) = instance(20, 25, 2, 8_000, 9);
    let d2 = 25.0;
    let mut worst: f64 = 0.0;
    let mut seen = 0;
    let config = SolverConfig::new(0.02);
    fit_with_observer(&data, &config, None, |it| {
        worst = worst
            .max(it.prox_output.max_abs_row_sum())
            .max(it.theta.max_abs_row_sum());
        seen += 1;
    })
    .unwrap();
    assert!(seen > 1);
    assert!(worst <= 1e-8 * d2, "row sum drift {worst}");
}

#[test]
fn tight_fit_certifies_optimality() {
    let (_, data) = instance(12, 10, 2, 6_000, 21);
    let lambda = 0.02;
    let mut config = SolverConfig::new(lambda);
    config.rel_tol = 1e-14;
    config.max_iters = 20_000;
    let result = fit(&data, &config, None).unwrap();
    let grad = loss_gradient(&result.theta_hat, &data).unwrap();
    let res = optimality_residual(&result.theta_hat, &grad, lambda).unwrap();
    assert!(res <= 1e-6 * (1.0 + grad.frobenius_norm()), "residual {res}");
    assert!(result.rank_estimate >= 1);
}

#[test]
fn zero_is_certified_when_lambda_dominates() {
    let (_, data) = instance(6, 6, 1, 2_000, 23);
    let zero = PreferenceMatrix::zeros(6, 6).unwrap();
    let g = loss_gradient(&zero, &data).unwrap();
    let op = g.operator_norm().unwrap();
    assert!(optimality_residual(&zero, &g, op * 1.01).unwrap() <= 1e-12);
    assert!(optimality_residual(&zero, &g, op * 0.5).unwrap() > 0.0);
}

#[test]
fn rank_capped_svd_gives_the_same_estimate() {
    let (_, data) = instance(30, 30, 2, 10_000, 31);
    let lambda = 0.05;
    let plain = fit(&data, &SolverConfig::new(lambda), None).unwrap();
    let mut capped = SolverConfig::new(lambda);
    capped.svd_rank_cap = Some(6);
    let capped = fit(&data, &capped, None).unwrap();
    let gap = (&plain.theta_hat - &capped.theta_hat).frobenius_norm();
    assert!(
        gap <= 1e-8 * (1.0 + plain.theta_hat.frobenius_norm()),
        "gap {gap}"
    );
    assert_eq!(plain.iterations, capped.iterations);
}

#[test]
fn box_constraint_is_respected() {
    let (_, data) = instance(10, 10, 2, 5_000, 33);
    let mut config = SolverConfig::new(0.01);
    config.enforce_linf = Some(0.05);
    let result = fit(&data, &config, None).unwrap();
    assert!(result.theta_hat.max_abs() <= 0.05 + 1e-9);
    assert!(result.theta_hat.max_abs_row_sum() <= 1e-9 * 10.0);
}

#[test]
fn fixed_step_rule_reaches_the_backtracking_solution() {
    let (_, data) = instance(8, 8, 1, 4_000, 35);
    let mut a = SolverConfig::new(0.03);
    a.rel_tol = 1e-13;
    a.max_iters = 20_000;
    let mut b = a.clone();
    b.step_rule = StepRule::Fixed { step: 0.5 };
    let ra = fit(&data, &a, None).unwrap();
    let rb = fit(&data, &b, None).unwrap();
    assert!((&ra.theta_hat - &rb.theta_hat).frobenius_norm() <= 1e-5);
}

#[test]
fn projection_examples() {
    let m = PreferenceMatrix::from_rows(&[vec![3.0, -3.0]]).unwrap();
    let p = project_omega(&m, Some(1.0)).unwrap();
    assert_eq!(p.as_slice(), &[1.0, -1.0]);
    let c = pairrank::row_center(&random_matrix(&mut rng(1), 4, 5, 2.0));
    let same = project_omega(&c, None).unwrap();
    for (a, b) in c.as_slice().iter().zip(same.as_slice()) {
        assert!((a - b).abs() <= 1e-15);
    }
}

#[test]
fn warm_start_must_be_centered() {
    let (_, data) = instance(4, 4, 1, 500, 37);
    let bad = PreferenceMatrix::from_row_major(4, 4, vec![1.0; 16]).unwrap();
    assert!(fit(&data, &SolverConfig::new(0.1), Some(&bad)).is_err());
    let good = pairrank::row_center(&random_matrix(&mut rng(2), 4, 4, 0.2));
    assert!(fit(&data, &SolverConfig::new(0.1), Some(&good)).is_ok());
}
