mod common;

use common::*;
use pairrank::metrics::kendall_tau_b;
use pairrank::{kendall_tau_per_user, pairwise_accuracy};
use proptest::prelude::*;

proptest! {
    #[test]
    fn tau_is_bounded_symmetric_and_rank_invariant(
        x in prop::collection::vec(-5i32..5, 2..20),
        seed in any::<u64>(),
    ) {
        use rand::Rng;
        let mut r = rng(seed);
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = x.iter().map(|_| r.random_range(-3..3) as f64).collect();
        if let Some(t) = kendall_tau_b(&x, &y) {
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&t));
            let back = kendall_tau_b(&y, &x).unwrap();
            prop_assert!((t - back).abs() <= 1e-12);
            // A strictly increasing transform of one side changes nothing.
            let warped: Vec<f64> = x.iter().map(|v| v.powi(3) + 2.0 * v).collect();
            prop_assert!((kendall_tau_b(&warped, &y).unwrap() - t).abs() <= 1e-12);
            let flipped: Vec<f64> = x.iter().map(|v| -v).collect();
            prop_assert!((kendall_tau_b(&flipped, &y).unwrap() + t).abs() <= 1e-12);
        }
    }
}

#[test]
fn metrics_reject_mismatched_shapes() {
    let a = random_matrix(&mut rng(1), 3, 4, 1.0);
    let b = random_matrix(&mut rng(2), 4, 3, 1.0);
    assert!(pairwise_accuracy(&a, &b, 10, 0).is_err());
    assert!(kendall_tau_per_user(&a, &b).is_err());
}

#[test]
fn accuracy_tracks_agreement() {
    let star = random_centered(&mut rng(3), 10, 12, 1.0);
    let noisy = &star + &random_centered(&mut rng(4), 10, 12, 0.3);
    let acc = pairwise_accuracy(&noisy, &star, 20_000, 5).unwrap();
    assert!(acc > 0.6 && acc < 1.0, "{acc}");
    let taus = kendall_tau_per_user(&noisy, &star).unwrap();
    assert_eq!(taus.len(), 10);
    assert!(taus.iter().all(|t| t.unwrap() > 0.0));
}
