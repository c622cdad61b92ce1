//! Ranking-quality metrics between an estimate and the ground truth.

use crate::error::{Error, Result};
use crate::matrix::PreferenceMatrix;
use crate::sampling::draw_query;
use crate::seed::rng_from_seed;

/// Score differences below this are treated as ties.
pub const TIE_TOL: f64 = 1e-12;

/// Fraction of random `(user, item, item)` triples on which the estimate orders
/// the two items the same way as the truth. A tie on either side counts one half.
pub fn pairwise_accuracy(
    theta_hat: &PreferenceMatrix,
    theta_star: &PreferenceMatrix,
    trials: usize,
    seed: u64,
) -> Result<f64> {
    if theta_hat.shape() != theta_star.shape() {
        return Err(Error::dims(theta_star.shape(), theta_hat.shape()));
    }
    let (d1, d2) = theta_star.shape();
    if d2 < 2 {
        return Err(Error::input("need at least two items"));
    }
    if trials == 0 {
        return Err(Error::input("trials must be at least 1"));
    }
    let mut rng = rng_from_seed(seed);
    let mut score = 0.0;
    for _ in 0..trials {
        let (k, l, j) = draw_query(&mut rng, d1, d2);
        let dh = theta_hat.get(k, l) - theta_hat.get(k, j);
        let ds = theta_star.get(k, l) - theta_star.get(k, j);
        score += if dh.abs() < TIE_TOL || ds.abs() < TIE_TOL {
            0.5
        } else if (dh > 0.0) == (ds > 0.0) {
            1.0
        } else {
            0.0
        };
    }
    Ok(score / trials as f64)
}

/// Kendall tau-b between two score vectors, `None` when either is constant.
pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
    debug_assert_eq!(x.len(), y.len());
    let (mut concordant, mut discordant) = (0i64, 0i64);
    let (mut tied_x, mut tied_y) = (0i64, 0i64);
    for i in 0..x.len() {
        for j in i + 1..x.len() {
            let sx = sign(x[i] - x[j]);
            let sy = sign(y[i] - y[j]);
            match (sx, sy) {
                (0, 0) => {}
                (0, _) => tied_x += 1,
                (_, 0) => tied_y += 1,
                _ if sx == sy => concordant += 1,
                _ => discordant += 1,
            }
        }
    }
    let base = (concordant + discordant) as f64;
    let denom = ((base + tied_x as f64) * (base + tied_y as f64)).sqrt();
    if denom == 0.0 {
        return None;
    }
    Some((concordant - discordant) as f64 / denom)
}

fn sign(v: f64) -> i8 {
    if v > 0.0 {
        1
    } else if v < 0.0 {
        -1
    } else {
        0
    }
}

/// Kendall tau-b per user row; `None` where a row is constant.
pub fn kendall_tau_per_user(
    theta_hat: &PreferenceMatrix,
    theta_star: &PreferenceMatrix,
) -> Result<Vec<Option<f64>>> {
    if theta_hat.shape() != theta_star.shape() {
        return Err(Error::dims(theta_star.shape(), theta_hat.shape()));
    }
    Ok((0..theta_star.rows())
        .map(|k| kendall_tau_b(theta_hat.row(k), theta_star.row(k)))
        .collect())
}
