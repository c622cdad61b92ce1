//! Ground-truth preference matrices and BTL comparison sampling.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::data::{ComparisonDataset, ComparisonRecord};
use crate::design::inner_unchecked;
use crate::error::{Error, Result};
use crate::loss::logistic;
use crate::matrix::{row_center, PreferenceMatrix};
use crate::seed::{rng_from_seed, SeededRng};

/// Redraws allowed before `generate_ground_truth` gives up on a spec.
pub const MAX_GROUND_TRUTH_RETRIES: usize = 50;

fn default_frobenius_norm() -> f64 {
    1.0
}

/// Parameters of a synthetic low-rank ground truth.
///
/// `spikiness` is the bound `alpha` in `max|theta_kl| <= alpha / sqrt(d1 d2)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruthSpec {
    pub d1: usize,
    pub d2: usize,
    pub rank: usize,
    pub spikiness: f64,
    #[serde(default = "default_frobenius_norm")]
    pub frobenius_norm: f64,
    pub seed: u64,
}

impl GroundTruthSpec {
    pub fn new(d1: usize, d2: usize, rank: usize, spikiness: f64, seed: u64) -> Self {
        GroundTruthSpec {
            d1,
            d2,
            rank,
            spikiness,
            frobenius_norm: 1.0,
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (d1, d2, r) = (self.d1, self.d2, self.rank);
        if d1 == 0 || d2 == 0 {
            return Err(Error::input(format!(
                "dimensions must be positive, got d1={d1}, d2={d2}"
            )));
        }
        if r == 0 || r > d1.min(d2) {
            return Err(Error::input(format!(
                "rank must satisfy 1 <= r <= min(d1, d2) = {}, got r={r}",
                d1.min(d2)
            )));
        }
        if !(self.spikiness.is_finite() && self.spikiness > 0.0) {
            return Err(Error::input(format!(
                "spikiness alpha must be positive, got {}",
                self.spikiness
            )));
        }
        if !(self.frobenius_norm > 0.0 && self.frobenius_norm <= 1.0) {
            return Err(Error::input(format!(
                "frobenius norm target must lie in (0, 1], got {}",
                self.frobenius_norm
            )));
        }
        // Zero row sums confine the row space to a (d2 - 1)-dimensional subspace.
        if r > d2 - 1 {
            return Err(Error::Infeasible(format!(
                "a row-centered {d1}x{d2} matrix has rank at most {}, requested r={r}",
                d2 - 1
            )));
        }
        // max|theta| >= ||theta||_F / sqrt(d1 d2), so alpha below the norm target is unreachable.
        if self.spikiness < self.frobenius_norm {
            return Err(Error::Infeasible(format!(
                "spikiness alpha={} is below the frobenius target {}; \
                 some entry must reach ||theta||_F / sqrt(d1 d2)",
                self.spikiness, self.frobenius_norm
            )));
        }
        Ok(())
    }
}

/// Draws a row-centered rank-`r` matrix with the requested Frobenius norm
/// and spikiness bound.
///
/// Gaussian factors `U (d1 x r)` and `V (d2 x r)` are multiplied, row-centered
/// and rescaled; draws that break the rank or spikiness requirements are
/// redrawn from the same stream up to [`MAX_GROUND_TRUTH_RETRIES`] times.
pub fn generate_ground_truth(spec: &GroundTruthSpec) -> Result<PreferenceMatrix> {
    spec.validate()?;
    let (d1, d2, r) = (spec.d1, spec.d2, spec.rank);
    let linf_bound = spec.spikiness / ((d1 * d2) as f64).sqrt();
    let mut rng = rng_from_seed(spec.seed);
    let mut last_issue = String::new();

    for _ in 0..MAX_GROUND_TRUTH_RETRIES {
        let u: Vec<f64> = (0..d1 * r).map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..d2 * r).map(|_| rng.sample(StandardNormal)).collect();
        let mut prod = vec![0.0; d1 * d2];
        for k in 0..d1 {
            for l in 0..d2 {
                prod[k * d2 + l] = (0..r).map(|s| u[k * r + s] * v[l * r + s]).sum();
            }
        }
        let centered = row_center(&PreferenceMatrix::from_row_major(d1, d2, prod)?);
        let norm = centered.frobenius_norm();
        if norm == 0.0 {
            last_issue = "degenerate draw".into();
            continue;
        }
        let theta = centered.scale(spec.frobenius_norm / norm);

        let sv = theta.singular_values()?;
        let top = sv[0];
        if sv[r - 1] / top <= 1e-8 {
            last_issue = format!("rank deficient draw (sigma_r/sigma_1 = {:e})", sv[r - 1] / top);
            continue;
        }
        if let Some(&next) = sv.get(r) {
            if next / top >= 1e-10 {
                last_issue = format!("excess rank (sigma_(r+1)/sigma_1 = {:e})", next / top);
                continue;
            }
        }
        let peak = theta.max_abs();
        if peak > linf_bound {
            last_issue = format!(
                "spikiness {:.4} exceeds alpha={}",
                peak * ((d1 * d2) as f64).sqrt(),
                spec.spikiness
            );
            continue;
        }
        return Ok(theta);
    }
    Err(Error::Infeasible(format!(
        "no admissible ground truth after {MAX_GROUND_TRUTH_RETRIES} draws; last: {last_issue}"
    )))
}

/// Draws one query: user uniform, ordered distinct item pair uniform.
pub fn draw_query<R: Rng + ?Sized>(rng: &mut R, d1: usize, d2: usize) -> (usize, usize, usize) {
    let k = rng.random_range(0..d1);
    let l = rng.random_range(0..d2);
    let mut j = rng.random_range(0..d2 - 1);
    if j >= l {
        j += 1;
    }
    (k, l, j)
}

/// Draws `n` i.i.d. BTL comparisons from `theta_star`.
///
/// The outcome is 1 with probability `logistic(<theta_star, X>)`.
pub fn sample_comparisons(theta_star: &PreferenceMatrix, n: usize, seed: u64) -> Result<ComparisonDataset> {
    let mut rng = rng_from_seed(seed);
    sample_comparisons_with(theta_star, n, &mut rng)
}

pub fn sample_comparisons_with(
    theta_star: &PreferenceMatrix,
    n: usize,
    rng: &mut SeededRng,
) -> Result<ComparisonDataset> {
    let (d1, d2) = theta_star.shape();
    if d2 < 2 {
        return Err(Error::input(format!(
            "comparisons need at least two items, got d2={d2}"
        )));
    }
    if n == 0 {
        return Err(Error::input("sample size must be at least 1"));
    }
    let mut records = Vec::with_capacity(n);
    for _ in 0..n {
        let (k, l, j) = draw_query(rng, d1, d2);
        let mut rec = ComparisonRecord {
            user: k,
            item_a: l,
            item_b: j,
            outcome: false,
        };
        let p = logistic(inner_unchecked(theta_star, &rec));
        rec.outcome = rng.random::<f64>() < p;
        records.push(rec);
    }
    ComparisonDataset::new(d1, d2, records)
}
