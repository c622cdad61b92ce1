//! Monte Carlo checks of the concentration events behind the error bound.
//!
//! Two events are checked:
//!
//! * restricted strong convexity: for `theta` in the restricted set
//!   `A = { centered, |theta|_inf <= 2 alpha / sqrt(d1 d2),
//!          ||theta||_F^2 >= C alpha sqrt(d ln d / n) ||theta||_* }` (C = 128),
//!   the empirical quadratic form `(1/n) sum <theta, X_i>^2` is at least
//!   `||theta||_F^2 / 3`;
//! * the noise-weighted design sum `(1/n) sum xi_i X_i` stays below
//!   `8 gamma sqrt(d ln d / n)` in operator norm.
//!
//! Sampling only spot-checks the events; the first one quantifies over all of
//! `A` and Monte Carlo draws a handful of low-rank members.

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::ComparisonRecord;
use crate::design::{accumulate_unchecked, inner_unchecked};
use crate::error::{Error, Result};
use crate::linalg::operator_norm_power;
use crate::loss::logistic;
use crate::matrix::{row_center, PreferenceMatrix};
use crate::sampling::{draw_query, generate_ground_truth, sample_comparisons, GroundTruthSpec};
use crate::seed::{derive_seed, rng_from_seed};
use crate::theory::{gradient_opnorm_threshold, sample_size_ceiling};

/// Candidate draws per trial before the restricted set is declared out of reach.
pub const MEMBERSHIP_RETRIES: usize = 1000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationReport {
    pub check: String,
    pub trials: usize,
    pub failures: usize,
    /// Smallest slack observed; negative on a violated trial.
    pub worst_margin: f64,
    pub nominal_probability_bound: f64,
    /// Largest failure rate accepted: nominal bound plus three binomial standard errors.
    pub allowed_failure_rate: f64,
    pub pass: bool,
    /// The check could not be set up (e.g. the restricted set is empty).
    pub infeasible: bool,
    pub note: Option<String>,
}

impl VerificationReport {
    fn tally(check: &str, margins: &[f64], nominal: f64, note: Option<String>) -> VerificationReport {
        let trials = margins.len();
        let failures = margins.iter().filter(|&&m| m < 0.0).count();
        let allowed = allowed_failure_rate(nominal, trials);
        VerificationReport {
            check: check.to_string(),
            trials,
            failures,
            worst_margin: margins.iter().copied().fold(f64::INFINITY, f64::min),
            nominal_probability_bound: nominal,
            allowed_failure_rate: allowed,
            pass: (failures as f64 / trials as f64) <= allowed,
            infeasible: false,
            note,
        }
    }

    fn infeasible(check: &str, trials: usize, nominal: f64, why: String) -> VerificationReport {
        VerificationReport {
            check: check.to_string(),
            trials,
            failures: 0,
            worst_margin: f64::NAN,
            nominal_probability_bound: nominal,
            allowed_failure_rate: allowed_failure_rate(nominal, trials),
            pass: false,
            infeasible: true,
            note: Some(why),
        }
    }
}

/// `p + 3 sqrt(p (1 - p) / trials)`.
pub fn allowed_failure_rate(p: f64, trials: usize) -> f64 {
    p + 3.0 * (p * (1.0 - p) / trials as f64).sqrt()
}

fn default_membership_constant() -> f64 {
    128.0
}

fn default_test_rank() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RscCheck {
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub spikiness: f64,
    pub trials: usize,
    pub seed: u64,
    /// The constant `C` in the Frobenius-versus-nuclear condition defining `A`.
    #[serde(default = "default_membership_constant")]
    pub membership_constant: f64,
    /// Rank of the sampled test matrices.
    #[serde(default = "default_test_rank")]
    pub test_rank: usize,
}

impl RscCheck {
    pub fn new(d1: usize, d2: usize, n: usize, spikiness: f64, trials: usize, seed: u64) -> Self {
        RscCheck {
            d1,
            d2,
            n,
            spikiness,
            trials,
            seed,
            membership_constant: default_membership_constant(),
            test_rank: default_test_rank(),
        }
    }

    fn d(&self) -> f64 {
        (self.d1 + self.d2) as f64 / 2.0
    }

    /// Entrywise bound `2 alpha / sqrt(d1 d2)` on members of `A`.
    pub fn linf_radius(&self) -> f64 {
        2.0 * self.spikiness / ((self.d1 * self.d2) as f64).sqrt()
    }

    /// `C alpha sqrt(d ln d / n)`; members satisfy `||theta||_F^2 >= this * ||theta||_*`.
    pub fn nuclear_coefficient(&self) -> f64 {
        let d = self.d();
        self.membership_constant * self.spikiness * (d * d.ln() / self.n as f64).sqrt()
    }

    /// Checks membership in the restricted set.
    pub fn contains(&self, theta: &PreferenceMatrix) -> Result<bool> {
        let fro = theta.frobenius_norm();
        Ok(fro > 0.0
            && theta.max_abs_row_sum() <= 1e-9 * self.d2 as f64
            && theta.max_abs() <= self.linf_radius() * (1.0 + 1e-12)
            && fro * fro >= self.nuclear_coefficient() * theta.nuclear_norm()?)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if self.d1 == 0 || self.d2 < 2 || self.d() < 2.0 {
            return Err(Error::input(format!(
                "need d1 >= 1, d2 >= 2 and (d1 + d2)/2 >= 2, got {}x{}",
                self.d1, self.d2
            )));
        }
        if self.n == 0 {
            return Err(Error::input("sample size must be at least 1"));
        }
        if !(self.spikiness.is_finite() && self.spikiness > 0.0) {
            return Err(Error::input("spikiness must be positive"));
        }
        if !(self.membership_constant.is_finite() && self.membership_constant >= 0.0) {
            return Err(Error::input("membership constant must be nonnegative"));
        }
        if self.test_rank == 0 || self.test_rank > self.d1.min(self.d2 - 1) {
            return Err(Error::input(format!(
                "test rank must lie in 1..={}",
                self.d1.min(self.d2 - 1)
            )));
        }
        let ceiling = sample_size_ceiling(self.d1, self.d2);
        if self.n as f64 >= ceiling {
            return Err(Error::input(format!(
                "sample size n={} is outside the regime n < d^2 ln d = {ceiling:.1}",
                self.n
            )));
        }
        Ok(())
    }
}

const RSC_NAME: &str = "restricted_strong_convexity";

/// Nominal failure probability `2 d^(-2^18)` of the curvature event.
fn rsc_nominal(d: f64) -> f64 {
    2.0 * (-(2f64.powi(18)) * d.ln()).exp()
}

/// Checks `(1/n) sum <theta, X_i>^2 >= ||theta||_F^2 / 3` on sampled members of
/// the restricted set, each against a fresh design sample.
pub fn verify_rsc(check: &RscCheck) -> Result<VerificationReport> {
    check.validate()?;
    let nominal = rsc_nominal(check.d());

    // ||theta||_F <= ||theta||_* forces ||theta||_F >= coefficient, while the
    // entrywise bound caps ||theta||_F at linf_radius * sqrt(d1 d2).
    let fro_cap = check.linf_radius() * ((check.d1 * check.d2) as f64).sqrt();
    let fro_floor = check.nuclear_coefficient();
    if fro_floor > fro_cap {
        return Ok(VerificationReport::infeasible(
            RSC_NAME,
            check.trials,
            nominal,
            format!(
                "restricted set is empty: members need ||theta||_F >= {fro_floor:.4} \
                 but the entrywise bound caps ||theta||_F at {fro_cap:.4}"
            ),
        ));
    }

    let outcomes: Vec<Result<Option<f64>>> = (0..check.trials)
        .into_par_iter()
        .map(|t| rsc_trial(check, derive_seed(check.seed, &[t as u64])))
        .collect();
    let mut margins = Vec::with_capacity(check.trials);
    for outcome in outcomes {
        match outcome? {
            Some(m) => margins.push(m),
            None => {
                return Ok(VerificationReport::infeasible(
                    RSC_NAME,
                    check.trials,
                    nominal,
                    format!("no member of the restricted set found in {MEMBERSHIP_RETRIES} draws"),
                ))
            }
        }
    }
    Ok(VerificationReport::tally(RSC_NAME, &margins, nominal, None))
}

/// Draws a low-rank member of the restricted set, or `None` if none turns up.
pub fn draw_restricted_member(check: &RscCheck, seed: u64) -> Result<Option<PreferenceMatrix>> {
    let (d1, d2, r) = (check.d1, check.d2, check.test_rank);
    let mut rng = rng_from_seed(seed);
    for _ in 0..MEMBERSHIP_RETRIES {
        let u: Vec<f64> = (0..d1 * r).map(|_| rng.sample(StandardNormal)).collect();
        let v: Vec<f64> = (0..d2 * r).map(|_| rng.sample(StandardNormal)).collect();
        let data = (0..d1 * d2)
            .map(|idx| {
                let (k, l) = (idx / d2, idx % d2);
                (0..r).map(|s| u[k * r + s] * v[l * r + s]).sum()
            })
            .collect();
        let base = row_center(&PreferenceMatrix::from_row_major(d1, d2, data)?);
        let peak = base.max_abs();
        if peak == 0.0 {
            continue;
        }
        let level = rng.random_range(0.25..=1.0);
        let candidate = base.scale(level * check.linf_radius() / peak);
        if check.contains(&candidate)? {
            return Ok(Some(candidate));
        }
    }
    Ok(None)
}

fn rsc_trial(check: &RscCheck, seed: u64) -> Result<Option<f64>> {
    let Some(theta) = draw_restricted_member(check, derive_seed(seed, &[0]))? else {
        return Ok(None);
    };
    let mut rng = rng_from_seed(derive_seed(seed, &[1]));
    let mut quad = 0.0;
    for _ in 0..check.n {
        let (k, l, j) = draw_query(&mut rng, check.d1, check.d2);
        let rec = ComparisonRecord {
            user: k,
            item_a: l,
            item_b: j,
            outcome: false,
        };
        quad += inner_unchecked(&theta, &rec).powi(2);
    }
    quad /= check.n as f64;
    let fro2 = theta.frobenius_norm().powi(2);
    Ok(Some(quad / fro2 - 1.0 / 3.0))
}

fn default_rank() -> usize {
    2
}

fn default_ground_truth_spikiness() -> f64 {
    10.0
}

fn default_multiplier() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GradientCheck {
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    /// Bound on the noise magnitude; noise is `gamma * (logistic(z_i) - y_i)`.
    pub gamma: f64,
    pub trials: usize,
    pub seed: u64,
    /// Rank of the ground truth that generates the outcomes.
    #[serde(default = "default_rank")]
    pub rank: usize,
    #[serde(default = "default_ground_truth_spikiness")]
    pub spikiness: f64,
    /// Scales the threshold; 0 turns every nonzero draw into a violation.
    #[serde(default = "default_multiplier")]
    pub threshold_multiplier: f64,
}

impl GradientCheck {
    pub fn new(d1: usize, d2: usize, n: usize, gamma: f64, trials: usize, seed: u64) -> Self {
        GradientCheck {
            d1,
            d2,
            n,
            gamma,
            trials,
            seed,
            rank: default_rank(),
            spikiness: default_ground_truth_spikiness(),
            threshold_multiplier: default_multiplier(),
        }
    }

    pub fn threshold(&self) -> Result<f64> {
        Ok(self.threshold_multiplier * gradient_opnorm_threshold(self.d1, self.d2, self.n, self.gamma)?)
    }

    fn validate(&self) -> Result<()> {
        if self.trials == 0 {
            return Err(Error::input("trials must be at least 1"));
        }
        if !(self.gamma.is_finite() && self.gamma >= 0.0) {
            return Err(Error::input(format!(
                "gamma must be nonnegative, got {}",
                self.gamma
            )));
        }
        if !(self.threshold_multiplier.is_finite() && self.threshold_multiplier >= 0.0) {
            return Err(Error::input("threshold multiplier must be nonnegative"));
        }
        self.threshold().map(|_| ())
    }
}

const OPNORM_NAME: &str = "gradient_operator_norm";
const POWER_REL_TOL: f64 = 1e-6;
const POWER_MAX_ITERS: usize = 100_000;

/// Checks `||(1/n) sum xi_i X_i||_op <= 8 gamma sqrt(d ln d / n)` with
/// `xi_i = gamma (logistic(<theta*, X_i>) - y_i)`, which is bounded by `gamma`
/// and has zero conditional mean.
pub fn verify_gradient_opnorm(check: &GradientCheck) -> Result<VerificationReport> {
    check.validate()?;
    let threshold = check.threshold()?;
    let d = (check.d1 + check.d2) as f64 / 2.0;
    let nominal = (2.0 / (d * d)).min(1.0);
    let margins: Vec<f64> = (0..check.trials)
        .into_par_iter()
        .map(|t| {
            let seed = derive_seed(check.seed, &[t as u64]);
            noise_opnorm(check, seed).map(|norm| threshold - norm)
        })
        .collect::<Result<_>>()?;
    let note = Some(format!("threshold {threshold:.6e}"));
    Ok(VerificationReport::tally(OPNORM_NAME, &margins, nominal, note))
}

/// Operator norm of one draw of the noise-weighted design sum.
pub fn noise_opnorm(check: &GradientCheck, seed: u64) -> Result<f64> {
    let spec = GroundTruthSpec::new(
        check.d1,
        check.d2,
        check.rank,
        check.spikiness,
        derive_seed(seed, &[0]),
    );
    let theta_star = generate_ground_truth(&spec)?;
    let data = sample_comparisons(&theta_star, check.n, derive_seed(seed, &[1]))?;
    let n = check.n as f64;
    let coeffs = data
        .records()
        .iter()
        .map(|rec| check.gamma * (logistic(inner_unchecked(&theta_star, rec)) - rec.y()) / n);
    let sum = accumulate_unchecked(
        coeffs,
        data.records(),
        PreferenceMatrix::zeros(check.d1, check.d2)?,
    );
    operator_norm_power(&sum, POWER_REL_TOL, POWER_MAX_ITERS, derive_seed(seed, &[2]))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_not_a_member() {
        let check = RscCheck::new(10, 10, 100, 1.0, 1, 0);
        assert!(!check.contains(&PreferenceMatrix::zeros(10, 10).unwrap()).unwrap());
    }

    #[test]
    fn default_constant_leaves_desk_scale_set_empty() {
        let check = RscCheck::new(60, 60, 10_000, 1.0, 5, 0);
        let report = verify_rsc(&check).unwrap();
        assert!(report.infeasible && !report.pass);
    }

    #[test]
    fn refuses_samples_beyond_regime() {
        // 60^2 ln 60 is about 14740.
        let check = RscCheck::new(60, 60, 30_000, 1.0, 5, 0);
        assert!(matches!(verify_rsc(&check), Err(Error::Input(_))));
        assert!(verify_rsc(&RscCheck {
            trials: 0,
            ..RscCheck::new(10, 10, 50, 1.0, 1, 0)
        })
        .is_err());
    }

    #[test]
    fn relaxed_set_passes_and_members_verified() {
        let check = RscCheck {
            membership_constant: 1.0,
            ..RscCheck::new(30, 30, 2_500, 1.0, 20, 11)
        };
        let member = draw_restricted_member(&check, 3).unwrap().unwrap();
        assert!(check.contains(&member).unwrap());
        let report = verify_rsc(&check).unwrap();
        assert!(!report.infeasible);
        assert_eq!(report.trials, 20);
        assert!(report.pass, "{report:?}");
    }

    #[test]
    fn zero_noise_never_exceeds() {
        let check = GradientCheck::new(10, 12, 300, 0.0, 5, 1);
        let report = verify_gradient_opnorm(&check).unwrap();
        assert_eq!(report.failures, 0);
        assert_eq!(report.worst_margin, 0.0);
        assert!(report.pass);
    }

    #[test]
    fn zero_multiplier_forces_failure() {
        let check = GradientCheck {
            threshold_multiplier: 0.0,
            ..GradientCheck::new(10, 10, 200, 1.0, 5, 1)
        };
        let report = verify_gradient_opnorm(&check).unwrap();
        assert_eq!(report.failures, 5);
        assert!(!report.pass);
    }

    #[test]
    fn allowed_rate_formula() {
        assert_eq!(allowed_failure_rate(0.0, 10), 0.0);
        let p = 2.0 / 2500.0;
        let expect = p + 3.0 * (p * (1.0 - p) / 500.0f64).sqrt();
        assert_eq!(allowed_failure_rate(p, 500), expect);
    }
}
