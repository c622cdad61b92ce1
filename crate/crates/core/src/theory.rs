//! Closed-form regularization level and error bound for the estimator.
//!
//! All logarithms are natural. `d` is the average dimension `(d1 + d2) / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::psi;

fn default_c1() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoryInputs {
    pub d1: usize,
    pub d2: usize,
    pub n: usize,
    pub rank: usize,
    pub spikiness: f64,
    /// Sum of the singular values of the ground truth beyond the rank.
    #[serde(default)]
    pub sv_tail: f64,
    /// Unspecified universal constant; 1 gives shape-only rate curves.
    #[serde(default = "default_c1")]
    pub c1: f64,
}

impl TheoryInputs {
    pub fn avg_dim(&self) -> f64 {
        (self.d1 + self.d2) as f64 / 2.0
    }

    fn validate(&self) -> Result<f64> {
        let d = checked_avg_dim(self.d1, self.d2, self.n)?;
        if self.rank == 0 {
            return Err(Error::input("rank must be positive"));
        }
        if !(self.spikiness.is_finite() && self.spikiness > 0.0) {
            return Err(Error::input(format!(
                "spikiness must be positive, got {}",
                self.spikiness
            )));
        }
        if !(self.sv_tail.is_finite() && self.sv_tail >= 0.0) {
            return Err(Error::input(format!(
                "singular value tail must be nonnegative, got {}",
                self.sv_tail
            )));
        }
        if !(self.c1.is_finite() && self.c1 > 0.0) {
            return Err(Error::input(format!("c1 must be positive, got {}", self.c1)));
        }
        Ok(d)
    }

    /// `sqrt(r d ln d / n)`.
    fn rate(&self, d: f64) -> f64 {
        (self.rank as f64 * d * d.ln() / self.n as f64).sqrt()
    }

    /// `max(alpha, 1 / psi(2 alpha))`.
    fn curvature_factor(&self) -> f64 {
        self.spikiness.max(1.0 / psi(2.0 * self.spikiness))
    }
}

fn checked_avg_dim(d1: usize, d2: usize, n: usize) -> Result<f64> {
    if n == 0 {
        return Err(Error::input("sample size must be at least 1"));
    }
    let d = (d1 + d2) as f64 / 2.0;
    if d < 2.0 {
        return Err(Error::input(format!(
            "average dimension (d1 + d2) / 2 must be at least 2, got {d}"
        )));
    }
    Ok(d)
}

/// `32 sqrt(d ln d / n)`.
pub fn lambda_theory(d1: usize, d2: usize, n: usize) -> Result<f64> {
    let d = checked_avg_dim(d1, d2, n)?;
    Ok(32.0 * (d * d.ln() / n as f64).sqrt())
}

/// Frobenius error bound
/// `c1 max(alpha, 1/psi(2 alpha)) max{ rate, sqrt(rate * sv_tail) }`
/// with `rate = sqrt(r d ln d / n)`.
pub fn error_bound(inputs: &TheoryInputs) -> Result<f64> {
    let d = inputs.validate()?;
    let rate = inputs.rate(d);
    Ok(inputs.c1 * inputs.curvature_factor() * rate.max((rate * inputs.sv_tail).sqrt()))
}

/// The same bound with the explicit constants carried through the argument:
/// `max(alpha, 1/psi(2 alpha)) max{ 1024 rate, sqrt(512 rate * sv_tail) }`.
/// `c1` is not applied.
pub fn error_bound_explicit(inputs: &TheoryInputs) -> Result<f64> {
    let d = inputs.validate()?;
    let rate = inputs.rate(d);
    Ok(inputs.curvature_factor() * (1024.0 * rate).max((512.0 * rate * inputs.sv_tail).sqrt()))
}

/// `8 gamma sqrt(d ln d / n)`, the level the noise-weighted design sum stays
/// below in operator norm with probability at least `1 - 2/d^2`.
pub fn gradient_opnorm_threshold(d1: usize, d2: usize, n: usize, gamma: f64) -> Result<f64> {
    let d = checked_avg_dim(d1, d2, n)?;
    Ok(8.0 * gamma * (d * d.ln() / n as f64).sqrt())
}

/// Upper end of the sample-size regime the error bound covers: `d^2 ln d`.
pub fn sample_size_ceiling(d1: usize, d2: usize) -> f64 {
    let d = (d1 + d2) as f64 / 2.0;
    d * d * d.ln()
}
