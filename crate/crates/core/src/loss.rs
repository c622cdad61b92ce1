//! Averaged BTL negative log-likelihood and its gradient.

use crate::data::ComparisonDataset;
use crate::design::{accumulate_unchecked, inner_unchecked};
use crate::error::{Error, Result};
use crate::matrix::PreferenceMatrix;

/// Beyond this magnitude the logistic tails are evaluated in closed form.
const SATURATION: f64 = 35.0;

/// Standard logistic `1 / (1 + e^-z)`, overflow-free.
pub fn logistic(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^z)`, overflow-free.
pub fn softplus(z: f64) -> f64 {
    if z > SATURATION {
        z + (-z).exp()
    } else if z < -SATURATION {
        z.exp()
    } else {
        z.exp().ln_1p()
    }
}

/// Curvature of the logistic loss, `e^x / (1 + e^x)^2`.
pub fn psi(x: f64) -> f64 {
    logistic(x) * logistic(-x)
}

/// Loss value and gradient at one parameter.
#[derive(Debug, Clone)]
pub struct LossEvaluation {
    /// Nats per observation.
    pub value: f64,
    pub gradient: PreferenceMatrix,
}

fn check(theta: &PreferenceMatrix, data: &ComparisonDataset) -> Result<()> {
    data.require_nonempty()?;
    if theta.shape() != data.dims() {
        return Err(Error::dims(data.dims(), theta.shape()));
    }
    Ok(())
}

// softplus(z) - y z, written as softplus(-z) when y = 1 to avoid cancellation.
#[inline]
fn term(z: f64, outcome: bool) -> f64 {
    if outcome {
        softplus(-z)
    } else {
        softplus(z)
    }
}

/// `(1/n) sum_i [softplus(z_i) - y_i z_i]` with `z_i = <theta, X_i>`.
pub fn loss_value(theta: &PreferenceMatrix, data: &ComparisonDataset) -> Result<f64> {
    check(theta, data)?;
    Ok(value_unchecked(theta, data))
}

pub(crate) fn value_unchecked(theta: &PreferenceMatrix, data: &ComparisonDataset) -> f64 {
    let total: f64 = data
        .records()
        .iter()
        .map(|rec| term(inner_unchecked(theta, rec), rec.outcome))
        .sum();
    total / data.len() as f64
}

/// `(1/n) sum_i (logistic(z_i) - y_i) X_i`.
pub fn loss_gradient(theta: &PreferenceMatrix, data: &ComparisonDataset) -> Result<PreferenceMatrix> {
    Ok(evaluate(theta, data)?.gradient)
}

/// Value and gradient from a single pass over the records.
pub fn evaluate(theta: &PreferenceMatrix, data: &ComparisonDataset) -> Result<LossEvaluation> {
    check(theta, data)?;
    let n = data.len() as f64;
    let mut value = 0.0;
    let mut coeffs = Vec::with_capacity(data.len());
    for rec in data.records() {
        let z = inner_unchecked(theta, rec);
        value += term(z, rec.outcome);
        coeffs.push((logistic(z) - rec.y()) / n);
    }
    let zero = PreferenceMatrix::zeros(data.d1(), data.d2())?;
    let gradient = accumulate_unchecked(coeffs.into_iter(), data.records(), zero);
    Ok(LossEvaluation {
        value: value / n,
        gradient,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::ComparisonRecord;

    fn single(outcome: bool) -> ComparisonDataset {
        ComparisonDataset::new(2, 2, vec![ComparisonRecord::new(0, 0, 1, outcome).unwrap()]).unwrap()
    }

    #[test]
    fn zero_parameter_gives_ln2() {
        let data = single(true);
        let z = PreferenceMatrix::zeros(2, 2).unwrap();
        assert!((loss_value(&z, &data).unwrap() - std::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn value_at_ln3() {
        // z = 2 * (t - (-t)) = 4t = ln 3.
        let t = 3f64.ln() / 4.0;
        let theta = PreferenceMatrix::from_rows(&[vec![t, -t], vec![0.0, 0.0]]).unwrap();
        let v = loss_value(&theta, &single(true)).unwrap();
        assert!((v - 0.287_682_072_451_780_9).abs() < 1e-12);
    }

    #[test]
    fn saturated_margin_does_not_overflow() {
        let theta = PreferenceMatrix::from_rows(&[vec![250.0, -250.0], vec![0.0, 0.0]]).unwrap();
        let v = loss_value(&theta, &single(true)).unwrap();
        assert!((0.0..=1e-300).contains(&v));
        let w = loss_value(&theta, &single(false)).unwrap();
        assert!((w - 1000.0).abs() < 1e-9);
    }

    #[test]
    fn gradient_hand_value() {
        let z = PreferenceMatrix::zeros(2, 2).unwrap();
        let g = loss_gradient(&z, &single(true)).unwrap();
        assert_eq!(g.as_slice(), &[-1.0, 1.0, 0.0, 0.0]);
    }

    #[test]
    fn opposite_outcomes_cancel() {
        let r0 = ComparisonRecord::new(1, 2, 0, false).unwrap();
        let r1 = ComparisonRecord { outcome: true, ..r0 };
        let data = ComparisonDataset::new(2, 3, vec![r0, r1]).unwrap();
        let g = loss_gradient(&PreferenceMatrix::zeros(2, 3).unwrap(), &data).unwrap();
        assert!(g.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn psi_values() {
        assert_eq!(psi(0.0), 0.25);
        assert!((psi(2.0) - 0.104_993_585_403_507_1).abs() < 1e-12);
        for x in [-40.0, -3.5, 0.1, 7.0, 800.0] {
            assert_eq!(psi(x), psi(-x));
            assert!(psi(x) <= 0.25);
        }
    }

    #[test]
    fn rejects_empty_and_mismatched() {
        let empty = ComparisonDataset::new(2, 2, vec![]).unwrap();
        let z = PreferenceMatrix::zeros(2, 2).unwrap();
        assert!(loss_value(&z, &empty).is_err());
        let wrong = PreferenceMatrix::zeros(3, 2).unwrap();
        assert!(loss_gradient(&wrong, &single(true)).is_err());
    }
}
