//! The pairwise design operator in implicit form.
//!
//! A comparison `(k, l, j)` corresponds to the rank-one design matrix
//! `X = sqrt(d1 d2) e_k (e_l - e_j)^T`. Nothing here ever materializes `X`.

use crate::data::ComparisonRecord;
use crate::error::{Error, Result};
use crate::matrix::PreferenceMatrix;

/// `sqrt(d1 d2)`, the scale carried by every design matrix.
pub fn design_scale(d1: usize, d2: usize) -> f64 {
    ((d1 * d2) as f64).sqrt()
}

/// Trace inner product `<theta, X>` for the design matrix of `rec`.
pub fn design_inner_product(theta: &PreferenceMatrix, rec: &ComparisonRecord) -> Result<f64> {
    rec.validate(theta.rows(), theta.cols())?;
    Ok(inner_unchecked(theta, rec))
}

#[inline]
pub(crate) fn inner_unchecked(theta: &PreferenceMatrix, rec: &ComparisonRecord) -> f64 {
    let row = theta.row(rec.user);
    design_scale(theta.rows(), theta.cols()) * (row[rec.item_a] - row[rec.item_b])
}

/// `sum_i coeffs[i] * X_i` for the design matrices of `records`.
pub fn design_adjoint_accumulate(
    coeffs: &[f64],
    records: &[ComparisonRecord],
    d1: usize,
    d2: usize,
) -> Result<PreferenceMatrix> {
    if coeffs.len() != records.len() {
        return Err(Error::input(format!(
            "{} coefficients for {} records",
            coeffs.len(),
            records.len()
        )));
    }
    for rec in records {
        rec.validate(d1, d2)?;
    }
    let zero = PreferenceMatrix::zeros(d1, d2)?;
    Ok(accumulate_unchecked(coeffs.iter().copied(), records, zero))
}

pub(crate) fn accumulate_unchecked(
    coeffs: impl Iterator<Item = f64>,
    records: &[ComparisonRecord],
    base: PreferenceMatrix,
) -> PreferenceMatrix {
    let (d1, d2) = base.shape();
    let scale = design_scale(d1, d2);
    let mut data = base.into_vec();
    for (c, rec) in coeffs.zip(records) {
        let w = c * scale;
        let off = rec.user * d2;
        data[off + rec.item_a] += w;
        data[off + rec.item_b] -= w;
    }
    PreferenceMatrix::from_raw_parts(d1, d2, data, false).with_centering_checked()
}
