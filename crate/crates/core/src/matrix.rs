//! Dense user-by-item score matrices.

use std::fmt;
use std::ops::{Add, Mul, Sub};

use faer::{Mat, MatRef};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Row-sum tolerance per item used for the `centered` invariant.
pub const CENTERING_TOL: f64 = 1e-9;

/// A dense `rows x cols` matrix of user-item scores, stored row-major.
///
/// Rows index users and columns index items. The `centered` flag records that
/// every row sums to zero (within `CENTERING_TOL * cols`); it is only ever set
/// by constructors that establish or verify that property.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct PreferenceMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
    centered: bool,
}

impl PreferenceMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        check_shape(rows, cols)?;
        Ok(PreferenceMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
            centered: true,
        })
    }

    /// Builds a matrix from row-major data. The result is not flagged as
    /// centered even if its rows happen to sum to zero; see [`Self::into_centered`].
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        check_shape(rows, cols)?;
        if data.len() != rows * cols {
            return Err(Error::input(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::input(format!(
                "non-finite entry at ({}, {})",
                pos / cols,
                pos % cols
            )));
        }
        Ok(PreferenceMatrix {
            rows,
            cols,
            data,
            centered: false,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().position(|r| r.len() != ncols) {
            return Err(Error::input(format!(
                "row {bad} has {} entries, expected {ncols}",
                rows[bad].len()
            )));
        }
        Self::from_row_major(nrows, ncols, rows.concat())
    }

    /// Verifies the zero-row-sum property and sets the `centered` flag.
    pub fn into_centered(mut self) -> Result<Self> {
        let worst = self.max_abs_row_sum();
        if worst > CENTERING_TOL * self.cols as f64 {
            return Err(Error::input(format!(
                "matrix is not row-centered: max |row sum| = {worst:e}"
            )));
        }
        self.centered = true;
        Ok(self)
    }

    /// Sets the flag when the rows pass the centering check, clears it otherwise.
    pub(crate) fn with_centering_checked(mut self) -> Self {
        self.centered = self.max_abs_row_sum() <= CENTERING_TOL * self.cols as f64;
        self
    }

    pub(crate) fn from_raw_parts(rows: usize, cols: usize, data: Vec<f64>, centered: bool) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        PreferenceMatrix {
            rows,
            cols,
            data,
            centered,
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `(d1 + d2) / 2`.
    pub fn avg_dim(&self) -> f64 {
        (self.rows + self.cols) as f64 / 2.0
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, k: usize) -> &[f64] {
        &self.data[k * self.cols..(k + 1) * self.cols]
    }

    pub fn get(&self, k: usize, l: usize) -> f64 {
        self.data[k * self.cols + l]
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.data.chunks(self.cols).map(|r| r.iter().sum()).collect()
    }

    pub fn max_abs_row_sum(&self) -> f64 {
        self.row_sums().into_iter().fold(0.0, |m, s| m.max(s.abs()))
    }

    /// Frobenius (trace) inner product `tr(self^T other)`.
    pub fn dot(&self, other: &PreferenceMatrix) -> f64 {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.iter().zip(&other.data).map(|(a, b)| a * b).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Elementwise max-abs norm.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Singular values in non-increasing order.
    pub fn singular_values(&self) -> Result<Vec<f64>> {
        crate::linalg::singular_values(self)
    }

    pub fn nuclear_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.iter().sum())
    }

    pub fn operator_norm(&self) -> Result<f64> {
        Ok(self.singular_values()?.first().copied().unwrap_or(0.0))
    }

    /// Elementwise map; the result is not flagged centered.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> PreferenceMatrix {
        let data = self.data.iter().map(|&v| f(v)).collect();
        PreferenceMatrix::from_raw_parts(self.rows, self.cols, data, false)
    }

    pub fn scale(&self, s: f64) -> PreferenceMatrix {
        let data = self.data.iter().map(|v| v * s).collect();
        PreferenceMatrix::from_raw_parts(self.rows, self.cols, data, self.centered)
    }

    pub(crate) fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |k, l| self.data[k * self.cols + l])
    }

    pub(crate) fn from_faer(m: MatRef<'_, f64>) -> Self {
        let (rows, cols) = (m.nrows(), m.ncols());
        let mut data = Vec::with_capacity(rows * cols);
        for k in 0..rows {
            data.extend((0..cols).map(|l| m[(k, l)]));
        }
        PreferenceMatrix::from_raw_parts(rows, cols, data, false)
    }

    fn zip_with(&self, other: &PreferenceMatrix, f: impl Fn(f64, f64) -> f64) -> PreferenceMatrix {
        assert_eq!(
            self.shape(),
            other.shape(),
            "matrix shapes differ in elementwise operation"
        );
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        // Linear combinations of centered matrices are centered up to round-off.
        PreferenceMatrix::from_raw_parts(self.rows, self.cols, data, false)
            .with_centering_checked_if(self.centered && other.centered)
    }

    fn with_centering_checked_if(self, cond: bool) -> Self {
        if cond {
            self.with_centering_checked()
        } else {
            self
        }
    }
}

fn check_shape(rows: usize, cols: usize) -> Result<()> {
    if rows == 0 || cols == 0 {
        return Err(Error::input(format!(
            "matrix dimensions must be positive, got {rows}x{cols}"
        )));
    }
    Ok(())
}

/// Subtracts each row's mean from that row.
///
/// This is the orthogonal projection onto matrices with zero row sums, so it
/// is idempotent and never increases the Frobenius norm.
pub fn row_center(theta: &PreferenceMatrix) -> PreferenceMatrix {
    let cols = theta.cols;
    let mut data = theta.data.clone();
    for row in data.chunks_mut(cols) {
        let mean = row.iter().sum::<f64>() / cols as f64;
        if mean != 0.0 {
            row.iter_mut().for_each(|v| *v -= mean);
        }
    }
    PreferenceMatrix::from_raw_parts(theta.rows, cols, data, true)
}

impl Add for &PreferenceMatrix {
    type Output = PreferenceMatrix;

    fn add(self, rhs: &PreferenceMatrix) -> PreferenceMatrix {
        self.zip_with(rhs, |a, b| a + b)
    }
}

impl Sub for &PreferenceMatrix {
    type Output = PreferenceMatrix;

    fn sub(self, rhs: &PreferenceMatrix) -> PreferenceMatrix {
        self.zip_with(rhs, |a, b| a - b)
    }
}

impl Mul<f64> for &PreferenceMatrix {
    type Output = PreferenceMatrix;

    fn mul(self, rhs: f64) -> PreferenceMatrix {
        self.scale(rhs)
    }
}

impl fmt::Debug for PreferenceMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "PreferenceMatrix {}x{} (centered: {})",
            self.rows, self.cols, self.centered
        )?;
        for k in 0..self.rows.min(8) {
            let row: Vec<String> = self.row(k).iter().take(8).map(|v| format!("{v:.4}")).collect();
            writeln!(
                f,
                "  [{}{}]",
                row.join(", "),
                if self.cols > 8 { ", ..." } else { "" }
            )?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        Ok(())
    }
}
