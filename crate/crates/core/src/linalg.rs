//! Dense SVD and spectral-norm kernels over [`PreferenceMatrix`].

use faer::{Col, Mat};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matrix::PreferenceMatrix;

/// Thin SVD `m = u * diag(singular_values) * v^T`, singular values descending.
#[derive(Debug, Clone)]
pub struct ThinSvd {
    pub(crate) u: Mat<f64>,
    pub singular_values: Vec<f64>,
    pub(crate) v: Mat<f64>,
}

impl ThinSvd {
    /// Reassembles `u * diag(f(sigma)) * v^T`, dropping components mapped to zero.
    pub fn recompose_with(&self, f: impl Fn(f64) -> f64) -> PreferenceMatrix {
        let (rows, cols) = (self.u.nrows(), self.v.nrows());
        let kept: Vec<(usize, f64)> = self
            .singular_values
            .iter()
            .enumerate()
            .map(|(i, &s)| (i, f(s)))
            .filter(|&(_, w)| w != 0.0)
            .collect();
        if kept.is_empty() {
            return PreferenceMatrix::from_faer(Mat::<f64>::zeros(rows, cols).as_ref());
        }
        let left = Mat::from_fn(rows, kept.len(), |k, c| self.u[(k, kept[c].0)] * kept[c].1);
        let right = Mat::from_fn(cols, kept.len(), |l, c| self.v[(l, kept[c].0)]);
        PreferenceMatrix::from_faer((&left * right.transpose()).as_ref())
    }

    /// Leading `r` left singular vectors, one per column.
    pub(crate) fn left(&self, r: usize) -> Mat<f64> {
        self.u.subcols(0, r).to_owned()
    }

    /// Leading `r` right singular vectors, one per column.
    pub(crate) fn right(&self, r: usize) -> Mat<f64> {
        self.v.subcols(0, r).to_owned()
    }
}

pub fn svd(m: &PreferenceMatrix) -> Result<ThinSvd> {
    let dec = m.to_faer().thin_svd().map_err(|_| svd_failure(m))?;
    Ok(ThinSvd {
        u: dec.U().to_owned(),
        singular_values: dec.S().column_vector().iter().copied().collect(),
        v: dec.V().to_owned(),
    })
}

/// Singular values, descending. Computed through the same full decomposition
/// as [`svd`] so both report bit-identical values.
pub fn singular_values(m: &PreferenceMatrix) -> Result<Vec<f64>> {
    Ok(svd(m)?.singular_values)
}

fn svd_failure(m: &PreferenceMatrix) -> Error {
    let (rows, cols) = m.shape();
    Error::Numerical(format!(
        "SVD of {rows}x{cols} matrix did not converge \
         (frobenius norm {:e}, max |entry| {:e})",
        m.frobenius_norm(),
        m.max_abs()
    ))
}

/// Leading `k` singular triplets by block subspace iteration.
///
/// Returns the approximate factors together with `residual_fro`, the Frobenius
/// norm of the part of `m` left outside the computed left subspace. Returns
/// `None` if the iteration does not settle.
pub fn truncated_svd(m: &PreferenceMatrix, k: usize) -> Option<(ThinSvd, f64)> {
    let a = m.to_faer();
    let (rows, cols) = (a.nrows(), a.ncols());
    let k = k.min(rows.min(cols));
    if k == 0 {
        return None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(0x7375_6273_7061_6365);
    let omega = Mat::from_fn(cols, k, |_, _| rng.random::<f64>() - 0.5);
    let mut q = (&a * &omega).qr().compute_thin_Q();
    let mut prev: Option<Vec<f64>> = None;
    for _ in 0..200 {
        let z = (a.transpose() * &q).qr().compute_thin_Q();
        q = (&a * &z).qr().compute_thin_Q();
        let b = q.transpose() * &a;
        let dec = b.thin_svd().ok()?;
        let sv: Vec<f64> = dec.S().column_vector().iter().copied().collect();
        let top = sv[0].max(f64::MIN_POSITIVE);
        if let Some(p) = &prev {
            if p.iter().zip(&sv).all(|(x, y)| (x - y).abs() <= 1e-13 * top) {
                let residual = (&a - &q * (q.transpose() * &a)).norm_l2();
                return Some((
                    ThinSvd {
                        u: &q * dec.U(),
                        singular_values: sv,
                        v: dec.V().to_owned(),
                    },
                    residual,
                ));
            }
        }
        prev = Some(sv);
    }
    None
}

fn random_unit(rng: &mut ChaCha8Rng, len: usize) -> Col<f64> {
    let v = Col::from_fn(len, |_| rng.random::<f64>() - 0.5);
    let norm = v.norm_l2();
    v / norm
}

/// Spectral norm of `m` by power iteration on `m^T m`.
///
/// Stops once the estimate changes by at most `rel_tol` relative between
/// sweeps; fails if that does not happen within `max_iters` sweeps.
pub fn operator_norm_power(m: &PreferenceMatrix, rel_tol: f64, max_iters: usize, seed: u64) -> Result<f64> {
    if m.as_slice().iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let a = m.to_faer();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v = random_unit(&mut rng, a.ncols());
    let mut est = (&a * &v).norm_l2();
    for _ in 0..max_iters {
        let w = a.transpose() * (&a * &v);
        let nw = w.norm_l2();
        if nw == 0.0 {
            // Start vector fell in the null space; restart from a fresh draw.
            v = random_unit(&mut rng, a.ncols());
            continue;
        }
        v = w / nw;
        let next = (&a * &v).norm_l2();
        if (next - est).abs() <= rel_tol * next {
            return Ok(next);
        }
        est = next;
    }
    Err(Error::Numerical(format!(
        "power iteration stagnated after {max_iters} sweeps (last estimate {est:e})"
    )))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(rows: usize, cols: usize, seed: u64) -> PreferenceMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = (0..rows * cols).map(|_| rng.random::<f64>() - 0.5).collect();
        PreferenceMatrix::from_row_major(rows, cols, data).unwrap()
    }

    #[test]
    fn svd_recomposes() {
        let m = sample(5, 7, 1);
        let dec = svd(&m).unwrap();
        let back = dec.recompose_with(|s| s);
        assert!((&back - &m).frobenius_norm() < 1e-12);
        assert!(dec.singular_values.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn truncated_matches_full_on_low_rank() {
        let a = sample(30, 3, 2).to_faer();
        let b = sample(3, 25, 3).to_faer();
        let m = PreferenceMatrix::from_faer((a * b).as_ref());
        let full = singular_values(&m).unwrap();
        let (trunc, resid) = truncated_svd(&m, 5).unwrap();
        for i in 0..3 {
            assert!((trunc.singular_values[i] - full[i]).abs() < 1e-10 * full[0]);
        }
        assert!(resid < 1e-10 * full[0]);
    }

    #[test]
    fn rank_deficient_matrices_recompose() {
        for seed in 0..500 {
            let a = sample(6 + seed as usize % 30, 2, seed).to_faer();
            let b = sample(2, 9, seed + 1000).to_faer();
            let m = PreferenceMatrix::from_faer((a * b).as_ref());
            let back = svd(&m).unwrap().recompose_with(|s| s);
            assert!((&back - &m).frobenius_norm() < 1e-12, "seed {seed}");
        }
    }

    #[test]
    fn power_iteration_agrees_with_svd() {
        let m = sample(12, 9, 4);
        let exact = singular_values(&m).unwrap()[0];
        let est = operator_norm_power(&m, 1e-12, 100_000, 9).unwrap();
        assert!((est - exact).abs() < 1e-6 * exact);
    }

    #[test]
    fn power_iteration_of_zero_is_zero() {
        let z = PreferenceMatrix::zeros(4, 4).unwrap();
        assert_eq!(operator_norm_power(&z, 1e-6, 10, 0).unwrap(), 0.0);
    }
}
