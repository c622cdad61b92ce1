//! Brute-force reference implementations shared by the integration tests.
//!
//! Everything here materializes the dense design matrices and works on plain
//! vectors, so it shares no code path with the library kernels.
#![allow(dead_code)]

use faer::Mat;
use pairrank::{ComparisonDataset, ComparisonRecord, PreferenceMatrix};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Dense `sqrt(d1 d2) e_k (e_l - e_j)^T`, row-major.
pub fn design_dense(rec: &ComparisonRecord, d1: usize, d2: usize) -> Vec<f64> {
    let s = ((d1 * d2) as f64).sqrt();
    let mut x = vec![0.0; d1 * d2];
    x[rec.user * d2 + rec.item_a] += s;
    x[rec.user * d2 + rec.item_b] -= s;
    x
}

pub fn dense_dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn brute_inner(theta: &PreferenceMatrix, rec: &ComparisonRecord) -> f64 {
    let (d1, d2) = theta.shape();
    dense_dot(theta.as_slice(), &design_dense(rec, d1, d2))
}

pub fn brute_adjoint(coeffs: &[f64], records: &[ComparisonRecord], d1: usize, d2: usize) -> Vec<f64> {
    let mut out = vec![0.0; d1 * d2];
    for (c, rec) in coeffs.iter().zip(records) {
        for (o, x) in out.iter_mut().zip(design_dense(rec, d1, d2)) {
            *o += c * x;
        }
    }
    out
}

fn naive_logistic(z: f64) -> f64 {
    1.0 / (1.0 + (-z).exp())
}

/// `(1/n) sum [ln(1 + e^z) - y z]`, written out directly.
pub fn brute_loss(theta: &PreferenceMatrix, data: &ComparisonDataset) -> f64 {
    let n = data.len() as f64;
    data.records()
        .iter()
        .map(|r| {
            let z = brute_inner(theta, r);
            (1.0 + z.exp()).ln() - r.y() * z
        })
        .sum::<f64>()
        / n
}

pub fn brute_gradient(theta: &PreferenceMatrix, data: &ComparisonDataset) -> Vec<f64> {
    let (d1, d2) = data.dims();
    let n = data.len() as f64;
    let coeffs: Vec<f64> = data
        .records()
        .iter()
        .map(|r| (naive_logistic(brute_inner(theta, r)) - r.y()) / n)
        .collect();
    brute_adjoint(&coeffs, data.records(), d1, d2)
}

pub fn random_matrix(rng: &mut impl Rng, d1: usize, d2: usize, scale: f64) -> PreferenceMatrix {
    let data = (0..d1 * d2)
        .map(|_| scale * (rng.random::<f64>() - 0.5))
        .collect();
    PreferenceMatrix::from_row_major(d1, d2, data).unwrap()
}

pub fn random_centered(rng: &mut impl Rng, d1: usize, d2: usize, scale: f64) -> PreferenceMatrix {
    pairrank::row_center(&random_matrix(rng, d1, d2, scale))
}

pub fn random_records(rng: &mut impl Rng, d1: usize, d2: usize, n: usize) -> Vec<ComparisonRecord> {
    (0..n)
        .map(|_| {
            let k = rng.random_range(0..d1);
            let l = rng.random_range(0..d2);
            let mut j = rng.random_range(0..d2 - 1);
            if j >= l {
                j += 1;
            }
            ComparisonRecord::new(k, l, j, rng.random::<bool>()).unwrap()
        })
        .collect()
}

pub fn random_dataset(rng: &mut impl Rng, d1: usize, d2: usize, n: usize) -> ComparisonDataset {
    let records = random_records(rng, d1, d2, n);
    ComparisonDataset::new(d1, d2, records).unwrap()
}

pub fn to_dense(m: &PreferenceMatrix) -> Mat<f64> {
    Mat::from_fn(m.rows(), m.cols(), |k, l| m.get(k, l))
}

fn dense_singular_values(m: &Mat<f64>) -> Vec<f64> {
    m.singular_values().expect("svd")
}

/// Violation of the prox optimality condition for `z = prox(m, tau ||.||_*)`.
///
/// With `g = (m - z) / tau`, `z` is the prox iff `g` is a subgradient of the
/// nuclear norm at `z`, i.e. `||g||_op <= 1` and `<g, z> = ||z||_*`. Returns
/// `tau` times the sum of both violations.
pub fn prox_residual(m: &PreferenceMatrix, z: &PreferenceMatrix, tau: f64) -> f64 {
    let zd = to_dense(z);
    let g = (to_dense(m) - &zd) * faer::Scale(1.0 / tau);
    let op = dense_singular_values(&g).first().copied().unwrap_or(0.0);
    let nuclear: f64 = dense_singular_values(&zd).iter().sum();
    let pairing: f64 = (0..z.rows())
        .flat_map(|k| (0..z.cols()).map(move |l| (k, l)))
        .map(|(k, l)| g[(k, l)] * zd[(k, l)])
        .sum();
    tau * ((op - 1.0).max(0.0) + (nuclear - pairing).abs())
}

/// Spearman rank correlation without ties.
pub fn spearman(x: &[f64], y: &[f64]) -> f64 {
    fn ranks(v: &[f64]) -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[a].total_cmp(&v[b]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    }
    let (rx, ry) = (ranks(x), ranks(y));
    let m = x.len() as f64;
    let d2: f64 = rx.iter().zip(&ry).map(|(a, b)| (a - b).powi(2)).sum();
    1.0 - 6.0 * d2 / (m * (m * m - 1.0))
}
