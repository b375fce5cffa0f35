#![allow(dead_code)]

use lplr::{DenseMatrix, FactorPair};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Entries uniform in `[-scale, scale)`.
pub fn uniform(rng: &mut ChaCha8Rng, m: usize, n: usize, scale: f64) -> DenseMatrix {
    DenseMatrix::from_fn(m, n, |_, _| rng.random_range(-scale..scale)).unwrap()
}

pub fn factors(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> FactorPair {
    FactorPair::new(uniform(rng, m, r, 1.0), uniform(rng, n, r, 1.0)).unwrap()
}

/// Exactly rank-r m×n matrix.
pub fn planted(rng: &mut ChaCha8Rng, m: usize, n: usize, r: usize) -> DenseMatrix {
    factors(rng, m, n, r).product().unwrap()
}

pub fn to_na(x: &DenseMatrix) -> nalgebra::DMatrix<f64> {
    nalgebra::DMatrix::from_row_slice(x.rows(), x.cols(), x.as_slice())
}

pub fn from_na(x: &nalgebra::DMatrix<f64>) -> DenseMatrix {
    DenseMatrix::from_fn(x.nrows(), x.ncols(), |i, j| x[(i, j)]).unwrap()
}

/// Singular values from nalgebra, descending.
pub fn oracle_singulars(x: &DenseMatrix) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(x).singular_values().iter().copied().collect();
    s.sort_by(|a, b| b.total_cmp(a));
    s
}

pub fn max_abs_diff(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

/// Central finite-difference gradient of `f` at `x`, step `1e-6·max(1, |x_ij|)`.
pub fn fd_gradient(x: &DenseMatrix, f: impl Fn(&DenseMatrix) -> f64) -> DenseMatrix {
    let (m, n) = x.shape();
    let mut out = DenseMatrix::zeros(m, n);
    let mut probe = x.clone();
    for i in 0..m {
        for j in 0..n {
            let x0 = x.get(i, j);
            let h = 1e-6 * x0.abs().max(1.0);
            probe.set(i, j, x0 + h).unwrap();
            let up = f(&probe);
            probe.set(i, j, x0 - h).unwrap();
            let down = f(&probe);
            probe.set(i, j, x0).unwrap();
            out.set(i, j, (up - down) / (2.0 * h)).unwrap();
        }
    }
    out
}

/// Largest entrywise `|a − b| / max(1, |b|)`.
pub fn relative_error(a: &DenseMatrix, b: &DenseMatrix) -> f64 {
    a.as_slice()
        .iter()
        .zip(b.as_slice())
        .map(|(x, y)| (x - y).abs() / y.abs().max(1.0))
        .fold(0.0, f64::max)
}
