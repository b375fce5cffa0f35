//! One-sided (Hestenes) Jacobi SVD.
//!
//! Columns of a working copy are rotated pairwise until they are mutually
//! orthogonal to machine precision; the column norms are then the singular
//! values. The sweep order is fixed, so results are bitwise reproducible.

use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

const MAX_SWEEPS: usize = 80;

/// Leading singular triplets `left · diag(singulars) · rightᵀ`.
#[derive(Clone, Debug)]
pub struct TruncatedSvd {
    /// m×k, orthonormal columns.
    pub left: DenseMatrix,
    /// Non-increasing, non-negative.
    pub singulars: Vec<f64>,
    /// n×k, orthonormal columns.
    pub right: DenseMatrix,
}

impl TruncatedSvd {
    pub fn rank(&self) -> usize {
        self.singulars.len()
    }

    pub fn reconstruct(&self) -> Result<DenseMatrix> {
        let k = self.singulars.len();
        let mut scaled = self.left.as_slice().to_vec();
        for row in scaled.chunks_mut(k) {
            for (v, s) in row.iter_mut().zip(&self.singulars) {
                *v *= s;
            }
        }
        DenseMatrix::from_parts(self.left.rows(), k, scaled).matmul_transposed(&self.right)
    }

    /// Keeps the leading `k` triplets.
    pub fn truncate(mut self, k: usize) -> Result<Self> {
        if k == 0 || k > self.singulars.len() {
            return Err(Error::invalid(format!(
                "cannot truncate {} triplets to {k}",
                self.singulars.len()
            )));
        }
        let keep: Vec<usize> = (0..k).collect();
        self.left = self.left.select_columns(&keep)?;
        self.right = self.right.select_columns(&keep)?;
        self.singulars.truncate(k);
        Ok(self)
    }
}

/// Thin SVD with `min(m, n)` triplets.
pub fn thin_svd(x: &DenseMatrix) -> TruncatedSvd {
    if x.rows() >= x.cols() {
        let (u, s, v) = jacobi_tall(x);
        TruncatedSvd {
            left: u,
            singulars: s,
            right: v,
        }
    } else {
        let (u, s, v) = jacobi_tall(&x.transpose());
        TruncatedSvd {
            left: v,
            singulars: s,
            right: u,
        }
    }
}

/// Top-`k` singular triplets; the reconstruction is the best rank-k
/// approximation in Frobenius norm.
pub fn truncated_svd(x: &DenseMatrix, k: usize) -> Result<TruncatedSvd> {
    let max_k = x.rows().min(x.cols());
    if k == 0 || k > max_k {
        return Err(Error::invalid(format!(
            "rank {k} out of range 1..={max_k} for a {}x{} matrix",
            x.rows(),
            x.cols()
        )));
    }
    thin_svd(x).truncate(k)
}

/// Jacobi on an m×n matrix with m ≥ n. Returns (U m×n, σ, V n×n).
fn jacobi_tall(x: &DenseMatrix) -> (DenseMatrix, Vec<f64>, DenseMatrix) {
    let (m, n) = x.shape();
    debug_assert!(m >= n);

    // Column-major working storage.
    let mut w: Vec<Vec<f64>> = (0..n).map(|j| x.column(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut norms: Vec<f64> = w.iter().map(|c| dot(c, c)).collect();

    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&w[p], &w[q]);
                if gamma.abs() <= f64::EPSILON * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                let (wp, wq) = pair_mut(&mut w, p, q);
                rotate(wp, wq, c, s);
                let (vp, vq) = pair_mut(&mut v, p, q);
                rotate(vp, vq, c, s);
                norms[p] = dot(&w[p], &w[p]);
                norms[q] = dot(&w[q], &w[q]);
            }
        }
        if !rotated {
            break;
        }
    }

    let mut order: Vec<usize> = (0..n).collect();
    let sigma: Vec<f64> = w.iter().map(|c| dot(c, c).sqrt()).collect();
    // Stable sort keeps ties in column order.
    order.sort_by(|&a, &b| sigma[b].total_cmp(&sigma[a]));

    let negligible = f64::MIN_POSITIVE.sqrt();
    let mut left_cols: Vec<Option<Vec<f64>>> = Vec::with_capacity(n);
    let mut singulars = Vec::with_capacity(n);
    for &j in &order {
        let s = sigma[j];
        if s > negligible {
            left_cols.push(Some(w[j].iter().map(|x| x / s).collect()));
            singulars.push(s);
        } else {
            left_cols.push(None);
            singulars.push(0.0);
        }
    }
    let left_cols = complete_orthonormal(left_cols, m);

    let mut u = vec![0.0; m * n];
    for (k, col) in left_cols.iter().enumerate() {
        for i in 0..m {
            u[i * n + k] = col[i];
        }
    }
    let mut vt = vec![0.0; n * n];
    for (k, &j) in order.iter().enumerate() {
        for i in 0..n {
            vt[i * n + k] = v[j][i];
        }
    }
    (
        DenseMatrix::from_parts(m, n, u),
        singulars,
        DenseMatrix::from_parts(n, n, vt),
    )
}

fn pair_mut<T>(v: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    debug_assert!(p < q);
    let (a, b) = v.split_at_mut(q);
    (&mut a[p], &mut b[0])
}

fn rotate(a: &mut [f64], b: &mut [f64], c: f64, s: f64) {
    for (x, y) in a.iter_mut().zip(b.iter_mut()) {
        let (xa, yb) = (*x, *y);
        *x = c * xa - s * yb;
        *y = s * xa + c * yb;
    }
}

/// Fills the `None` slots with unit vectors orthogonal to every other column,
/// drawn from the standard basis by twice-repeated Gram-Schmidt.
fn complete_orthonormal(cols: Vec<Option<Vec<f64>>>, m: usize) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = cols.iter().flatten().cloned().collect();
    let mut next_e = 0;
    cols.into_iter()
        .map(|c| match c {
            Some(c) => c,
            None => loop {
                assert!(next_e < m, "standard basis exhausted while completing");
                let mut e = vec![0.0; m];
                e[next_e] = 1.0;
                next_e += 1;
                for _ in 0..2 {
                    for b in &basis {
                        let proj = dot(&e, b);
                        for (x, y) in e.iter_mut().zip(b) {
                            *x -= proj * y;
                        }
                    }
                }
                let norm = dot(&e, &e).sqrt();
                if norm > 0.5 {
                    e.iter_mut().for_each(|x| *x /= norm);
                    basis.push(e.clone());
                    break e;
                }
            },
        })
        .collect()
}
