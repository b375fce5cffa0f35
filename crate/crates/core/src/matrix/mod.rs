//! Dense real matrices and the kernels the solvers are built from.
//!
//! [`DenseMatrix`] is a row-major `f64` buffer. Every constructor rejects
//! non-finite entries and every arithmetic kernel re-checks its output, so a
//! matrix that exists is always finite.

mod power;
mod svd;

pub use power::{spectral_norm, PowerIteration, DEFAULT_MAX_POWER_ITERATIONS};
pub use svd::{thin_svd, truncated_svd, TruncatedSvd};

use std::fmt;

use crate::error::{Error, Result};

#[derive(Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl fmt::Debug for DenseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "DenseMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows.min(8) {
            write!(f, "  ")?;
            for v in self.row(i).iter().take(8) {
                write!(f, "{v:>12.5e} ")?;
            }
            if self.cols > 8 {
                write!(f, "...")?;
            }
            writeln!(f)?;
        }
        if self.rows > 8 {
            writeln!(f, "  ...")?;
        }
        write!(f, "]")
    }
}

fn check_finite(data: &[f64], op: &'static str) -> Result<()> {
    if data.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(op))
    }
}

impl DenseMatrix {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix dimensions must be positive, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "expected {} entries for a {rows}x{cols} matrix, got {}",
                rows * cols,
                data.len()
            )));
        }
        check_finite(&data, "DenseMatrix::new")?;
        Ok(Self { rows, cols, data })
    }

    /// Internal constructor for buffers already known to be finite.
    pub(crate) fn from_parts(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), rows * cols);
        Self { rows, cols, data }
    }

    /// Like [`DenseMatrix::from_parts`] but validates finiteness, for kernel outputs.
    fn checked(rows: usize, cols: usize, data: Vec<f64>, op: &'static str) -> Result<Self> {
        check_finite(&data, op)?;
        Ok(Self::from_parts(rows, cols, data))
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self::from_parts(rows, cols, vec![0.0; rows * cols])
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Result<Self> {
        Self::new(rows, cols, vec![value; rows * cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    /// Square diagonal matrix.
    pub fn from_diag(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        if n == 0 {
            return Err(Error::invalid("empty diagonal"));
        }
        let mut data = vec![0.0; n * n];
        for (i, &d) in diag.iter().enumerate() {
            data[i * n + i] = d;
        }
        Self::new(n, n, data)
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let nrows = rows.len();
        let ncols = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(nrows * ncols);
        for (i, r) in rows.iter().enumerate() {
            let r = r.as_ref();
            if r.len() != ncols {
                return Err(Error::invalid(format!(
                    "row {i} has {} entries, expected {ncols}",
                    r.len()
                )));
            }
            data.extend_from_slice(r);
        }
        Self::new(nrows, ncols, data)
    }

    pub fn from_fn(
        rows: usize,
        cols: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self::new(rows, cols, data)
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

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; dimensions are positive.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.cols + j]
    }

    /// Sets one entry. Rejects non-finite values.
    pub fn set(&mut self, i: usize, j: usize, value: f64) -> Result<()> {
        if !value.is_finite() {
            return Err(Error::NonFinite("DenseMatrix::set"));
        }
        self.data[i * self.cols + j] = value;
        Ok(())
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self.get(i, j)).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut out = vec![0.0; self.data.len()];
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        Self::from_parts(self.cols, self.rows, out)
    }

    /// Matrix formed by the listed columns, in order.
    pub fn select_columns(&self, cols: &[usize]) -> Result<Self> {
        if cols.is_empty() {
            return Err(Error::invalid("no columns selected"));
        }
        if let Some(&bad) = cols.iter().find(|&&c| c >= self.cols) {
            return Err(Error::invalid(format!(
                "column {bad} out of range for {} columns",
                self.cols
            )));
        }
        let mut data = Vec::with_capacity(self.rows * cols.len());
        for i in 0..self.rows {
            let row = self.row(i);
            data.extend(cols.iter().map(|&c| row[c]));
        }
        Ok(Self::from_parts(self.rows, cols.len(), data))
    }

    /// `[self; other]`, stacking rows.
    pub fn vstack(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(self.mismatch("vstack", other));
        }
        let mut data = Vec::with_capacity(self.data.len() + other.data.len());
        data.extend_from_slice(&self.data);
        data.extend_from_slice(&other.data);
        Ok(Self::from_parts(self.rows + other.rows, self.cols, data))
    }

    fn mismatch(&self, op: &'static str, other: &Self) -> Error {
        Error::ShapeMismatch {
            op,
            left: self.shape(),
            right: other.shape(),
        }
    }

    fn same_shape(&self, op: &'static str, other: &Self) -> Result<()> {
        if self.shape() == other.shape() {
            Ok(())
        } else {
            Err(self.mismatch(op, other))
        }
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(self.mismatch("matmul", other));
        }
        let (m, k, n) = (self.rows, self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for i in 0..m {
            let out_row = &mut out[i * n..(i + 1) * n];
            for p in 0..k {
                let a = self.data[i * k + p];
                if a == 0.0 {
                    continue;
                }
                let b_row = &other.data[p * n..(p + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self::checked(m, n, out, "matmul")
    }

    /// `self · otherᵀ`.
    pub fn matmul_transposed(&self, other: &Self) -> Result<Self> {
        if self.cols != other.cols {
            return Err(self.mismatch("matmul_transposed", other));
        }
        let (m, n) = (self.rows, other.rows);
        let mut out = Vec::with_capacity(m * n);
        for i in 0..m {
            let a = self.row(i);
            for j in 0..n {
                out.push(dot(a, other.row(j)));
            }
        }
        Self::checked(m, n, out, "matmul_transposed")
    }

    /// `selfᵀ · other`.
    pub fn transposed_matmul(&self, other: &Self) -> Result<Self> {
        if self.rows != other.rows {
            return Err(self.mismatch("transposed_matmul", other));
        }
        let (m, n) = (self.cols, other.cols);
        let mut out = vec![0.0; m * n];
        for p in 0..self.rows {
            let a_row = self.row(p);
            let b_row = other.row(p);
            for (i, &a) in a_row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let out_row = &mut out[i * n..(i + 1) * n];
                for (o, &b) in out_row.iter_mut().zip(b_row) {
                    *o += a * b;
                }
            }
        }
        Self::checked(m, n, out, "transposed_matmul")
    }

    pub fn scale(&self, alpha: f64) -> Result<Self> {
        self.map(|v| alpha * v, "scale")
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + b, "add")
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a - b, "sub")
    }

    /// `self + alpha · other`.
    pub fn add_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a + alpha * b, "add_scaled")
    }

    pub fn hadamard(&self, other: &Self) -> Result<Self> {
        self.zip_with(other, |a, b| a * b, "hadamard")
    }

    pub fn map(&self, f: impl Fn(f64) -> f64, op: &'static str) -> Result<Self> {
        let data = self.data.iter().map(|&v| f(v)).collect();
        Self::checked(self.rows, self.cols, data, op)
    }

    pub fn zip_with(
        &self,
        other: &Self,
        f: impl Fn(f64, f64) -> f64,
        op: &'static str,
    ) -> Result<Self> {
        self.same_shape(op, other)?;
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| f(a, b))
            .collect();
        Self::checked(self.rows, self.cols, data, op)
    }

    /// Frobenius inner product `⟨self, other⟩ = Σ_ij self_ij · other_ij`.
    pub fn dot(&self, other: &Self) -> Result<f64> {
        self.same_shape("dot", other)?;
        Ok(dot(&self.data, &other.data))
    }

    /// Entrywise ℓ1 norm, `Σ |x_ij|`.
    pub fn l1_norm(&self) -> f64 {
        self.data.iter().map(|v| v.abs()).sum()
    }

    /// Entrywise ℓ∞ norm, `max |x_ij|`.
    pub fn linf_norm(&self) -> f64 {
        self.data.iter().fold(0.0_f64, |acc, v| acc.max(v.abs()))
    }

    pub fn frobenius_norm_sq(&self) -> f64 {
        dot(&self.data, &self.data)
    }

    pub fn frobenius_norm(&self) -> f64 {
        // Scaled accumulation so large entries do not overflow the square.
        let scale = self.linf_norm();
        if scale == 0.0 {
            return 0.0;
        }
        let s: f64 = self.data.iter().map(|v| (v / scale) * (v / scale)).sum();
        scale * s.sqrt()
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|&v| v == 0.0)
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn entrywise_l1_norm(x: &DenseMatrix) -> f64 {
    x.l1_norm()
}

pub fn entrywise_linf_norm(x: &DenseMatrix) -> f64 {
    x.linf_norm()
}

pub fn frobenius_norm(x: &DenseMatrix) -> f64 {
    x.frobenius_norm()
}

pub fn hadamard(x: &DenseMatrix, y: &DenseMatrix) -> Result<DenseMatrix> {
    x.hadamard(y)
}

/// Entrywise norm used to score an approximation.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Norm {
    L1,
    Linf,
    Frobenius,
}

impl Norm {
    pub fn eval(self, x: &DenseMatrix) -> f64 {
        match self {
            Norm::L1 => x.l1_norm(),
            Norm::Linf => x.linf_norm(),
            Norm::Frobenius => x.frobenius_norm(),
        }
    }

    /// `‖a − b‖` without keeping the residual around.
    pub fn distance(self, a: &DenseMatrix, b: &DenseMatrix) -> Result<f64> {
        Ok(self.eval(&a.sub(b)?))
    }
}

impl fmt::Display for Norm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Norm::L1 => "l1",
            Norm::Linf => "linf",
            Norm::Frobenius => "fro",
        })
    }
}

/// Factors `(U, V)` of a rank-at-most-r matrix `X = U·Vᵀ`.
#[derive(Clone, Debug, PartialEq)]
pub struct FactorPair {
    u: DenseMatrix,
    v: DenseMatrix,
}

impl FactorPair {
    pub fn new(u: DenseMatrix, v: DenseMatrix) -> Result<Self> {
        if u.cols() != v.cols() {
            return Err(Error::ShapeMismatch {
                op: "FactorPair::new",
                left: u.shape(),
                right: v.shape(),
            });
        }
        Ok(Self { u, v })
    }

    pub fn zeros(m: usize, n: usize, r: usize) -> Self {
        Self {
            u: DenseMatrix::zeros(m, r),
            v: DenseMatrix::zeros(n, r),
        }
    }

    pub fn u(&self) -> &DenseMatrix {
        &self.u
    }

    pub fn v(&self) -> &DenseMatrix {
        &self.v
    }

    pub fn into_parts(self) -> (DenseMatrix, DenseMatrix) {
        (self.u, self.v)
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    /// `(m, n)` of the represented product.
    pub fn product_shape(&self) -> (usize, usize) {
        (self.u.rows(), self.v.rows())
    }

    /// `U·Vᵀ`.
    pub fn product(&self) -> Result<DenseMatrix> {
        self.u.matmul_transposed(&self.v)
    }

    /// The `(m+n)×r` stack `[U; V]`.
    pub fn stacked(&self) -> DenseMatrix {
        // Column counts agree by construction.
        self.u.vstack(&self.v).expect("factor column counts agree")
    }

    /// `UᵀU − VᵀV`, the balancing residual (r×r).
    pub fn imbalance(&self) -> Result<DenseMatrix> {
        let uu = self.u.transposed_matmul(&self.u)?;
        let vv = self.v.transposed_matmul(&self.v)?;
        uu.sub(&vv)
    }

    /// Right-multiplies both factors by the same r×r matrix.
    pub fn rotate(&self, r: &DenseMatrix) -> Result<Self> {
        Ok(Self {
            u: self.u.matmul(r)?,
            v: self.v.matmul(r)?,
        })
    }

    /// Balanced split `U = A_r·Σ^{1/2}`, `V = B_r·Σ^{1/2}` of a truncated SVD.
    pub fn balanced_from_svd(svd: &TruncatedSvd) -> Self {
        let roots: Vec<f64> = svd.singulars.iter().map(|s| s.sqrt()).collect();
        let scale_cols = |m: &DenseMatrix| {
            let k = m.cols();
            let mut data = m.as_slice().to_vec();
            for row in data.chunks_mut(k) {
                for (v, r) in row.iter_mut().zip(&roots) {
                    *v *= r;
                }
            }
            DenseMatrix::from_parts(m.rows(), k, data)
        };
        Self {
            u: scale_cols(&svd.left),
            v: scale_cols(&svd.right),
        }
    }
}
