//! Smooth surrogates for the entrywise ℓ1 and ℓ∞ norms.
//!
//! * Charbonnier (pseudo-Huber): `h(x, τ) = τ(√((x/τ)² + 1) − 1)`, summed over
//!   entries. `|X|₁ − mnτ ≤ h(X, τ) ≤ |X|₁`, gradient Lipschitz with `1/τ`.
//! * Huber: quadratic within `τ` of zero, linear outside. Only once
//!   differentiable, so no curvature routine is offered for it.
//! * logsumexp: `σ(X, τ) = τ·log(Σ (e^{X_ij/τ} + e^{−X_ij/τ}) / 2mn)`.
//!   `|X|_∞ − τ·log(2mn) ≤ σ(X, τ) ≤ |X|_∞`, gradient Lipschitz with `1/τ`.
//!
//! All exponentials are taken relative to `max |X_ij| / τ`, so small `τ`
//! never overflows.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Norm};

/// Smoothing scale `τ > 0`.
#[derive(Clone, Copy, Debug, PartialEq, PartialOrd)]
pub struct SmoothingParam(pub(crate) f64);

impl SmoothingParam {
    pub fn new(tau: f64) -> Result<Self> {
        if tau > 0.0 && tau.is_finite() {
            Ok(Self(tau))
        } else {
            Err(Error::invalid(format!(
                "smoothing parameter must be positive and finite, got {tau}"
            )))
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum SmootherKind {
    Charbonnier,
    Huber,
    LogSumExp,
    /// `½‖X‖_F²`. Not a smoother; the quadratic test objective whose rank-r
    /// minimizer is known in closed form from the SVD. Ignores `τ`.
    Squared,
}

impl SmootherKind {
    /// The norm this surrogate approximates.
    pub fn target_norm(self) -> Norm {
        match self {
            SmootherKind::Charbonnier | SmootherKind::Huber => Norm::L1,
            SmootherKind::LogSumExp => Norm::Linf,
            SmootherKind::Squared => Norm::Frobenius,
        }
    }

    pub fn value(self, x: &DenseMatrix, tau: SmoothingParam) -> f64 {
        match self {
            SmootherKind::Charbonnier => charbonnier_value(x, tau),
            SmootherKind::Huber => huber_value(x, tau),
            SmootherKind::LogSumExp => logsumexp_value(x, tau),
            SmootherKind::Squared => 0.5 * x.frobenius_norm_sq(),
        }
    }

    pub fn grad(self, x: &DenseMatrix, tau: SmoothingParam) -> DenseMatrix {
        match self {
            SmootherKind::Charbonnier => charbonnier_grad(x, tau),
            SmootherKind::Huber => huber_grad(x, tau),
            SmootherKind::LogSumExp => logsumexp_grad(x, tau),
            SmootherKind::Squared => x.clone(),
        }
    }

    /// Additive gap between the target norm and the surrogate on an m×n
    /// input: `norm − slack ≤ value ≤ norm`.
    pub fn smoothing_slack(self, tau: SmoothingParam, m: usize, n: usize) -> f64 {
        let mn = (m * n) as f64;
        match self {
            SmootherKind::Charbonnier => mn * tau.get(),
            SmootherKind::Huber => mn * tau.get() / 2.0,
            SmootherKind::LogSumExp => tau.get() * (2.0 * mn).ln(),
            SmootherKind::Squared => 0.0,
        }
    }
}

/// Gradient Lipschitz constant of the surrogate.
pub fn lipschitz_constant(kind: SmootherKind, tau: SmoothingParam) -> f64 {
    match kind {
        SmootherKind::Charbonnier | SmootherKind::Huber | SmootherKind::LogSumExp => {
            1.0 / tau.get()
        }
        SmootherKind::Squared => 1.0,
    }
}

#[inline]
fn charbonnier_scalar(x: f64, tau: f64) -> f64 {
    let r = x.hypot(tau);
    if x.abs() > tau {
        r - tau
    } else {
        // Cancellation-free form of √(x² + τ²) − τ near zero.
        x * x / (r + tau)
    }
}

pub fn charbonnier_value(x: &DenseMatrix, tau: SmoothingParam) -> f64 {
    let t = tau.get();
    x.as_slice().iter().map(|&v| charbonnier_scalar(v, t)).sum()
}

/// `∂h/∂X_ij = (X_ij/τ) / √((X_ij/τ)² + 1)`.
pub fn charbonnier_grad(x: &DenseMatrix, tau: SmoothingParam) -> DenseMatrix {
    let t = tau.get();
    let data = x.as_slice().iter().map(|&v| v / v.hypot(t)).collect();
    DenseMatrix::from_parts(x.rows(), x.cols(), data)
}

/// Diagonal of the (diagonal) Hessian, `(1/τ)·((X_ij/τ)² + 1)^{−3/2}`.
pub fn charbonnier_hessian_diag(x: &DenseMatrix, tau: SmoothingParam) -> DenseMatrix {
    let t = tau.get();
    let data = x
        .as_slice()
        .iter()
        .map(|&v| {
            let c = t / v.hypot(t);
            c * c * c / t
        })
        .collect();
    DenseMatrix::from_parts(x.rows(), x.cols(), data)
}

#[inline]
fn huber_scalar(x: f64, tau: f64) -> f64 {
    let a = x.abs();
    if a <= tau {
        x * x / (2.0 * tau)
    } else {
        a - tau / 2.0
    }
}

pub fn huber_value(x: &DenseMatrix, tau: SmoothingParam) -> f64 {
    let t = tau.get();
    x.as_slice().iter().map(|&v| huber_scalar(v, t)).sum()
}

pub fn huber_grad(x: &DenseMatrix, tau: SmoothingParam) -> DenseMatrix {
    let t = tau.get();
    let data = x
        .as_slice()
        .iter()
        .map(|&v| if v.abs() <= t { v / t } else { v.signum() })
        .collect();
    DenseMatrix::from_parts(x.rows(), x.cols(), data)
}

/// `P` and `N` scaled by `e^{−a}`, `a = max|X_ij|/τ`, and the scaled sum of `P`.
struct Shifted {
    max_abs: f64,
    p: Vec<f64>,
    n: Vec<f64>,
    sum_p: f64,
}

fn shifted_exponentials(x: &DenseMatrix, tau: f64) -> Shifted {
    let max_abs = x.linf_norm();
    let a = max_abs / tau;
    let mut p = Vec::with_capacity(x.len());
    let mut n = Vec::with_capacity(x.len());
    for &v in x.as_slice() {
        let z = v / tau;
        let plus = (z - a).exp();
        let minus = (-z - a).exp();
        p.push(plus + minus);
        n.push(plus - minus);
    }
    let sum_p = p.iter().sum();
    Shifted {
        max_abs,
        p,
        n,
        sum_p,
    }
}

pub fn logsumexp_value(x: &DenseMatrix, tau: SmoothingParam) -> f64 {
    let t = tau.get();
    let s = shifted_exponentials(x, t);
    let count = 2.0 * x.len() as f64;
    // max + τ·(log S − log 2mn); log S ≥ 0 since the largest term is exactly 1.
    s.max_abs + t * (s.sum_p.ln() - count.ln())
}

/// `N / ΣP`: every entry has magnitude below 1 and the entries' absolute
/// values sum to at most 1.
pub fn logsumexp_grad(x: &DenseMatrix, tau: SmoothingParam) -> DenseMatrix {
    let s = shifted_exponentials(x, tau.get());
    let data = s.n.iter().map(|v| v / s.sum_p).collect();
    DenseMatrix::from_parts(x.rows(), x.cols(), data)
}

/// `yᵀ ∇²σ(X, τ) y` for `y = vec(Y)`, without forming the mn×mn Hessian:
/// `(Σ P_ij Y_ij² − (Σ N_ij Y_ij)² / ΣP) / (τ·ΣP)`.
pub fn logsumexp_hessian_quadform(
    x: &DenseMatrix,
    tau: SmoothingParam,
    y: &DenseMatrix,
) -> Result<f64> {
    if x.shape() != y.shape() {
        return Err(Error::ShapeMismatch {
            op: "logsumexp_hessian_quadform",
            left: x.shape(),
            right: y.shape(),
        });
    }
    let t = tau.get();
    let s = shifted_exponentials(x, t);
    let yv = y.as_slice();
    let py2: f64 = s.p.iter().zip(yv).map(|(p, y)| p * y * y).sum();
    let ny: f64 = s.n.iter().zip(yv).map(|(n, y)| n * y).sum();
    // Cauchy-Schwarz makes the numerator non-negative; clamp rounding noise.
    let numerator = (py2 - ny * ny / s.sum_p).max(0.0);
    Ok(numerator / (t * s.sum_p))
}
