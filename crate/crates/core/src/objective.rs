//! The composite objective `f(X) = s(M − X, τ) + (λ/2)‖X‖_F²` for a smoother
//! `s`, and its gradients in `X` and in the factors of `X = U·Vᵀ`.

use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, FactorPair, Norm};
use crate::smoothers::{lipschitz_constant, SmootherKind, SmoothingParam};

#[derive(Clone, Debug)]
pub struct SmoothedObjective {
    data: DenseMatrix,
    kind: SmootherKind,
    tau: SmoothingParam,
    lambda: f64,
}

impl SmoothedObjective {
    pub fn new(
        data: DenseMatrix,
        kind: SmootherKind,
        tau: SmoothingParam,
        lambda: f64,
    ) -> Result<Self> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::invalid(format!(
                "ridge weight must be non-negative and finite, got {lambda}"
            )));
        }
        Ok(Self {
            data,
            kind,
            tau,
            lambda,
        })
    }

    /// `½‖M − X‖_F² + (λ/2)‖X‖_F²`, the quadratic test objective.
    pub fn squared(data: DenseMatrix, lambda: f64) -> Result<Self> {
        Self::new(data, SmootherKind::Squared, SmoothingParam(1.0), lambda)
    }

    pub fn data(&self) -> &DenseMatrix {
        &self.data
    }

    pub fn kind(&self) -> SmootherKind {
        self.kind
    }

    pub fn tau(&self) -> SmoothingParam {
        self.tau
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    pub fn target_norm(&self) -> Norm {
        self.kind.target_norm()
    }

    /// `L̂ = L_smoother + λ`.
    pub fn lipschitz(&self) -> f64 {
        lipschitz_constant(self.kind, self.tau) + self.lambda
    }

    fn check_shape(&self, op: &'static str, x: &DenseMatrix) -> Result<()> {
        if x.shape() == self.data.shape() {
            Ok(())
        } else {
            Err(Error::ShapeMismatch {
                op,
                left: self.data.shape(),
                right: x.shape(),
            })
        }
    }

    pub fn value(&self, x: &DenseMatrix) -> Result<f64> {
        self.check_shape("objective value", x)?;
        let residual = self.data.sub(x)?;
        let mut v = self.kind.value(&residual, self.tau);
        if self.lambda > 0.0 {
            v += 0.5 * self.lambda * x.frobenius_norm_sq();
        }
        Ok(v)
    }

    /// `∇_X f = −∇s(M − X, τ) + λX`.
    pub fn grad_x(&self, x: &DenseMatrix) -> Result<DenseMatrix> {
        self.check_shape("objective gradient", x)?;
        let residual = self.data.sub(x)?;
        let g = self.kind.grad(&residual, self.tau);
        if self.lambda > 0.0 {
            x.scale(self.lambda)?.sub(&g)
        } else {
            g.scale(-1.0)
        }
    }

    /// True target-norm error `‖M − X‖_p`.
    pub fn error(&self, x: &DenseMatrix) -> Result<f64> {
        self.check_shape("objective error", x)?;
        self.target_norm().distance(&self.data, x)
    }

    /// `(∇f(X)·V, ∇f(X)ᵀ·U)` with `X = U·Vᵀ`; the gradient in `X` is formed once.
    pub fn grad_factors(&self, factors: &FactorPair) -> Result<(DenseMatrix, DenseMatrix)> {
        let x = factors.product()?;
        let g = self.grad_x(&x)?;
        factor_gradients(&g, factors)
    }
}

/// `(G·V, Gᵀ·U)`.
pub(crate) fn factor_gradients(
    g: &DenseMatrix,
    factors: &FactorPair,
) -> Result<(DenseMatrix, DenseMatrix)> {
    let gu = g.matmul(factors.v())?;
    let gv = g.transposed_matmul(factors.u())?;
    Ok((gu, gv))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample(m: usize, n: usize, seed: u64) -> DenseMatrix {
        let mut s = seed;
        DenseMatrix::from_fn(m, n, |_, _| {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            ((s >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0
        })
        .unwrap()
    }

    #[test]
    fn zero_residual_is_zero() {
        let m = sample(4, 3, 1);
        for kind in [
            SmootherKind::Charbonnier,
            SmootherKind::LogSumExp,
            SmootherKind::Huber,
        ] {
            let obj =
                SmoothedObjective::new(m.clone(), kind, SmoothingParam::new(0.1).unwrap(), 0.0)
                    .unwrap();
            assert_eq!(obj.value(&m).unwrap(), 0.0);
            assert!(obj.grad_x(&m).unwrap().is_zero());
        }
    }

    #[test]
    fn origin_value_is_smoother_of_data() {
        let m = sample(5, 2, 7);
        let tau = SmoothingParam::new(0.2).unwrap();
        let obj = SmoothedObjective::new(m.clone(), SmootherKind::Charbonnier, tau, 0.0).unwrap();
        let zero = DenseMatrix::zeros(5, 2);
        assert_eq!(
            obj.value(&zero).unwrap(),
            crate::smoothers::charbonnier_value(&m, tau)
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        let m = sample(3, 3, 2);
        let tau = SmoothingParam::new(1.0).unwrap();
        assert!(SmoothedObjective::new(m.clone(), SmootherKind::Charbonnier, tau, -1.0).is_err());
        let obj = SmoothedObjective::new(m, SmootherKind::Charbonnier, tau, 0.0).unwrap();
        assert!(matches!(
            obj.value(&DenseMatrix::zeros(3, 2)),
            Err(Error::ShapeMismatch { .. })
        ));
        assert!(obj.grad_x(&DenseMatrix::zeros(2, 3)).is_err());
        assert!(obj.grad_factors(&FactorPair::zeros(3, 2, 1)).is_err());
    }

    #[test]
    fn exact_factorization_has_zero_factor_gradients() {
        let u = sample(6, 2, 3);
        let v = sample(4, 2, 4);
        let f = FactorPair::new(u, v).unwrap();
        let obj = SmoothedObjective::new(
            f.product().unwrap(),
            SmootherKind::Charbonnier,
            SmoothingParam::new(0.05).unwrap(),
            0.0,
        )
        .unwrap();
        let (gu, gv) = obj.grad_factors(&f).unwrap();
        assert!(gu.is_zero() && gv.is_zero());
    }

    #[test]
    fn large_ridge_dominates_gradient() {
        let m = sample(5, 4, 9);
        let x = sample(5, 4, 10);
        let lambda = 1e3;
        let obj = SmoothedObjective::new(
            m.clone(),
            SmootherKind::Charbonnier,
            SmoothingParam::new(0.1).unwrap(),
            lambda,
        )
        .unwrap();
        let g = obj.grad_x(&x).unwrap();
        let ridge = x.scale(lambda).unwrap();
        let smoother_grad = crate::smoothers::charbonnier_grad(&m.sub(&x).unwrap(), obj.tau());
        let rel = g.sub(&ridge).unwrap().frobenius_norm() / ridge.frobenius_norm();
        let bound = smoother_grad.frobenius_norm() / ridge.frobenius_norm();
        assert!(rel <= bound * (1.0 + 1e-12));
        assert!(rel < 1e-2);
    }
}
