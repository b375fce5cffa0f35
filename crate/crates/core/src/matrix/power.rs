//! Largest singular value by power iteration on `XᵀX`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{dot, DenseMatrix};
use crate::error::{Error, Result};

pub const DEFAULT_MAX_POWER_ITERATIONS: usize = 1000;

const START_SEED: u64 = 0x5eed_0f_5a_17;

/// Power iteration that remembers its last dominant vector, so repeated
/// estimates on slowly changing matrices start close to the answer.
#[derive(Clone, Debug)]
pub struct PowerIteration {
    vector: Option<Vec<f64>>,
    max_iterations: usize,
}

impl Default for PowerIteration {
    fn default() -> Self {
        Self::new(DEFAULT_MAX_POWER_ITERATIONS)
    }
}

impl PowerIteration {
    pub fn new(max_iterations: usize) -> Self {
        Self {
            vector: None,
            max_iterations,
        }
    }

    pub fn reset(&mut self) {
        self.vector = None;
    }

    /// σ₁(x) to relative tolerance `tol`.
    pub fn spectral_norm(&mut self, x: &DenseMatrix, tol: f64) -> Result<f64> {
        let (m, n) = x.shape();
        if x.is_zero() {
            return Ok(0.0);
        }
        let data = x.as_slice();
        let mut tmp = vec![0.0; m];
        let lambda = self.run(n, tol, |v, out| {
            for (i, t) in tmp.iter_mut().enumerate() {
                *t = dot(&data[i * n..(i + 1) * n], v);
            }
            out.iter_mut().for_each(|o| *o = 0.0);
            for (i, &t) in tmp.iter().enumerate() {
                for (o, &a) in out.iter_mut().zip(&data[i * n..(i + 1) * n]) {
                    *o += a * t;
                }
            }
        })?;
        Ok(lambda.sqrt())
    }

    /// Largest eigenvalue of a symmetric positive semidefinite matrix.
    pub fn top_eigenvalue_psd(&mut self, gram: &DenseMatrix, tol: f64) -> Result<f64> {
        let n = gram.rows();
        if gram.cols() != n {
            return Err(Error::invalid("gram matrix must be square"));
        }
        if gram.is_zero() {
            return Ok(0.0);
        }
        let data = gram.as_slice();
        self.run(n, tol, |v, out| {
            for (i, o) in out.iter_mut().enumerate() {
                *o = dot(&data[i * n..(i + 1) * n], v);
            }
        })
    }

    /// Power method on a PSD operator. Returns the Rayleigh-quotient estimate
    /// of the top eigenvalue; convergence is judged on its square root.
    fn run(
        &mut self,
        dim: usize,
        tol: f64,
        mut apply: impl FnMut(&[f64], &mut [f64]),
    ) -> Result<f64> {
        if !(tol > 0.0) {
            return Err(Error::invalid(format!(
                "tolerance must be positive, got {tol}"
            )));
        }
        let warm = self.vector.take().filter(|v| v.len() == dim);
        let mut starts: Vec<Vec<f64>> = Vec::new();
        if let Some(v) = warm {
            starts.push(v);
        }
        starts.push(random_start(dim));
        starts.push(vec![1.0; dim]);
        for j in 0..dim {
            let mut e = vec![0.0; dim];
            e[j] = 1.0;
            starts.push(e);
        }

        let mut w = vec![0.0; dim];
        let mut last_estimate = 0.0;
        for mut v in starts {
            if !normalize(&mut v) {
                continue;
            }
            let mut prev_sigma = f64::NAN;
            let mut iterations = 0;
            let mut dead_start = false;
            while iterations < self.max_iterations {
                iterations += 1;
                apply(&v, &mut w);
                if w.iter().any(|x| !x.is_finite()) {
                    return Err(Error::NonFinite("power iteration"));
                }
                let lambda = dot(&v, &w).max(0.0);
                let sigma = lambda.sqrt();
                last_estimate = lambda;
                v.copy_from_slice(&w);
                if !normalize(&mut v) {
                    // Start vector lies in the null space; try the next one.
                    dead_start = true;
                    break;
                }
                if (sigma - prev_sigma).abs() <= tol * sigma {
                    self.vector = Some(v);
                    return Ok(lambda);
                }
                prev_sigma = sigma;
            }
            if !dead_start {
                return Err(Error::NoConvergence {
                    what: "power iteration",
                    iterations,
                    estimate: last_estimate.sqrt(),
                });
            }
        }
        // Operator annihilates every basis vector: it is zero.
        Ok(0.0)
    }
}

/// σ₁(x) to relative tolerance `tol`, from a fixed pseudo-random start.
pub fn spectral_norm(x: &DenseMatrix, tol: f64) -> Result<f64> {
    PowerIteration::default().spectral_norm(x, tol)
}

fn random_start(dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(START_SEED ^ dim as u64);
    (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect()
}

fn normalize(v: &mut [f64]) -> bool {
    let scale = v.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    if scale == 0.0 || !scale.is_finite() {
        return false;
    }
    v.iter_mut().for_each(|x| *x /= scale);
    let norm = dot(v, v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    true
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_case() {
        let x = DenseMatrix::from_diag(&[3.0, 1.0, 0.5]).unwrap();
        assert!((spectral_norm(&x, 1e-12).unwrap() - 3.0).abs() < 1e-9);
    }

    #[test]
    fn rank_one_product() {
        // ‖u‖ = 2, ‖v‖ = 3
        let u = DenseMatrix::new(2, 1, vec![2.0, 0.0]).unwrap();
        let v = DenseMatrix::new(3, 1, vec![0.0, 3.0, 0.0]).unwrap();
        let x = u.matmul_transposed(&v).unwrap();
        assert!((spectral_norm(&x, 1e-12).unwrap() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix() {
        assert_eq!(spectral_norm(&DenseMatrix::zeros(3, 4), 1e-8).unwrap(), 0.0);
    }

    #[test]
    fn fallback_when_start_in_null_space() {
        let mut p = PowerIteration::default();
        // Seed a warm vector orthogonal to the range of Xᵀ.
        p.vector = Some(vec![0.0, 1.0]);
        let x = DenseMatrix::from_rows(&[[4.0, 0.0], [0.0, 0.0]]).unwrap();
        assert!((p.spectral_norm(&x, 1e-12).unwrap() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn cap_reports_partial_estimate() {
        let mut p = PowerIteration::new(2);
        let x =
            DenseMatrix::from_rows(&[[1.0, 0.2, 0.1], [0.2, 0.99, 0.3], [0.1, 0.3, 0.98]]).unwrap();
        match p.spectral_norm(&x, 1e-15) {
            Err(Error::NoConvergence { estimate, .. }) => assert!(estimate > 0.5),
            other => panic!("expected non-convergence, got {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_tolerance() {
        assert!(spectral_norm(&DenseMatrix::identity(2), 0.0).is_err());
    }

    #[test]
    fn overflow_is_an_error_not_a_zero() {
        let x = DenseMatrix::filled(3, 3, 1e200).unwrap();
        assert!(matches!(spectral_norm(&x, 1e-8), Err(Error::NonFinite(_))));
        let big = DenseMatrix::from_diag(&[1e150, 1.0]).unwrap();
        let s = spectral_norm(&big, 1e-10).unwrap();
        assert!((s / 1e150 - 1.0).abs() < 1e-10);
    }
}
