//! Seeded synthetic instances.

use lplr::DenseMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// i.i.d. Uniform[0, 1) entries.
pub fn gen_uniform(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(m, n, |_, _| rng.random::<f64>()).expect("uniform entries are finite")
}

/// i.i.d. ±1 entries with probability ½ each.
pub fn gen_sign(m: usize, n: usize, seed: u64) -> DenseMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    DenseMatrix::from_fn(m, n, |_, _| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .expect("sign entries are finite")
}

/// A quantized instance and the hidden low-rank matrix it came from.
#[derive(Clone, Debug)]
pub struct Quantized {
    /// `round(Ũ·Ṽᵀ)`.
    pub data: DenseMatrix,
    /// `Ũ·Ṽᵀ` with Gaussian factors.
    pub hidden: DenseMatrix,
    /// `|data − hidden|_∞`, at most ½ by construction.
    pub certificate: f64,
}

/// Rounds the product of two m×r and n×r standard Gaussian factors.
pub fn gen_quantized(m: usize, n: usize, r_true: usize, seed: u64) -> Quantized {
    assert!(
        r_true >= 1 && r_true <= m.min(n),
        "hidden rank {r_true} out of range for {m}x{n}"
    );
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut normal = || rng.sample::<f64, _>(StandardNormal);
    let u = DenseMatrix::from_fn(m, r_true, |_, _| normal()).expect("finite");
    let v = DenseMatrix::from_fn(n, r_true, |_, _| normal()).expect("finite");
    let hidden = u.matmul_transposed(&v).expect("finite product");
    let data = hidden.map(f64::round, "round").expect("finite");
    let certificate = data.sub(&hidden).expect("same shape").linf_norm();
    Quantized {
        data,
        hidden,
        certificate,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_is_reproducible_and_in_range() {
        let a = gen_uniform(20, 30, 5);
        assert_eq!(a, gen_uniform(20, 30, 5));
        assert_ne!(a, gen_uniform(20, 30, 6));
        assert!(a.as_slice().iter().all(|&x| (0.0..=1.0).contains(&x)));
        for seed in 0..10 {
            let mean = gen_uniform(20, 30, seed).as_slice().iter().sum::<f64>() / 600.0;
            assert!((0.4..=0.6).contains(&mean), "seed {seed}: mean {mean}");
        }
    }

    #[test]
    fn sign_entries_and_balance() {
        let a = gen_sign(20, 30, 9);
        assert_eq!(a, gen_sign(20, 30, 9));
        assert!(a.as_slice().iter().all(|&x| x == 1.0 || x == -1.0));
        let plus = a.as_slice().iter().filter(|&&x| x > 0.0).count() as f64 / 600.0;
        assert!((0.35..=0.65).contains(&plus));
    }

    #[test]
    fn quantized_certificate_and_integrality() {
        for seed in 0..1000 {
            let q = gen_quantized(12, 9, 1 + (seed as usize % 4), seed);
            assert!(q.certificate <= 0.5, "seed {seed}: {}", q.certificate);
            assert!(q.data.as_slice().iter().all(|x| x.fract() == 0.0));
        }
        let a = gen_quantized(10, 8, 2, 3);
        let b = gen_quantized(10, 8, 2, 3);
        assert_eq!(a.data, b.data);
        assert_eq!(a.hidden, b.hidden);
    }
}
