//! Comparison methods: truncated SVD, and a column-sampling ℓ1 heuristic that
//! takes `r` columns of `M` as the left factor and fits the right factor by
//! iteratively reweighted least squares.

use std::time::{Duration, Instant};

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matrix::{thin_svd, truncated_svd, DenseMatrix, FactorPair, Norm};

/// IRLS weight floor: weights are `1/max(|residual|, δ)`.
pub const IRLS_DELTA: f64 = 1e-8;
pub const IRLS_ITERATIONS: usize = 50;
/// Redraws allowed for a rank-deficient column sample before falling back to
/// the pseudo-inverse.
pub const MAX_REDRAWS: usize = 10;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BaselineMethod {
    SvdBaseline,
    ColumnSampling,
}

#[derive(Clone, Debug)]
pub struct BaselineResult {
    pub factors: FactorPair,
    /// `‖M − U·Vᵀ‖_p`, recomputed from `factors`.
    pub lp_error: f64,
    pub wall_time: Duration,
    pub method: BaselineMethod,
    /// Column-sampling trials evaluated (1 for the SVD baseline).
    pub trials_run: usize,
}

/// Best rank-r Frobenius approximation, scored in `norm`.
pub fn svd_baseline(data: &DenseMatrix, rank: usize, norm: Norm) -> Result<BaselineResult> {
    let start = Instant::now();
    let svd = truncated_svd(data, rank)?;
    let factors = FactorPair::balanced_from_svd(&svd);
    let lp_error = norm.distance(data, &factors.product()?)?;
    Ok(BaselineResult {
        factors,
        lp_error,
        wall_time: start.elapsed(),
        method: BaselineMethod::SvdBaseline,
        trials_run: 1,
    })
}

/// Best of `trials` column samples. Trial `t` draws from its own generator,
/// seeded from `(seed, t)`, so the result for `k` trials is the minimum over
/// the first `k` trials of any longer run.
pub fn column_sampling_l1(
    data: &DenseMatrix,
    rank: usize,
    trials: usize,
    seed: u64,
) -> Result<BaselineResult> {
    if trials == 0 {
        return Err(Error::invalid("column sampling needs at least one trial"));
    }
    check_rank(data, rank)?;
    let start = Instant::now();
    let (err, factors) = best_of(data, rank, seed, 0..trials)?;
    Ok(BaselineResult {
        factors,
        lp_error: err,
        wall_time: start.elapsed(),
        method: BaselineMethod::ColumnSampling,
        trials_run: trials,
    })
}

/// Column sampling run for at least `budget` of wall time (and at least one
/// trial). The clock is checked between batches of trials, never mid-trial.
pub fn column_sampling_l1_timed(
    data: &DenseMatrix,
    rank: usize,
    budget: Duration,
    seed: u64,
) -> Result<BaselineResult> {
    check_rank(data, rank)?;
    let start = Instant::now();
    let batch = rayon::current_num_threads().max(1);
    let mut best: Option<(f64, usize, FactorPair)> = None;
    let mut next = 0;
    loop {
        let range = next..next + batch;
        let (err, factors) = best_of(data, rank, seed, range.clone())?;
        if best.as_ref().is_none_or(|b| err < b.0) {
            best = Some((err, range.start, factors));
        }
        next = range.end;
        if start.elapsed() >= budget {
            break;
        }
    }
    let (lp_error, _, factors) = best.expect("at least one batch ran");
    Ok(BaselineResult {
        factors,
        lp_error,
        wall_time: start.elapsed(),
        method: BaselineMethod::ColumnSampling,
        trials_run: next,
    })
}

fn check_rank(data: &DenseMatrix, rank: usize) -> Result<()> {
    let (m, n) = data.shape();
    if rank == 0 || rank > m.min(n) {
        return Err(Error::invalid(format!(
            "rank {rank} out of range 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    Ok(())
}

/// Minimum over trials, ties to the lowest trial index.
fn best_of(
    data: &DenseMatrix,
    rank: usize,
    seed: u64,
    trials: std::ops::Range<usize>,
) -> Result<(f64, FactorPair)> {
    let best = trials
        .into_par_iter()
        .map(|t| sampling_trial(data, rank, seed, t).map(|(e, f)| (e, t, f)))
        .try_reduce_with(|a, b| {
            let keep_a = a.0 < b.0 || (a.0 == b.0 && a.1 < b.1);
            Ok(if keep_a { a } else { b })
        })
        .expect("non-empty trial range")?;
    Ok((best.0, best.2))
}

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn sampling_trial(
    data: &DenseMatrix,
    rank: usize,
    seed: u64,
    trial: usize,
) -> Result<(f64, FactorPair)> {
    let mut rng = trial_rng(seed, trial);
    let n = data.cols();
    let mut columns = data.select_columns(&sample(&mut rng, n, rank).into_vec())?;
    let mut gram = columns.transposed_matmul(&columns)?;
    let mut redraws = 0;
    while !is_well_conditioned(&gram) && redraws < MAX_REDRAWS {
        columns = data.select_columns(&sample(&mut rng, n, rank).into_vec())?;
        gram = columns.transposed_matmul(&columns)?;
        redraws += 1;
    }
    let right = fit_right_factor(data, &columns)?;
    let factors = FactorPair::new(columns, right)?;
    let err = Norm::L1.distance(data, &factors.product()?)?;
    Ok((err, factors))
}

fn is_well_conditioned(gram: &DenseMatrix) -> bool {
    let r = gram.rows();
    let trace: f64 = (0..r).map(|i| gram.get(i, i)).sum();
    trace > 0.0 && cholesky(gram.as_slice(), r, 1e-12 * trace).is_some()
}

/// Row `j` of `V` minimizes `|M[:, j] − U·v|₁`, independently for every `j`.
fn fit_right_factor(data: &DenseMatrix, basis: &DenseMatrix) -> Result<DenseMatrix> {
    let (_, n) = data.shape();
    let r = basis.cols();
    let mut v = Vec::with_capacity(n * r);
    for j in 0..n {
        v.extend(irls_l1_fit(basis, &data.column(j)));
    }
    DenseMatrix::new(n, r, v)
}

/// Approximate `argmin_v Σ_i |y_i − (A·v)_i|` by iteratively reweighted least
/// squares with weights `1/max(|residual|, δ)`. Returns the best iterate seen.
pub fn irls_l1_fit(basis: &DenseMatrix, target: &[f64]) -> Vec<f64> {
    let (m, r) = basis.shape();
    assert_eq!(target.len(), m, "target length must match basis rows");
    let a = basis.as_slice();
    let mut weights = vec![1.0; m];
    let mut best: Option<(f64, Vec<f64>)> = None;
    for _ in 0..=IRLS_ITERATIONS {
        let v = weighted_least_squares(a, m, r, target, &weights);
        let mut l1 = 0.0;
        for i in 0..m {
            let fitted: f64 = a[i * r..(i + 1) * r]
                .iter()
                .zip(&v)
                .map(|(x, y)| x * y)
                .sum();
            let res = target[i] - fitted;
            l1 += res.abs();
            weights[i] = 1.0 / res.abs().max(IRLS_DELTA);
        }
        if !l1.is_finite() {
            break;
        }
        if best.as_ref().is_none_or(|b| l1 < b.0) {
            best = Some((l1, v));
        }
    }
    best.map(|b| b.1).unwrap_or_else(|| vec![0.0; r])
}

/// Solves `(AᵀWA)v = AᵀWy` by Cholesky, or by pseudo-inverse when the normal
/// matrix is singular.
fn weighted_least_squares(a: &[f64], m: usize, r: usize, y: &[f64], w: &[f64]) -> Vec<f64> {
    let mut normal = vec![0.0; r * r];
    let mut rhs = vec![0.0; r];
    for i in 0..m {
        let row = &a[i * r..(i + 1) * r];
        let wi = w[i];
        for p in 0..r {
            let wp = wi * row[p];
            rhs[p] += wp * y[i];
            for q in 0..r {
                normal[p * r + q] += wp * row[q];
            }
        }
    }
    let trace: f64 = (0..r).map(|i| normal[i * r + i]).sum();
    if let Some(l) = cholesky(&normal, r, 1e-14 * trace.max(f64::MIN_POSITIVE)) {
        cholesky_solve(&l, r, &rhs)
    } else {
        pinv_solve(&normal, r, &rhs)
    }
}

/// Lower-triangular factor, or `None` when a pivot drops below `floor`.
fn cholesky(a: &[f64], r: usize, floor: f64) -> Option<Vec<f64>> {
    let mut l = vec![0.0; r * r];
    for j in 0..r {
        let mut d = a[j * r + j];
        for k in 0..j {
            d -= l[j * r + k] * l[j * r + k];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l[j * r + j] = d;
        for i in j + 1..r {
            let mut s = a[i * r + j];
            for k in 0..j {
                s -= l[i * r + k] * l[j * r + k];
            }
            l[i * r + j] = s / d;
        }
    }
    Some(l)
}

fn cholesky_solve(l: &[f64], r: usize, b: &[f64]) -> Vec<f64> {
    let mut z = b.to_vec();
    for i in 0..r {
        for k in 0..i {
            z[i] -= l[i * r + k] * z[k];
        }
        z[i] /= l[i * r + i];
    }
    for i in (0..r).rev() {
        for k in i + 1..r {
            z[i] -= l[k * r + i] * z[k];
        }
        z[i] /= l[i * r + i];
    }
    z
}

fn pinv_solve(a: &[f64], r: usize, b: &[f64]) -> Vec<f64> {
    let Ok(mat) = DenseMatrix::new(r, r, a.to_vec()) else {
        return vec![0.0; r];
    };
    let svd = thin_svd(&mat);
    let cutoff = svd.singulars[0] * 1e-12 * r as f64;
    let mut out = vec![0.0; r];
    for (k, &s) in svd.singulars.iter().enumerate() {
        if s <= cutoff || s == 0.0 {
            continue;
        }
        let coef: f64 = (0..r).map(|i| svd.left.get(i, k) * b[i]).sum::<f64>() / s;
        for (i, o) in out.iter_mut().enumerate() {
            *o += coef * svd.right.get(i, k);
        }
    }
    out
}
