//! Outer ℓ1 / ℓ∞ solvers: choose `τ`, `λ`, `L̂` and the iteration budget,
//! build the smoothed objective and hand it to BFGD.
//!
//! Theory mode derives the parameters from `OPT`, `ε`, `‖X⋆‖_F²` and
//! `σ_r(X̂⋆_r)` so that smoothing, ridge and optimization error each cost at
//! most `ε·OPT/3`. Practical mode uses fixed constants.

use crate::bfgd::{run_bfgd, GradientNorm, Init, SolveReport, SolverConfig, UpdateRule};
use crate::error::{Error, Result};
use crate::matrix::{DenseMatrix, Norm};
use crate::objective::SmoothedObjective;
use crate::smoothers::{lipschitz_constant, SmootherKind, SmoothingParam};

/// Upper limit on a theory-mode iteration budget.
pub const MAX_SCHEDULED_ITERATIONS: usize = 1_000_000;

pub const DEFAULT_ITERATION_CONSTANT: f64 = 10.0;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TheoryParams {
    /// `OPT`, or an upper bound on it.
    pub opt_estimate: f64,
    /// `‖X⋆‖_F²`.
    pub xstar_fro_sq: f64,
    /// `σ_r(X̂⋆_r)`.
    pub sigma_r_hat: f64,
    pub epsilon: f64,
    /// Constant hidden in the iteration bound.
    pub iteration_constant: f64,
}

impl TheoryParams {
    pub fn new(
        opt_estimate: f64,
        xstar_fro_sq: f64,
        sigma_r_hat: f64,
        epsilon: f64,
    ) -> Result<Self> {
        let p = Self {
            opt_estimate,
            xstar_fro_sq,
            sigma_r_hat,
            epsilon,
            iteration_constant: DEFAULT_ITERATION_CONSTANT,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("OPT", self.opt_estimate),
            ("‖X⋆‖_F²", self.xstar_fro_sq),
            ("σ_r", self.sigma_r_hat),
            ("ε", self.epsilon),
            ("iteration constant", self.iteration_constant),
        ];
        for (name, v) in fields {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive, got {v}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PracticalParams {
    pub tau: f64,
    pub lambda: f64,
    pub iterations: usize,
    /// Step constant `C` of the BFGD step size.
    pub step_constant: f64,
}

impl Default for PracticalParams {
    fn default() -> Self {
        Self {
            tau: 1e-3,
            lambda: 1e-3,
            iterations: 40_000,
            step_constant: 1.0,
        }
    }
}

impl PracticalParams {
    /// Defaults for the ℓ∞ solver.
    ///
    /// The ridge weight is off: with `λ > 0` the regularized minimizer shrinks
    /// `X` until `λ‖X‖_F² ≤ |X|_∞`, which on unit-scale entries costs far more
    /// in ℓ∞ error than the ridge buys. The step is `η ∝ C·τ`; at `C = 1`,
    /// `τ = 1e-3` the iterate barely leaves the SVD start within 4·10⁴ steps,
    /// so `C·τ` is raised to 0.1 (the descent monitor stays quiet there).
    pub fn linf_default() -> Self {
        Self {
            tau: 5e-3,
            lambda: 0.0,
            iterations: 40_000,
            step_constant: 20.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ParamMode {
    Theory(TheoryParams),
    Practical(PracticalParams),
}

/// Parameters handed to BFGD.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub tau: SmoothingParam,
    pub lambda: f64,
    pub lipschitz: f64,
    pub iterations: usize,
    pub step_constant: f64,
}

fn iteration_budget(p: &TheoryParams, size_term: f64) -> usize {
    let eps_opt = p.epsilon * p.opt_estimate;
    let t = p.iteration_constant
        * p.sigma_r_hat
        * (size_term / (eps_opt * eps_opt) + 1.0 / p.xstar_fro_sq);
    if t.is_finite() {
        (t.ceil() as usize).clamp(1, MAX_SCHEDULED_ITERATIONS)
    } else {
        MAX_SCHEDULED_ITERATIONS
    }
}

fn ridge(p: &TheoryParams) -> f64 {
    2.0 * p.epsilon * p.opt_estimate / (3.0 * p.xstar_fro_sq)
}

/// `τ = ε·OPT/(3mn)`, `λ = 2ε·OPT/(3‖X⋆‖_F²)`, `L̂ = 1/τ + λ`,
/// `T = c₀·σ_r·(mn/(ε·OPT)² + 1/‖X⋆‖_F²)`.
pub fn derive_l1_schedule(p: &TheoryParams, m: usize, n: usize) -> Result<Schedule> {
    p.validate()?;
    let mn = (m * n) as f64;
    let tau = SmoothingParam::new(p.epsilon * p.opt_estimate / (3.0 * mn))?;
    let lambda = ridge(p);
    Ok(Schedule {
        tau,
        lambda,
        lipschitz: lipschitz_constant(SmootherKind::Charbonnier, tau) + lambda,
        iterations: iteration_budget(p, mn),
        step_constant: 1.0,
    })
}

/// `τ = ε·OPT/(3·log(2mn))`; `λ`, `L̂` as for ℓ1; `T` with `mn` replaced by
/// `log(mn)`.
pub fn derive_linf_schedule(p: &TheoryParams, m: usize, n: usize) -> Result<Schedule> {
    p.validate()?;
    let mn = (m * n) as f64;
    let tau = SmoothingParam::new(p.epsilon * p.opt_estimate / (3.0 * (2.0 * mn).ln()))?;
    let lambda = ridge(p);
    Ok(Schedule {
        tau,
        lambda,
        lipschitz: lipschitz_constant(SmootherKind::LogSumExp, tau) + lambda,
        iterations: iteration_budget(p, mn.ln().max(f64::MIN_POSITIVE)),
        step_constant: 1.0,
    })
}

fn practical_schedule(p: &PracticalParams, kind: SmootherKind) -> Result<Schedule> {
    let tau = SmoothingParam::new(p.tau)?;
    if !(p.lambda >= 0.0) {
        return Err(Error::invalid(format!(
            "lambda must be >= 0, got {}",
            p.lambda
        )));
    }
    if !(p.step_constant > 0.0 && p.step_constant.is_finite()) {
        return Err(Error::invalid(format!(
            "step constant must be positive, got {}",
            p.step_constant
        )));
    }
    Ok(Schedule {
        tau,
        lambda: p.lambda,
        lipschitz: lipschitz_constant(kind, tau) + p.lambda,
        iterations: p.iterations,
        step_constant: p.step_constant,
    })
}

/// Knobs of the inner BFGD run that the outer solvers leave at defaults.
#[derive(Clone, Debug, PartialEq)]
pub struct SolveOptions {
    pub init: Init,
    /// `None` picks Rule 2 when `λ > 0`, Rule 1 otherwise.
    pub rule: Option<UpdateRule>,
    pub gamma: f64,
    /// Overrides the schedule's step constant.
    pub step_constant: Option<f64>,
    pub trace_every: usize,
    pub gradient_norm: GradientNorm,
    pub stall_detection: bool,
    pub descent_tolerance: Option<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            init: Init::Svd,
            rule: None,
            gamma: 0.25,
            step_constant: None,
            trace_every: 100,
            gradient_norm: GradientNorm::Spectral,
            stall_detection: false,
            descent_tolerance: None,
        }
    }
}

/// Schedule for `norm` ∈ {ℓ1, ℓ∞} under `mode` on an m×n input.
pub fn schedule_for(norm: Norm, mode: &ParamMode, m: usize, n: usize) -> Result<Schedule> {
    let kind = smoother_for(norm)?;
    match mode {
        ParamMode::Theory(p) => match norm {
            Norm::L1 => derive_l1_schedule(p, m, n),
            _ => derive_linf_schedule(p, m, n),
        },
        ParamMode::Practical(p) => practical_schedule(p, kind),
    }
}

fn smoother_for(norm: Norm) -> Result<SmootherKind> {
    match norm {
        Norm::L1 => Ok(SmootherKind::Charbonnier),
        Norm::Linf => Ok(SmootherKind::LogSumExp),
        Norm::Frobenius => Err(Error::invalid(
            "the Frobenius problem is solved exactly by the SVD",
        )),
    }
}

/// Smoothed rank-r approximation in `norm`; the report's error trace carries
/// the true `‖M − U·Vᵀ‖_p`.
pub fn solve(
    data: &DenseMatrix,
    rank: usize,
    norm: Norm,
    mode: &ParamMode,
    opts: &SolveOptions,
) -> Result<SolveReport> {
    let (m, n) = data.shape();
    if rank == 0 || rank > m.min(n) {
        return Err(Error::invalid(format!(
            "rank {rank} out of range 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    let kind = smoother_for(norm)?;
    let schedule = schedule_for(norm, mode, m, n)?;
    let obj = SmoothedObjective::new(data.clone(), kind, schedule.tau, schedule.lambda)?;
    let mut cfg = SolverConfig::for_objective(&obj, rank, schedule.iterations);
    cfg.lipschitz = schedule.lipschitz;
    if let Some(rule) = opts.rule {
        cfg.rule = rule;
    }
    cfg.init = opts.init;
    cfg.gamma = opts.gamma;
    cfg.step_constant = opts.step_constant.unwrap_or(schedule.step_constant);
    cfg.trace_every = opts.trace_every;
    cfg.gradient_norm = opts.gradient_norm;
    cfg.stall_detection = opts.stall_detection;
    cfg.descent_tolerance = opts.descent_tolerance;
    run_bfgd(&obj, &cfg)
}

/// Charbonnier-smoothed ℓ1 low-rank approximation.
pub fn solve_l1(data: &DenseMatrix, rank: usize, mode: &ParamMode) -> Result<SolveReport> {
    solve(data, rank, Norm::L1, mode, &SolveOptions::default())
}

/// logsumexp-smoothed ℓ∞ low-rank approximation.
pub fn solve_linf(data: &DenseMatrix, rank: usize, mode: &ParamMode) -> Result<SolveReport> {
    solve(data, rank, Norm::Linf, mode, &SolveOptions::default())
}
