//! Bi-factored gradient descent on `f(U·Vᵀ)`.
//!
//! Each iteration forms `G = ∇f(U·Vᵀ)` once, picks the step
//!
//! ```text
//! η = C / (15·L̂·σ₁([U; V])² + 3·‖G‖₂)
//! ```
//!
//! and moves both factors at once, either plainly (Rule 1) or with the
//! balancing correction `γ·U(UᵀU − VᵀV)` that keeps the two factors equally
//! weighted (Rule 2, for strongly convex `f`).

use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::matrix::{thin_svd, truncated_svd, DenseMatrix, FactorPair, PowerIteration};
use crate::objective::{factor_gradients, SmoothedObjective};

/// Relative tolerance for the spectral norms inside the step size.
pub const STEP_NORM_TOLERANCE: f64 = 1e-6;

const STALL_RELATIVE_CHANGE: f64 = 1e-12;
const STALL_WINDOW: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum UpdateRule {
    /// Plain simultaneous gradient step on `U` and `V`.
    Rule1,
    /// Gradient step plus the `γ`-weighted balancing term.
    Rule2,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Init {
    /// Balanced rank-r factors of `−∇f(0)/L̂`.
    Gradient,
    /// Balanced factors of the best rank-r Frobenius approximation of `M`.
    Svd,
}

/// Which matrix norm of `∇f` enters the step size.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum GradientNorm {
    Spectral,
    Frobenius,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Termination {
    BudgetExhausted,
    /// Relative objective change stayed below 1e-12 for 100 iterations.
    Stalled,
    /// Factors and gradient were both zero; nothing can move.
    Stationary,
}

#[derive(Clone, Debug)]
pub struct SolverConfig {
    pub rank: usize,
    pub iterations: usize,
    /// Rule 2 balancing weight.
    pub gamma: f64,
    /// Step constant `C`.
    pub step_constant: f64,
    /// Lipschitz estimate `L̂` of `∇f`.
    pub lipschitz: f64,
    pub rule: UpdateRule,
    pub init: Init,
    pub trace_every: usize,
    pub gradient_norm: GradientNorm,
    pub stall_detection: bool,
    /// When set, abort if the objective rises by more than this (relative to
    /// `max(1, |f|)`) in a single step. Costs one objective evaluation per
    /// iteration.
    pub descent_tolerance: Option<f64>,
}

impl SolverConfig {
    pub fn new(rank: usize, iterations: usize, lipschitz: f64) -> Self {
        Self {
            rank,
            iterations,
            gamma: 0.25,
            step_constant: 1.0,
            lipschitz,
            rule: UpdateRule::Rule1,
            init: Init::Gradient,
            trace_every: 100,
            gradient_norm: GradientNorm::Spectral,
            stall_detection: false,
            descent_tolerance: None,
        }
    }

    /// `L̂` from the objective; Rule 2 when the ridge term makes it strongly
    /// convex, Rule 1 otherwise.
    pub fn for_objective(obj: &SmoothedObjective, rank: usize, iterations: usize) -> Self {
        let mut cfg = Self::new(rank, iterations, obj.lipschitz());
        cfg.rule = if obj.lambda() > 0.0 {
            UpdateRule::Rule2
        } else {
            UpdateRule::Rule1
        };
        cfg
    }

    pub fn validate(&self, m: usize, n: usize) -> Result<()> {
        if self.rank == 0 || self.rank > m.min(n) {
            return Err(Error::invalid(format!(
                "rank {} out of range 1..={} for a {m}x{n} problem",
                self.rank,
                m.min(n)
            )));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid(format!(
                "gamma must be >= 0, got {}",
                self.gamma
            )));
        }
        if !(self.step_constant > 0.0 && self.step_constant.is_finite()) {
            return Err(Error::invalid(format!(
                "step constant must be positive, got {}",
                self.step_constant
            )));
        }
        if !(self.lipschitz > 0.0 && self.lipschitz.is_finite()) {
            return Err(Error::invalid(format!(
                "Lipschitz estimate must be positive, got {}",
                self.lipschitz
            )));
        }
        if self.trace_every == 0 {
            return Err(Error::invalid("trace_every must be at least 1"));
        }
        Ok(())
    }
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub factors: FactorPair,
    /// `(iteration, f(U·Vᵀ))`, sampled every `trace_every` iterations plus the
    /// start and the end.
    pub objective_trace: Vec<(usize, f64)>,
    /// `(iteration, ‖M − U·Vᵀ‖_p)` at the same points.
    pub error_trace: Vec<(usize, f64)>,
    /// `(iteration, η)` for the step that produced that iterate.
    pub step_trace: Vec<(usize, f64)>,
    pub iterations_run: usize,
    pub wall_time: Duration,
    pub termination: Termination,
}

impl SolveReport {
    pub fn final_objective(&self) -> f64 {
        self.objective_trace.last().map(|p| p.1).unwrap_or(f64::NAN)
    }

    pub fn final_error(&self) -> f64 {
        self.error_trace.last().map(|p| p.1).unwrap_or(f64::NAN)
    }
}

/// `X₀ = −∇f(0)/L̂`, split into balanced rank-r factors.
pub fn gradient_init(obj: &SmoothedObjective, rank: usize, lipschitz: f64) -> Result<FactorPair> {
    let (m, n) = obj.shape();
    if !(lipschitz > 0.0) {
        return Err(Error::invalid(format!(
            "Lipschitz estimate must be positive, got {lipschitz}"
        )));
    }
    let x0 = obj
        .grad_x(&DenseMatrix::zeros(m, n))?
        .scale(-1.0 / lipschitz)?;
    balanced_factors(&x0, rank)
}

/// Balanced factors of the best rank-r Frobenius approximation of `data`.
pub fn svd_init(data: &DenseMatrix, rank: usize) -> Result<FactorPair> {
    balanced_factors(data, rank)
}

fn balanced_factors(x: &DenseMatrix, rank: usize) -> Result<FactorPair> {
    let (m, n) = x.shape();
    if rank == 0 || rank > m.min(n) {
        return Err(Error::invalid(format!(
            "rank {rank} out of range 1..={} for a {m}x{n} matrix",
            m.min(n)
        )));
    }
    if x.is_zero() {
        return Ok(FactorPair::zeros(m, n, rank));
    }
    let svd = truncated_svd(x, rank)?;
    Ok(FactorPair::balanced_from_svd(&svd))
}

/// Spectral-norm estimators reused across iterations.
#[derive(Debug, Default)]
struct StepSizer {
    stack: PowerIteration,
    grad: PowerIteration,
}

impl StepSizer {
    fn step(
        &mut self,
        factors: &FactorPair,
        grad: &DenseMatrix,
        step_constant: f64,
        lipschitz: f64,
        norm: GradientNorm,
    ) -> Result<f64> {
        // σ₁([U; V])² is the top eigenvalue of UᵀU + VᵀV.
        let gram = factors
            .u()
            .transposed_matmul(factors.u())?
            .add(&factors.v().transposed_matmul(factors.v())?)?;
        let stack_sq = self.stack.top_eigenvalue_psd(&gram, STEP_NORM_TOLERANCE)?;
        let grad_norm = match norm {
            GradientNorm::Spectral => self.grad.spectral_norm(grad, STEP_NORM_TOLERANCE)?,
            GradientNorm::Frobenius => grad.frobenius_norm(),
        };
        let denom = 15.0 * lipschitz * stack_sq + 3.0 * grad_norm;
        if denom == 0.0 {
            return Err(Error::StationaryStart);
        }
        Ok(step_constant / denom)
    }
}

/// `η = C / (15·L̂·σ₁([U; V])² + 3·σ₁(∇f))`.
pub fn step_size(
    factors: &FactorPair,
    grad_x: &DenseMatrix,
    step_constant: f64,
    lipschitz: f64,
) -> Result<f64> {
    StepSizer::default().step(
        factors,
        grad_x,
        step_constant,
        lipschitz,
        GradientNorm::Spectral,
    )
}

fn rule1_step(factors: &FactorPair, g: &DenseMatrix, eta: f64) -> Result<FactorPair> {
    let (gu, gv) = factor_gradients(g, factors)?;
    FactorPair::new(
        factors.u().add_scaled(-eta, &gu)?,
        factors.v().add_scaled(-eta, &gv)?,
    )
}

fn rule2_step(factors: &FactorPair, g: &DenseMatrix, eta: f64, gamma: f64) -> Result<FactorPair> {
    if gamma == 0.0 {
        return rule1_step(factors, g, eta);
    }
    let (gu, gv) = factor_gradients(g, factors)?;
    let balance = factors.imbalance()?;
    let du = gu.add_scaled(gamma, &factors.u().matmul(&balance)?)?;
    let dv = gv.add_scaled(-gamma, &factors.v().matmul(&balance)?)?;
    FactorPair::new(
        factors.u().add_scaled(-eta, &du)?,
        factors.v().add_scaled(-eta, &dv)?,
    )
}

/// `U⁺ = U − η·G·V`, `V⁺ = V − η·Gᵀ·U` with `G = ∇f(U·Vᵀ)`.
pub fn rule1_update(factors: &FactorPair, obj: &SmoothedObjective, eta: f64) -> Result<FactorPair> {
    check_eta(eta)?;
    let g = obj.grad_x(&factors.product()?)?;
    rule1_step(factors, &g, eta)
}

/// Rule 1 plus `∓ηγ·(U, V)·(UᵀU − VᵀV)`. With `γ = 0` this is exactly Rule 1.
pub fn rule2_update(
    factors: &FactorPair,
    obj: &SmoothedObjective,
    eta: f64,
    gamma: f64,
) -> Result<FactorPair> {
    check_eta(eta)?;
    if !(gamma >= 0.0) {
        return Err(Error::invalid(format!("gamma must be >= 0, got {gamma}")));
    }
    let g = obj.grad_x(&factors.product()?)?;
    rule2_step(factors, &g, eta, gamma)
}

fn check_eta(eta: f64) -> Result<()> {
    if eta > 0.0 && eta.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!(
            "step size must be positive, got {eta}"
        )))
    }
}

/// Runs the configured initialization followed by `cfg.iterations` steps.
pub fn run_bfgd(obj: &SmoothedObjective, cfg: &SolverConfig) -> Result<SolveReport> {
    let (m, n) = obj.shape();
    cfg.validate(m, n)?;
    let init = match cfg.init {
        Init::Gradient => gradient_init(obj, cfg.rank, cfg.lipschitz)?,
        Init::Svd => svd_init(obj.data(), cfg.rank)?,
    };
    run_bfgd_from(obj, cfg, init)
}

/// Like [`run_bfgd`] but starting from caller-supplied factors.
pub fn run_bfgd_from(
    obj: &SmoothedObjective,
    cfg: &SolverConfig,
    init: FactorPair,
) -> Result<SolveReport> {
    let (m, n) = obj.shape();
    cfg.validate(m, n)?;
    if init.product_shape() != (m, n) || init.rank() != cfg.rank {
        return Err(Error::invalid(format!(
            "initial factors represent a rank-{} {:?} matrix, expected rank {} {m}x{n}",
            init.rank(),
            init.product_shape(),
            cfg.rank
        )));
    }

    let start = Instant::now();
    let mut factors = init;
    let mut objective_trace = Vec::new();
    let mut error_trace = Vec::new();
    let mut step_trace = Vec::new();

    let x0 = factors.product()?;
    let mut prev_value = obj.value(&x0)?;
    if !prev_value.is_finite() {
        return Err(Error::NonFiniteObjective {
            iteration: 0,
            last_finite: Box::new(factors),
        });
    }
    objective_trace.push((0, prev_value));
    error_trace.push((0, obj.error(&x0)?));

    let monitoring = cfg.descent_tolerance.is_some() || cfg.stall_detection;
    let mut sizer = StepSizer::default();
    let mut termination = Termination::BudgetExhausted;
    let mut iterations_run = 0;
    let mut stall_count = 0;
    let mut last_traced = 0;
    let mut x = x0;

    for i in 0..cfg.iterations {
        let it = i + 1;
        let non_finite = |factors: &FactorPair| Error::NonFiniteObjective {
            iteration: it,
            last_finite: Box::new(factors.clone()),
        };
        let g = match obj.grad_x(&x) {
            Ok(g) => g,
            Err(Error::NonFinite(_)) => return Err(non_finite(&factors)),
            Err(e) => return Err(e),
        };
        let eta = match sizer.step(
            &factors,
            &g,
            cfg.step_constant,
            cfg.lipschitz,
            cfg.gradient_norm,
        ) {
            Ok(eta) => eta,
            Err(Error::StationaryStart) => {
                termination = Termination::Stationary;
                break;
            }
            Err(Error::NonFinite(_)) => return Err(non_finite(&factors)),
            Err(e) => return Err(e),
        };
        let next = match cfg.rule {
            UpdateRule::Rule1 => rule1_step(&factors, &g, eta),
            UpdateRule::Rule2 => rule2_step(&factors, &g, eta, cfg.gamma),
        };
        let next = match next.and_then(|f| f.product().map(|x| (f, x))) {
            Ok(pair) => pair,
            Err(Error::NonFinite(_)) => return Err(non_finite(&factors)),
            Err(e) => return Err(e),
        };

        let traced = it % cfg.trace_every == 0 || it == cfg.iterations;
        if monitoring || traced {
            let value = obj.value(&next.1)?;
            if !value.is_finite() {
                return Err(non_finite(&factors));
            }
            if let Some(tol) = cfg.descent_tolerance {
                if value > prev_value + tol * prev_value.abs().max(1.0) {
                    return Err(Error::DescentViolation {
                        iteration: it,
                        previous: prev_value,
                        current: value,
                        last: Box::new(factors),
                    });
                }
            }
            if cfg.stall_detection {
                let change = (prev_value - value).abs();
                if change <= STALL_RELATIVE_CHANGE * prev_value.abs().max(f64::MIN_POSITIVE) {
                    stall_count += 1;
                } else {
                    stall_count = 0;
                }
            }
            if traced || (cfg.stall_detection && stall_count >= STALL_WINDOW) {
                objective_trace.push((it, value));
                error_trace.push((it, obj.error(&next.1)?));
                step_trace.push((it, eta));
                last_traced = it;
            }
            prev_value = value;
        }
        (factors, x) = next;
        iterations_run = it;
        if cfg.stall_detection && stall_count >= STALL_WINDOW {
            termination = Termination::Stalled;
            break;
        }
    }

    if iterations_run != last_traced {
        objective_trace.push((iterations_run, obj.value(&x)?));
        error_trace.push((iterations_run, obj.error(&x)?));
    }

    Ok(SolveReport {
        factors,
        objective_trace,
        error_trace,
        step_trace,
        iterations_run,
        wall_time: start.elapsed(),
        termination,
    })
}

/// Distance from `[U; V]` to the closest balanced factorization of the best
/// rank-r approximation of `target`, over the orthogonal ambiguity `R`:
/// `min_R ‖[U; V] − [Û; V̂]·R‖_F`, solved by orthogonal Procrustes.
pub fn dist_to_target(factors: &FactorPair, target: &DenseMatrix, rank: usize) -> Result<f64> {
    if factors.product_shape() != target.shape() {
        return Err(Error::ShapeMismatch {
            op: "dist_to_target",
            left: factors.product_shape(),
            right: target.shape(),
        });
    }
    if factors.rank() != rank {
        return Err(Error::invalid(format!(
            "factors have rank {}, target rank is {rank}",
            factors.rank()
        )));
    }
    let star = balanced_factors(target, rank)?.stacked();
    let current = factors.stacked();
    let cross = star.transposed_matmul(&current)?;
    let polar = thin_svd(&cross);
    let rotation = polar.left.matmul_transposed(&polar.right)?;
    Ok(current.sub(&star.matmul(&rotation)?)?.frobenius_norm())
}
