//! Low-rank approximation in the entrywise ℓ1 and ℓ∞ norms.
//!
//! The non-smooth problem `min_{U,V} |M − U·Vᵀ|_p` is replaced by a smooth
//! surrogate (Charbonnier for ℓ1, logsumexp for ℓ∞) plus a small ridge term,
//! and the surrogate is minimized by bi-factored gradient descent directly on
//! the factors `U` and `V`.
//!
//! ```
//! use lplr::{solve_l1, DenseMatrix, ParamMode, PracticalParams};
//!
//! let m = DenseMatrix::from_fn(6, 5, |i, j| ((i * 5 + j) % 7) as f64 / 7.0).unwrap();
//! let mode = ParamMode::Practical(PracticalParams { iterations: 200, ..Default::default() });
//! let report = solve_l1(&m, 2, &mode).unwrap();
//! assert!(report.final_error().is_finite());
//! ```

pub mod baselines;
pub mod bfgd;
pub mod error;
pub mod matrix;
pub mod objective;
pub mod smoothers;
pub mod solvers;

pub use baselines::{column_sampling_l1, svd_baseline, BaselineMethod, BaselineResult};
pub use bfgd::{
    dist_to_target, gradient_init, run_bfgd, run_bfgd_from, step_size, svd_init, Init, SolveReport,
    SolverConfig, Termination, UpdateRule,
};
pub use error::{Error, Result};
pub use matrix::{
    entrywise_l1_norm, entrywise_linf_norm, frobenius_norm, hadamard, spectral_norm, truncated_svd,
    DenseMatrix, FactorPair, Norm, TruncatedSvd,
};
pub use objective::SmoothedObjective;
pub use smoothers::{lipschitz_constant, SmootherKind, SmoothingParam};
pub use solvers::{
    derive_l1_schedule, derive_linf_schedule, solve, solve_l1, solve_linf, ParamMode,
    PracticalParams, Schedule, SolveOptions, TheoryParams,
};
