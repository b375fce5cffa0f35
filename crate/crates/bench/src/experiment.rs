//! Monte Carlo experiment runner.

use std::fmt;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use lplr::baselines::column_sampling_l1_timed;
use lplr::{
    column_sampling_l1, solve, svd_baseline, DenseMatrix, Norm, ParamMode, PracticalParams,
    SolveOptions, TheoryParams,
};
use rayon::prelude::*;

use crate::gen::{gen_quantized, gen_sign, gen_uniform};
use crate::mtx::{load_matrix_market, MtxError};

#[derive(Clone, Debug, PartialEq)]
pub enum Generator {
    UniformRandom {
        m: usize,
        n: usize,
    },
    SignRandom {
        m: usize,
        n: usize,
    },
    /// Rounded Gaussian rank-`r_true` product; `None` uses each target rank.
    QuantizedLowRank {
        m: usize,
        n: usize,
        r_true: Option<usize>,
    },
    FromFile(PathBuf),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    L1Solver,
    LinfSolver,
    SvdBaseline,
    ColumnSampling,
}

impl Method {
    pub const ALL: [Method; 4] = [
        Method::L1Solver,
        Method::LinfSolver,
        Method::SvdBaseline,
        Method::ColumnSampling,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::L1Solver => "l1",
            Method::LinfSolver => "linf",
            Method::SvdBaseline => "svd",
            Method::ColumnSampling => "sampling",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Practical-mode values that replace the per-norm defaults
/// ([`PracticalParams::default`] for ℓ1, [`PracticalParams::linf_default`] for ℓ∞).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct PracticalOverrides {
    pub tau: Option<f64>,
    pub lambda: Option<f64>,
    pub iterations: Option<usize>,
    pub step_constant: Option<f64>,
}

impl PracticalOverrides {
    pub fn resolve(&self, norm: Norm) -> PracticalParams {
        let base = match norm {
            Norm::Linf => PracticalParams::linf_default(),
            _ => PracticalParams::default(),
        };
        PracticalParams {
            tau: self.tau.unwrap_or(base.tau),
            lambda: self.lambda.unwrap_or(base.lambda),
            iterations: self.iterations.unwrap_or(base.iterations),
            step_constant: self.step_constant.unwrap_or(base.step_constant),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum ExperimentMode {
    Practical(PracticalOverrides),
    /// Theory schedules with OPT, ‖X⋆‖_F² and σ_r estimated from the rank-r
    /// SVD of each instance (its ℓp error upper-bounds OPT).
    Theory {
        epsilon: f64,
    },
}

/// How many column-sampling trials to spend.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SamplingBudget {
    Trials(usize),
    /// At least the wall time of the ℓ1 solver on the same instance; falls
    /// back to `fallback` trials when the ℓ1 solver is not run or fails.
    /// Wall-clock dependent, so results are not reproducible.
    TimeMatched {
        fallback: usize,
    },
}

pub const DEFAULT_SAMPLING_TRIALS: usize = 200;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentSpec {
    pub generator: Generator,
    pub ranks: Vec<usize>,
    pub trials: usize,
    pub methods: Vec<Method>,
    pub mode: ExperimentMode,
    pub seed: u64,
    /// Norm the SVD baseline is scored in.
    pub baseline_norm: Norm,
    pub sampling: SamplingBudget,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
    pub solve_options: SolveOptions,
}

impl ExperimentSpec {
    /// Practical mode, fixed sampling trials, default pool. The baseline norm
    /// is ℓ∞ when the ℓ∞ solver is the only solver requested, ℓ1 otherwise.
    pub fn new(
        generator: Generator,
        ranks: Vec<usize>,
        trials: usize,
        methods: Vec<Method>,
        seed: u64,
    ) -> Self {
        let linf_only =
            methods.contains(&Method::LinfSolver) && !methods.contains(&Method::L1Solver);
        Self {
            baseline_norm: if linf_only { Norm::Linf } else { Norm::L1 },
            generator,
            ranks,
            trials,
            methods,
            mode: ExperimentMode::Practical(PracticalOverrides::default()),
            seed,
            sampling: SamplingBudget::Trials(DEFAULT_SAMPLING_TRIALS),
            workers: None,
            solve_options: SolveOptions::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Failure {
    pub numerical: bool,
    pub message: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRow {
    pub method: Method,
    pub rank: usize,
    pub trial: usize,
    /// Seed of the generated instance.
    pub seed: u64,
    /// `NaN` when the method failed.
    pub lp_error: f64,
    pub wall_time_seconds: f64,
    /// BFGD iterations for the solvers, sampled trials for column sampling.
    pub iterations_run: usize,
    pub failure: Option<Failure>,
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error("invalid experiment: {0}")]
    Invalid(String),
    #[error("loading instance: {0}")]
    Load(#[from] MtxError),
    #[error("building worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Sub-seed for `(rank, trial, stream)`; stream 0 generates the instance.
pub fn sub_seed(seed: u64, rank: usize, trial: usize, stream: u64) -> u64 {
    let mut h = splitmix64(seed);
    for x in [rank as u64, trial as u64, stream] {
        h = splitmix64(h ^ x);
    }
    h
}

/// One generated or loaded input.
#[derive(Clone, Debug)]
pub struct Instance {
    pub data: DenseMatrix,
    pub seed: u64,
    /// `|M − M̃|_∞` for quantized instances.
    pub certificate: Option<f64>,
}

/// Builds the instance for `(rank, trial)`. `loaded` supplies the matrix for
/// [`Generator::FromFile`].
pub fn build_instance(
    spec: &ExperimentSpec,
    rank: usize,
    trial: usize,
    loaded: Option<&DenseMatrix>,
) -> Instance {
    let seed = sub_seed(spec.seed, rank, trial, 0);
    let (data, certificate) = match &spec.generator {
        Generator::UniformRandom { m, n } => (gen_uniform(*m, *n, seed), None),
        Generator::SignRandom { m, n } => (gen_sign(*m, *n, seed), None),
        Generator::QuantizedLowRank { m, n, r_true } => {
            let q = gen_quantized(*m, *n, r_true.unwrap_or(rank), seed);
            (q.data, Some(q.certificate))
        }
        Generator::FromFile(_) => (loaded.expect("file instance loaded").clone(), None),
    };
    Instance {
        data,
        seed,
        certificate,
    }
}

fn validate(spec: &ExperimentSpec, shape: (usize, usize)) -> Result<(), ExperimentError> {
    let invalid = |msg: String| Err(ExperimentError::Invalid(msg));
    if spec.trials == 0 {
        return invalid("trials must be at least 1".into());
    }
    if spec.ranks.is_empty() {
        return invalid("no target ranks".into());
    }
    if spec.methods.is_empty() {
        return invalid("no methods".into());
    }
    let (m, n) = shape;
    if m == 0 || n == 0 {
        return invalid(format!("empty {m}x{n} instance"));
    }
    if let Some(&r) = spec.ranks.iter().find(|&&r| r == 0 || r > m.min(n)) {
        return invalid(format!(
            "rank {r} out of range 1..={} for {m}x{n}",
            m.min(n)
        ));
    }
    if let Generator::QuantizedLowRank {
        r_true: Some(r), ..
    } = spec.generator
    {
        if r == 0 || r > m.min(n) {
            return invalid(format!("hidden rank {r} out of range for {m}x{n}"));
        }
    }
    if let ExperimentMode::Theory { epsilon } = spec.mode {
        if !(epsilon > 0.0 && epsilon.is_finite()) {
            return invalid(format!("epsilon must be positive, got {epsilon}"));
        }
    }
    match spec.sampling {
        SamplingBudget::Trials(0) | SamplingBudget::TimeMatched { fallback: 0 } => {
            invalid("column sampling needs at least one trial".into())
        }
        _ => Ok(()),
    }
}

/// Resolves `mode` for a solver run in `norm` on `data`.
pub fn param_mode(
    mode: ExperimentMode,
    data: &DenseMatrix,
    rank: usize,
    norm: Norm,
) -> lplr::Result<ParamMode> {
    match mode {
        ExperimentMode::Practical(o) => Ok(ParamMode::Practical(o.resolve(norm))),
        ExperimentMode::Theory { epsilon } => {
            let svd = svd_baseline(data, rank, norm)?;
            let xstar = svd.factors.product()?.frobenius_norm_sq();
            let sigma_r = lplr::truncated_svd(data, rank)?.singulars[rank - 1];
            Ok(ParamMode::Theory(TheoryParams::new(
                svd.lp_error,
                xstar,
                sigma_r,
                epsilon,
            )?))
        }
    }
}

struct Outcome {
    lp_error: f64,
    iterations_run: usize,
}

fn run_method(
    spec: &ExperimentSpec,
    method: Method,
    inst: &Instance,
    rank: usize,
    trial: usize,
    l1_time: Option<Duration>,
) -> lplr::Result<Outcome> {
    let data = &inst.data;
    match method {
        Method::L1Solver | Method::LinfSolver => {
            let norm = if method == Method::L1Solver {
                Norm::L1
            } else {
                Norm::Linf
            };
            let mode = param_mode(spec.mode, data, rank, norm)?;
            let report = solve(data, rank, norm, &mode, &spec.solve_options)?;
            Ok(Outcome {
                lp_error: report.final_error(),
                iterations_run: report.iterations_run,
            })
        }
        Method::SvdBaseline => {
            let res = svd_baseline(data, rank, spec.baseline_norm)?;
            Ok(Outcome {
                lp_error: res.lp_error,
                iterations_run: 0,
            })
        }
        Method::ColumnSampling => {
            let seed = sub_seed(spec.seed, rank, trial, 1);
            let res = match (spec.sampling, l1_time) {
                (SamplingBudget::Trials(t), _) => column_sampling_l1(data, rank, t, seed)?,
                (SamplingBudget::TimeMatched { .. }, Some(budget)) => {
                    column_sampling_l1_timed(data, rank, budget, seed)?
                }
                (SamplingBudget::TimeMatched { fallback }, None) => {
                    column_sampling_l1(data, rank, fallback, seed)?
                }
            };
            Ok(Outcome {
                lp_error: res.lp_error,
                iterations_run: res.trials_run,
            })
        }
    }
}

fn run_job(
    spec: &ExperimentSpec,
    methods: &[Method],
    rank: usize,
    trial: usize,
    loaded: Option<&DenseMatrix>,
) -> Vec<ExperimentRow> {
    let inst = build_instance(spec, rank, trial, loaded);
    let mut l1_time = None;
    // Canonical order puts the ℓ1 solver before column sampling so its time
    // is known for the time-matched budget.
    methods
        .iter()
        .map(|&method| {
            let start = Instant::now();
            let result = run_method(spec, method, &inst, rank, trial, l1_time);
            let elapsed = start.elapsed();
            if method == Method::L1Solver && result.is_ok() {
                l1_time = Some(elapsed);
            }
            let (lp_error, iterations_run, failure) = match result {
                Ok(o) => (o.lp_error, o.iterations_run, None),
                Err(e) => (
                    f64::NAN,
                    0,
                    Some(Failure {
                        numerical: e.is_numerical(),
                        message: e.to_string(),
                    }),
                ),
            };
            ExperimentRow {
                method,
                rank,
                trial,
                seed: inst.seed,
                lp_error,
                wall_time_seconds: elapsed.as_secs_f64(),
                iterations_run,
                failure,
            }
        })
        .collect()
}

/// Runs every method on every `(rank, trial)` instance. Rows come back
/// ordered by (method, rank, trial) regardless of completion order; method
/// failures become rows with [`ExperimentRow::failure`] set.
pub fn run_experiment(spec: &ExperimentSpec) -> Result<Vec<ExperimentRow>, ExperimentError> {
    let loaded = match &spec.generator {
        Generator::FromFile(path) => Some(load_matrix_market(path)?),
        _ => None,
    };
    let shape = match (&spec.generator, &loaded) {
        (Generator::UniformRandom { m, n } | Generator::SignRandom { m, n }, _) => (*m, *n),
        (Generator::QuantizedLowRank { m, n, .. }, _) => (*m, *n),
        (_, Some(x)) => x.shape(),
        (Generator::FromFile(_), None) => unreachable!("file generator always loads"),
    };
    validate(spec, shape)?;

    let mut methods = spec.methods.clone();
    methods.sort();
    methods.dedup();
    let mut ranks = spec.ranks.clone();
    ranks.sort_unstable();
    ranks.dedup();
    let jobs: Vec<(usize, usize)> = ranks
        .iter()
        .flat_map(|&r| (0..spec.trials).map(move |t| (r, t)))
        .collect();

    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(w) = spec.workers {
        pool = pool.num_threads(w.max(1));
    }
    let pool = pool.build()?;
    let per_job: Vec<Vec<ExperimentRow>> = pool.install(|| {
        jobs.par_iter()
            .map(|&(r, t)| run_job(spec, &methods, r, t, loaded.as_ref()))
            .collect()
    });

    let mut rows: Vec<ExperimentRow> = per_job.into_iter().flatten().collect();
    rows.sort_by_key(|row| (row.method, row.rank, row.trial));
    Ok(rows)
}
