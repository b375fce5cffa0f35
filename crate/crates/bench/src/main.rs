use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use lplr::{solve, svd_baseline, Init, Norm, SolveOptions, SolveReport};
use lplr_bench::experiment::{param_mode, DEFAULT_SAMPLING_TRIALS};
use lplr_bench::output::{format_table, summarize, write_plotdata, write_summary};
use lplr_bench::{
    emit_csv, emit_timing, gen_quantized, gen_sign, gen_uniform, load_matrix_market,
    run_experiment, save_matrix_market, ExperimentError, ExperimentMode, ExperimentSpec, Generator,
    Method, MtxError, PracticalOverrides, SamplingBudget,
};

#[derive(Parser, Debug)]
#[command(
    name = "lplr",
    version,
    about = "Entrywise l1 / l-infinity low-rank approximation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Approximate one matrix and write its convergence trace.
    Solve(SolveArgs),
    /// Run a Monte Carlo experiment and write CSV, summary and plot data.
    Bench(BenchArgs),
    /// Write a synthetic instance in MatrixMarket array format.
    Gen(GenArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum P {
    #[value(name = "1")]
    One,
    #[value(name = "inf")]
    Inf,
}

impl P {
    fn norm(self) -> Norm {
        match self {
            P::One => Norm::L1,
            P::Inf => Norm::Linf,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum InitArg {
    Svd,
    Grad,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Practical,
    Theory,
}

#[derive(clap::Args, Debug)]
struct ParamArgs {
    /// practical: fixed constants; theory: schedules from SVD plug-in estimates.
    #[arg(long, value_enum, default_value = "practical")]
    mode: ModeArg,
    /// Target accuracy for theory mode.
    #[arg(long, default_value_t = 0.5)]
    epsilon: f64,
    /// Smoothing parameter (practical mode).
    #[arg(long)]
    tau: Option<f64>,
    /// Ridge weight (practical mode).
    #[arg(long)]
    lambda: Option<f64>,
    /// Iteration budget (practical mode).
    #[arg(long)]
    iters: Option<usize>,
    /// Step constant C.
    #[arg(long)]
    step_constant: Option<f64>,
}

impl ParamArgs {
    fn experiment_mode(&self) -> ExperimentMode {
        match self.mode {
            ModeArg::Theory => ExperimentMode::Theory {
                epsilon: self.epsilon,
            },
            ModeArg::Practical => ExperimentMode::Practical(PracticalOverrides {
                tau: self.tau,
                lambda: self.lambda,
                iterations: self.iters,
                step_constant: self.step_constant,
            }),
        }
    }
}

#[derive(clap::Args, Debug)]
struct SolveArgs {
    #[arg(long, value_enum)]
    p: P,
    #[arg(long)]
    rank: usize,
    #[command(flatten)]
    params: ParamArgs,
    #[arg(long, value_enum, default_value = "svd")]
    init: InitArg,
    /// Seed for the generated input when --in is absent.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// MatrixMarket input; a uniform random m×n matrix is used otherwise.
    #[arg(long = "in")]
    input: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 30)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    trace_every: usize,
    /// Trace CSV (iteration, objective, error, step size).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum ExperimentArg {
    Uniform,
    Sign,
    Quantized,
    File,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    L1,
    Linf,
    Svd,
    Sampling,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::L1 => Method::L1Solver,
            MethodArg::Linf => Method::LinfSolver,
            MethodArg::Svd => Method::SvdBaseline,
            MethodArg::Sampling => Method::ColumnSampling,
        }
    }
}

#[derive(clap::Args, Debug)]
struct BenchArgs {
    #[arg(long, value_enum)]
    experiment: ExperimentArg,
    /// Rows; defaults to 20 (100 for quantized).
    #[arg(long)]
    m: Option<usize>,
    /// Columns; defaults to 30 (75 for quantized).
    #[arg(long)]
    n: Option<usize>,
    /// Input for --experiment file.
    #[arg(long)]
    file: Option<PathBuf>,
    /// Rank of the hidden product for quantized instances; defaults to each target rank.
    #[arg(long)]
    hidden_rank: Option<usize>,
    /// Target ranks, e.g. "1-5" or "1,2,4".
    #[arg(long, default_value = "1-5", value_parser = parse_ranks)]
    ranks: Ranks,
    #[arg(long, default_value_t = 10)]
    trials: usize,
    /// Defaults to l1,svd,sampling (linf,svd for quantized).
    #[arg(long, value_enum, value_delimiter = ',')]
    methods: Vec<MethodArg>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    params: ParamArgs,
    /// Norm for the SVD baseline's error; defaults to inf when only the linf solver runs.
    #[arg(long, value_enum)]
    baseline_p: Option<P>,
    #[arg(long, default_value_t = DEFAULT_SAMPLING_TRIALS)]
    sampling_trials: usize,
    /// Give column sampling at least the l1 solver's wall time (not reproducible).
    #[arg(long)]
    time_matched: bool,
    #[arg(long)]
    workers: Option<usize>,
    /// Raw CSV path; summary, timing and plot data are written next to it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum GenKind {
    Uniform,
    Sign,
    Quantized,
}

#[derive(clap::Args, Debug)]
struct GenArgs {
    #[arg(long, value_enum)]
    kind: GenKind,
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 30)]
    n: usize,
    /// Hidden rank for quantized instances.
    #[arg(long, default_value_t = 1)]
    rank: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Debug)]
struct Ranks(Vec<usize>);

fn parse_ranks(s: &str) -> Result<Ranks, String> {
    let mut out = Vec::new();
    for part in s.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let num = |t: &str| {
            t.trim()
                .parse::<usize>()
                .map_err(|_| format!("bad rank {t:?}"))
        };
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b) = (num(a)?, num(b)?);
                if a > b {
                    return Err(format!("empty rank range {part:?}"));
                }
                out.extend(a..=b);
            }
            None => out.push(num(part)?),
        }
    }
    if out.is_empty() {
        return Err("no ranks given".into());
    }
    Ok(Ranks(out))
}

/// Bad flag combinations detected after parsing.
#[derive(Debug, thiserror::Error)]
#[error("{0}")]
struct UsageError(String);

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(UsageError(msg.into()).into())
}

fn exit_code(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.is::<UsageError>() {
            return 1;
        }
        if let Some(e) = cause.downcast_ref::<lplr::Error>() {
            return if e.is_numerical() {
                3
            } else if matches!(e, lplr::Error::InvalidArgument(_)) {
                1
            } else {
                2
            };
        }
        if let Some(e) = cause.downcast_ref::<ExperimentError>() {
            return if matches!(e, ExperimentError::Invalid(_)) {
                1
            } else {
                2
            };
        }
        if cause.is::<MtxError>() {
            return 2;
        }
    }
    2
}

fn write_trace(report: &SolveReport, path: &Path) -> Result<()> {
    let mut out =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    writeln!(out, "iteration,objective,lp_error,step_size")?;
    for (&(it, obj), &(_, err)) in report.objective_trace.iter().zip(&report.error_trace) {
        let step = report
            .step_trace
            .iter()
            .find(|s| s.0 == it)
            .map_or(String::new(), |s| format!("{:.9e}", s.1));
        writeln!(out, "{it},{obj:.9e},{err:.9e},{step}")?;
    }
    out.flush()?;
    Ok(())
}

fn run_solve(args: SolveArgs) -> Result<()> {
    let data = match &args.input {
        Some(path) => {
            load_matrix_market(path).with_context(|| format!("reading {}", path.display()))?
        }
        None => {
            if args.m == 0 || args.n == 0 {
                return usage("--m and --n must be positive");
            }
            gen_uniform(args.m, args.n, args.seed)
        }
    };
    if args.trace_every == 0 {
        return usage("--trace-every must be positive");
    }
    let norm = args.p.norm();
    let mode = param_mode(args.params.experiment_mode(), &data, args.rank, norm)?;
    let opts = SolveOptions {
        init: match args.init {
            InitArg::Svd => Init::Svd,
            InitArg::Grad => Init::Gradient,
        },
        trace_every: args.trace_every,
        step_constant: args.params.step_constant,
        ..SolveOptions::default()
    };
    let report = solve(&data, args.rank, norm, &mode, &opts)?;
    let svd = svd_baseline(&data, args.rank, norm)?;
    println!("input        {}x{}", data.rows(), data.cols());
    println!("norm         {norm}");
    println!("rank         {}", args.rank);
    println!(
        "iterations   {} ({:?})",
        report.iterations_run, report.termination
    );
    println!("wall time    {:.3}s", report.wall_time.as_secs_f64());
    println!("error        {:.6e}", report.final_error());
    println!("svd error    {:.6e}", svd.lp_error);
    if let Some(path) = &args.out {
        write_trace(&report, path)?;
    }
    Ok(())
}

fn sibling(out: &Path, suffix: &str) -> PathBuf {
    let stem = out
        .file_stem()
        .map_or_else(|| "bench".into(), |s| s.to_string_lossy().into_owned());
    out.with_file_name(format!("{stem}.{suffix}"))
}

fn run_bench(args: BenchArgs) -> Result<ExitCode> {
    let quantized = args.experiment == ExperimentArg::Quantized;
    let (dm, dn) = if quantized { (100, 75) } else { (20, 30) };
    let (m, n) = (args.m.unwrap_or(dm), args.n.unwrap_or(dn));
    let generator = match args.experiment {
        ExperimentArg::Uniform => Generator::UniformRandom { m, n },
        ExperimentArg::Sign => Generator::SignRandom { m, n },
        ExperimentArg::Quantized => Generator::QuantizedLowRank {
            m,
            n,
            r_true: args.hidden_rank,
        },
        ExperimentArg::File => match &args.file {
            Some(p) => Generator::FromFile(p.clone()),
            None => return usage("--experiment file needs --file"),
        },
    };
    if args.experiment != ExperimentArg::File && args.file.is_some() {
        return usage("--file only applies to --experiment file");
    }
    let methods: Vec<Method> = if args.methods.is_empty() {
        if quantized {
            vec![Method::LinfSolver, Method::SvdBaseline]
        } else {
            vec![
                Method::L1Solver,
                Method::SvdBaseline,
                Method::ColumnSampling,
            ]
        }
    } else {
        args.methods.iter().map(|&m| m.into()).collect()
    };
    let mut spec = ExperimentSpec::new(
        generator,
        args.ranks.0.clone(),
        args.trials,
        methods,
        args.seed,
    );
    spec.mode = args.params.experiment_mode();
    if let Some(p) = args.baseline_p {
        spec.baseline_norm = p.norm();
    }
    spec.sampling = if args.time_matched {
        SamplingBudget::TimeMatched {
            fallback: args.sampling_trials,
        }
    } else {
        SamplingBudget::Trials(args.sampling_trials)
    };
    spec.workers = args.workers;
    spec.solve_options.step_constant = args.params.step_constant;

    let rows = run_experiment(&spec)?;
    let summary = summarize(&rows);
    let ctx = |p: &Path| format!("writing {}", p.display());
    emit_csv(&rows, &args.out).with_context(|| ctx(&args.out))?;
    let timing = sibling(&args.out, "timing.csv");
    emit_timing(&rows, &timing).with_context(|| ctx(&timing))?;
    let summary_path = sibling(&args.out, "summary.csv");
    write_summary(
        &summary,
        BufWriter::new(File::create(&summary_path).with_context(|| ctx(&summary_path))?),
    )?;
    let plot = sibling(&args.out, "plot.dat");
    write_plotdata(
        &summary,
        BufWriter::new(File::create(&plot).with_context(|| ctx(&plot))?),
    )?;
    print!("{}", format_table(&summary));

    let failures: Vec<_> = rows.iter().filter_map(|r| r.failure.as_ref()).collect();
    if failures.is_empty() {
        return Ok(ExitCode::SUCCESS);
    }
    eprintln!(
        "{} of {} runs failed; see {}",
        failures.len(),
        rows.len(),
        args.out.display()
    );
    Ok(ExitCode::from(if failures.iter().any(|f| f.numerical) {
        3
    } else {
        2
    }))
}

fn run_gen(args: GenArgs) -> Result<()> {
    if args.m == 0 || args.n == 0 {
        return usage("--m and --n must be positive");
    }
    let data = match args.kind {
        GenKind::Uniform => gen_uniform(args.m, args.n, args.seed),
        GenKind::Sign => gen_sign(args.m, args.n, args.seed),
        GenKind::Quantized => {
            if args.rank == 0 || args.rank > args.m.min(args.n) {
                return usage(format!("--rank must be in 1..={}", args.m.min(args.n)));
            }
            let q = gen_quantized(args.m, args.n, args.rank, args.seed);
            println!("certificate {:.6e}", q.certificate);
            q.data
        }
    };
    save_matrix_market(&data, &args.out)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    let result = match cli.command {
        Command::Solve(a) => run_solve(a).map(|()| ExitCode::SUCCESS),
        Command::Bench(a) => run_bench(a),
        Command::Gen(a) => run_gen(a).map(|()| ExitCode::SUCCESS),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e:#}");
        ExitCode::from(exit_code(&e))
    })
}
