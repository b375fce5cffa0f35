//! Benchmark harness for `lplr`: seeded instance generators, MatrixMarket
//! I/O, a Monte Carlo experiment runner and CSV/plot-data writers.

pub mod experiment;
pub mod gen;
pub mod mtx;
pub mod output;

pub use experiment::{
    build_instance, run_experiment, sub_seed, ExperimentError, ExperimentMode, ExperimentRow,
    ExperimentSpec, Failure, Generator, Instance, Method, PracticalOverrides, SamplingBudget,
};
pub use gen::{gen_quantized, gen_sign, gen_uniform, Quantized};
pub use mtx::{load_matrix_market, save_matrix_market, write_matrix_market_array, MtxError};
pub use output::{
    emit_csv, emit_plotdata, emit_summary, emit_timing, summarize, Stats, SummaryRow,
};
