//! CSV, summary and plot-data writers.
//!
//! The raw CSV holds only deterministic columns, so a fixed spec and seed give
//! identical bytes. Wall times live in the timing CSV and in the summary.

use std::fmt::Write as _;
use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::Path;

use crate::experiment::{ExperimentRow, Method};

/// First line of every raw CSV.
pub const CSV_VERSION_LINE: &str = "# lplr-experiment-csv v1";

fn quote(s: &str) -> String {
    format!("\"{}\"", s.replace('"', "\"\""))
}

fn status(row: &ExperimentRow) -> String {
    match &row.failure {
        None => "ok".to_string(),
        Some(f) => quote(&format!("error: {}", f.message)),
    }
}

pub fn write_csv(rows: &[ExperimentRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "{CSV_VERSION_LINE}")?;
    writeln!(out, "method,rank,trial,seed,iterations,lp_error,status")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{:.9e},{}",
            r.method,
            r.rank,
            r.trial,
            r.seed,
            r.iterations_run,
            r.lp_error,
            status(r)
        )?;
    }
    out.flush()
}

pub fn write_timing(rows: &[ExperimentRow], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "method,rank,trial,wall_time_seconds")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{:.6e}",
            r.method, r.rank, r.trial, r.wall_time_seconds
        )?;
    }
    out.flush()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Stats {
    pub min: f64,
    pub mean: f64,
    pub median: f64,
}

impl Stats {
    /// `None` for an empty sample. The median of an even sample is the mean
    /// of the two middle order statistics.
    pub fn of(values: &[f64]) -> Option<Stats> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        let k = v.len();
        let median = if k % 2 == 1 {
            v[k / 2]
        } else {
            0.5 * (v[k / 2 - 1] + v[k / 2])
        };
        Some(Stats {
            min: v[0],
            mean: v.iter().sum::<f64>() / k as f64,
            median,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SummaryRow {
    pub method: Method,
    pub rank: usize,
    pub succeeded: usize,
    pub failed: usize,
    /// Over successful rows only; `None` if every trial failed.
    pub error: Option<Stats>,
    pub time: Option<Stats>,
}

/// One row per (method, rank), in order of first appearance.
pub fn summarize(rows: &[ExperimentRow]) -> Vec<SummaryRow> {
    let mut keys: Vec<(Method, usize)> = Vec::new();
    for r in rows {
        if !keys.contains(&(r.method, r.rank)) {
            keys.push((r.method, r.rank));
        }
    }
    keys.into_iter()
        .map(|(method, rank)| {
            let group: Vec<&ExperimentRow> = rows
                .iter()
                .filter(|r| r.method == method && r.rank == rank)
                .collect();
            let ok: Vec<&&ExperimentRow> = group.iter().filter(|r| r.failure.is_none()).collect();
            let errors: Vec<f64> = ok.iter().map(|r| r.lp_error).collect();
            let times: Vec<f64> = ok.iter().map(|r| r.wall_time_seconds).collect();
            SummaryRow {
                method,
                rank,
                succeeded: ok.len(),
                failed: group.len() - ok.len(),
                error: Stats::of(&errors),
                time: Stats::of(&times),
            }
        })
        .collect()
}

fn stats_cells(s: Option<Stats>) -> String {
    match s {
        Some(s) => format!("{:.9e},{:.9e},{:.9e}", s.min, s.mean, s.median),
        None => "nan,nan,nan".to_string(),
    }
}

pub fn write_summary(summary: &[SummaryRow], mut out: impl Write) -> io::Result<()> {
    writeln!(
        out,
        "method,rank,succeeded,failed,error_min,error_mean,error_median,time_min,time_mean,time_median"
    )?;
    for s in summary {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            s.method,
            s.rank,
            s.succeeded,
            s.failed,
            stats_cells(s.error),
            stats_cells(s.time)
        )?;
    }
    out.flush()
}

/// Whitespace-separated `(rank, median error)` series, one block per method,
/// blocks separated by two blank lines (gnuplot `index`, numpy `loadtxt`).
pub fn write_plotdata(summary: &[SummaryRow], mut out: impl Write) -> io::Result<()> {
    let mut methods: Vec<Method> = Vec::new();
    for s in summary {
        if !methods.contains(&s.method) {
            methods.push(s.method);
        }
    }
    for (i, &m) in methods.iter().enumerate() {
        if i > 0 {
            writeln!(out, "\n")?;
        }
        writeln!(out, "# {m}")?;
        writeln!(out, "# rank median_error")?;
        for s in summary.iter().filter(|s| s.method == m) {
            let median = s.error.map_or(f64::NAN, |e| e.median);
            writeln!(out, "{} {:.9e}", s.rank, median)?;
        }
    }
    out.flush()
}

/// `[min, mean, median]` table of errors and times per method and rank.
pub fn format_table(summary: &[SummaryRow]) -> String {
    let cell = |s: Option<Stats>| match s {
        Some(s) => format!("[{:.2e}, {:.2e}, {:.2e}]", s.min, s.mean, s.median),
        None => "[failed]".to_string(),
    };
    let mut t = String::new();
    let _ = writeln!(
        t,
        "{:<9} {:>4}  {:<30}  {:<30}",
        "method", "rank", "time (s) [min, mean, median]", "error [min, mean, median]"
    );
    for s in summary {
        let _ = write!(
            t,
            "{:<9} {:>4}  {:<30}  {:<30}",
            s.method,
            s.rank,
            cell(s.time),
            cell(s.error)
        );
        if s.failed > 0 {
            let _ = write!(t, "  ({} failed)", s.failed);
        }
        t.push('\n');
    }
    t
}

fn create(path: &Path) -> io::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

pub fn emit_csv(rows: &[ExperimentRow], path: impl AsRef<Path>) -> io::Result<()> {
    write_csv(rows, create(path.as_ref())?)
}

pub fn emit_timing(rows: &[ExperimentRow], path: impl AsRef<Path>) -> io::Result<()> {
    write_timing(rows, create(path.as_ref())?)
}

pub fn emit_summary(rows: &[ExperimentRow], path: impl AsRef<Path>) -> io::Result<()> {
    write_summary(&summarize(rows), create(path.as_ref())?)
}

pub fn emit_plotdata(rows: &[ExperimentRow], path: impl AsRef<Path>) -> io::Result<()> {
    write_plotdata(&summarize(rows), create(path.as_ref())?)
}
