//! MatrixMarket reader (coordinate and array; real or integer; general or
//! symmetric) and a dense array-format writer.

use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use lplr::DenseMatrix;

/// Largest dense result the loader will allocate, in cells.
pub const DEFAULT_CELL_CAP: usize = 100_000_000;

#[derive(Debug, thiserror::Error)]
pub enum MtxError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

fn parse_err<T>(line: usize, msg: impl Into<String>) -> Result<T, MtxError> {
    Err(MtxError::Parse {
        line,
        msg: msg.into(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Format {
    Coordinate,
    Array,
}

pub fn load_matrix_market(path: impl AsRef<Path>) -> Result<DenseMatrix, MtxError> {
    load_matrix_market_with_cap(path, DEFAULT_CELL_CAP)
}

pub fn load_matrix_market_with_cap(
    path: impl AsRef<Path>,
    cell_cap: usize,
) -> Result<DenseMatrix, MtxError> {
    let file = File::open(path)?;
    parse_matrix_market(BufReader::new(file), cell_cap)
}

/// Numbered, non-comment, non-blank lines after the header.
struct Body<R> {
    lines: io::Lines<R>,
    number: usize,
}

impl<R: BufRead> Body<R> {
    fn next(&mut self) -> Result<Option<(usize, String)>, MtxError> {
        for line in self.lines.by_ref() {
            let line = line?;
            self.number += 1;
            let t = line.trim();
            if t.is_empty() || t.starts_with('%') {
                continue;
            }
            return Ok(Some((self.number, t.to_string())));
        }
        Ok(None)
    }
}

fn parse_usize(tok: &str, line: usize, what: &str) -> Result<usize, MtxError> {
    tok.parse().or_else(|_| {
        parse_err(
            line,
            format!("{what} is not a non-negative integer: {tok:?}"),
        )
    })
}

fn parse_value(tok: &str, line: usize) -> Result<f64, MtxError> {
    match tok.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        Ok(_) => parse_err(line, format!("non-finite value {tok:?}")),
        Err(_) => parse_err(line, format!("not a number: {tok:?}")),
    }
}

pub fn parse_matrix_market<R: BufRead>(
    reader: R,
    cell_cap: usize,
) -> Result<DenseMatrix, MtxError> {
    let mut lines = reader.lines();
    let header = match lines.next() {
        Some(h) => h?,
        None => return parse_err(1, "empty file"),
    };
    let words: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if words.len() != 5 || words[0] != "%%matrixmarket" || words[1] != "matrix" {
        return parse_err(
            1,
            "expected '%%MatrixMarket matrix <format> <field> <symmetry>'",
        );
    }
    let format = match words[2].as_str() {
        "coordinate" => Format::Coordinate,
        "array" => Format::Array,
        other => return parse_err(1, format!("unsupported format {other:?}")),
    };
    match words[3].as_str() {
        "real" | "integer" | "double" => {}
        other => return parse_err(1, format!("unsupported field {other:?}")),
    }
    let symmetric = match words[4].as_str() {
        "general" => false,
        "symmetric" => true,
        other => return parse_err(1, format!("unsupported symmetry {other:?}")),
    };

    let mut body = Body { lines, number: 1 };
    let Some((size_line, size)) = body.next()? else {
        return parse_err(body.number, "missing size line");
    };
    let toks: Vec<&str> = size.split_whitespace().collect();
    let expected = if format == Format::Coordinate { 3 } else { 2 };
    if toks.len() != expected {
        return parse_err(size_line, format!("size line needs {expected} integers"));
    }
    let m = parse_usize(toks[0], size_line, "row count")?;
    let n = parse_usize(toks[1], size_line, "column count")?;
    if m == 0 || n == 0 {
        return parse_err(size_line, format!("empty {m}x{n} matrix"));
    }
    if symmetric && m != n {
        return parse_err(
            size_line,
            format!("symmetric matrix must be square, got {m}x{n}"),
        );
    }
    let cells = m.checked_mul(n).filter(|&c| c <= cell_cap);
    let Some(cells) = cells else {
        return parse_err(
            size_line,
            format!("{m}x{n} exceeds the {cell_cap}-cell cap"),
        );
    };

    let mut data = vec![0.0; cells];
    match format {
        Format::Coordinate => {
            let nnz = parse_usize(toks[2], size_line, "entry count")?;
            let max_nnz = if symmetric { m * (m + 1) / 2 } else { cells };
            if nnz > max_nnz {
                return parse_err(size_line, format!("{nnz} entries cannot fit in {m}x{n}"));
            }
            let mut seen = vec![false; cells];
            for k in 0..nnz {
                let Some((line, entry)) = body.next()? else {
                    return parse_err(body.number, format!("expected {nnz} entries, found {k}"));
                };
                let toks: Vec<&str> = entry.split_whitespace().collect();
                if toks.len() != 3 {
                    return parse_err(line, "entry needs 'row column value'");
                }
                let i = parse_usize(toks[0], line, "row index")?;
                let j = parse_usize(toks[1], line, "column index")?;
                if i == 0 || i > m || j == 0 || j > n {
                    return parse_err(line, format!("index ({i}, {j}) outside {m}x{n}"));
                }
                let v = parse_value(toks[2], line)?;
                let (i, j) = (i - 1, j - 1);
                let mut targets = vec![i * n + j];
                if symmetric && i != j {
                    targets.push(j * n + i);
                }
                for t in targets {
                    if seen[t] {
                        return parse_err(line, format!("duplicate entry ({}, {})", i + 1, j + 1));
                    }
                    seen[t] = true;
                    data[t] = v;
                }
            }
        }
        Format::Array => {
            // Column-major; symmetric files list the lower triangle only.
            for j in 0..n {
                let start = if symmetric { j } else { 0 };
                for i in start..m {
                    let Some((line, entry)) = body.next()? else {
                        return parse_err(body.number, "array data ended early");
                    };
                    let mut toks = entry.split_whitespace();
                    let v = parse_value(toks.next().unwrap_or(""), line)?;
                    if toks.next().is_some() {
                        return parse_err(line, "array entry must be a single value");
                    }
                    data[i * n + j] = v;
                    if symmetric {
                        data[j * n + i] = v;
                    }
                }
            }
        }
    }
    if let Some((line, _)) = body.next()? {
        return parse_err(line, "unexpected data after the last entry");
    }
    Ok(DenseMatrix::new(m, n, data).expect("dimensions and values checked above"))
}

/// Writes `x` in `array real general` format with round-trip precision.
pub fn write_matrix_market_array(x: &DenseMatrix, mut out: impl Write) -> io::Result<()> {
    writeln!(out, "%%MatrixMarket matrix array real general")?;
    writeln!(out, "{} {}", x.rows(), x.cols())?;
    for j in 0..x.cols() {
        for i in 0..x.rows() {
            writeln!(out, "{:e}", x.get(i, j))?;
        }
    }
    out.flush()
}

pub fn save_matrix_market(x: &DenseMatrix, path: impl AsRef<Path>) -> io::Result<()> {
    write_matrix_market_array(x, BufWriter::new(File::create(path)?))
}
