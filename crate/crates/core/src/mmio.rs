//! Matrix Market coordinate files and run output (history CSV, JSON summary).

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::history::ConvergenceHistory;
use crate::linalg::CsrMatrix;

/// Canonical location of the ORSIRR_1 matrix.
pub const ORSIRR_1_URL: &str = "https://math.nist.gov/MatrixMarket/data/Harwell-Boeing/oilgen/orsirr_1.html";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Symmetry {
    General,
    Symmetric,
}

/// The accepted subset of the `%%MatrixMarket` banner.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MatrixMarketHeader {
    pub symmetry: Symmetry,
    /// Values were stored as integers and promoted to `f64`.
    pub integer: bool,
}

fn parse_err(line: usize, message: impl Into<String>) -> Error {
    Error::Parse { line, message: message.into() }
}

fn parse_header(line: &str) -> Result<MatrixMarketHeader> {
    let tokens: Vec<String> = line.split_whitespace().map(str::to_ascii_lowercase).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" {
        return Err(parse_err(1, "expected '%%MatrixMarket matrix <format> <field> <symmetry>'"));
    }
    if tokens[1] != "matrix" {
        return Err(Error::UnsupportedFormat(format!("object '{}'", tokens[1])));
    }
    if tokens[2] != "coordinate" {
        return Err(Error::UnsupportedFormat(format!("format '{}'", tokens[2])));
    }
    let integer = match tokens[3].as_str() {
        "real" | "double" => false,
        "integer" => true,
        other => return Err(Error::UnsupportedFormat(format!("field '{other}'"))),
    };
    let symmetry = match tokens[4].as_str() {
        "general" => Symmetry::General,
        "symmetric" => Symmetry::Symmetric,
        other => return Err(Error::UnsupportedFormat(format!("symmetry '{other}'"))),
    };
    Ok(MatrixMarketHeader { symmetry, integer })
}

fn parse_index(tok: Option<&str>, bound: usize, line: usize, what: &str) -> Result<usize> {
    let tok = tok.ok_or_else(|| parse_err(line, format!("missing {what} index")))?;
    let i: usize = tok
        .parse()
        .map_err(|_| parse_err(line, format!("bad {what} index '{tok}'")))?;
    if i == 0 || i > bound {
        return Err(parse_err(line, format!("{what} index {i} outside 1..={bound}")));
    }
    Ok(i - 1)
}

/// Reads a coordinate-format matrix. Symmetric files are expanded to full
/// storage and duplicate entries are summed.
pub fn read_matrix_market<R: BufRead>(source: R) -> Result<CsrMatrix> {
    let mut lines = source.lines().enumerate().map(|(i, l)| (i + 1, l));
    let (_, first) = lines.next().ok_or_else(|| parse_err(1, "empty input"))?;
    let header = parse_header(&first?)?;

    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (lineno, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let mut tok = t.split_whitespace();
        match size {
            None => {
                let mut next = |what: &str| -> Result<usize> {
                    let s = tok.next().ok_or_else(|| parse_err(lineno, format!("missing {what}")))?;
                    s.parse().map_err(|_| parse_err(lineno, format!("bad {what} '{s}'")))
                };
                let dims = (next("row count")?, next("column count")?, next("entry count")?);
                if header.symmetry == Symmetry::Symmetric && dims.0 != dims.1 {
                    return Err(parse_err(lineno, "symmetric matrix must be square"));
                }
                trip.reserve(dims.2 * if header.symmetry == Symmetry::Symmetric { 2 } else { 1 });
                size = Some(dims);
            }
            Some((m, n, nnz)) => {
                let i = parse_index(tok.next(), m, lineno, "row")?;
                let j = parse_index(tok.next(), n, lineno, "column")?;
                let vs = tok.next().ok_or_else(|| parse_err(lineno, "missing value"))?;
                let v: f64 = vs.parse().map_err(|_| parse_err(lineno, format!("bad value '{vs}'")))?;
                if tok.next().is_some() {
                    return Err(parse_err(lineno, "trailing tokens after value"));
                }
                if trip.len() >= nnz * 2 {
                    return Err(parse_err(lineno, "more entries than declared"));
                }
                trip.push((i, j, v));
                if header.symmetry == Symmetry::Symmetric && i != j {
                    trip.push((j, i, v));
                }
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| parse_err(1, "missing size line"))?;
    let stored = trip.iter().filter(|(i, j, _)| header.symmetry == Symmetry::General || i >= j).count();
    if stored != nnz {
        return Err(parse_err(0, format!("declared {nnz} entries, found {stored}")));
    }
    CsrMatrix::from_triplets(m, n, trip)
}

/// Writes `m` as a general real coordinate file with round-trip precision.
pub fn write_matrix_market<W: Write>(m: &CsrMatrix, mut sink: W) -> Result<()> {
    writeln!(sink, "%%MatrixMarket matrix coordinate real general")?;
    writeln!(sink, "{} {} {}", m.nrows(), m.ncols(), m.nnz())?;
    for (i, j, v) in m.triplets() {
        writeln!(sink, "{} {} {:.16e}", i + 1, j + 1, v)?;
    }
    Ok(())
}

pub const HISTORY_HEADER: &str = "iter,saddle_resnorm,forward_resnorm,adjoint_resnorm,amplitude";

/// One CSV row per record, 17 significant digits, LF endings.
pub fn write_history_csv<W: Write>(history: &ConvergenceHistory, mut sink: W) -> Result<()> {
    if history.is_empty() {
        return Err(Error::MissingData("history has no records"));
    }
    writeln!(sink, "{HISTORY_HEADER}")?;
    for r in &history.records {
        writeln!(
            sink,
            "{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.iter, r.saddle_resnorm, r.forward_resnorm, r.adjoint_resnorm, r.amplitude
        )?;
    }
    Ok(())
}

/// Parses a file produced by [`write_history_csv`].
pub fn read_history_csv<R: BufRead>(source: R) -> Result<ConvergenceHistory> {
    let mut history = ConvergenceHistory::default();
    for (idx, line) in source.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if idx == 0 {
            if line.trim() != HISTORY_HEADER {
                return Err(parse_err(lineno, "unexpected CSV header"));
            }
            continue;
        }
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.trim().split(',').collect();
        if f.len() != 5 {
            return Err(parse_err(lineno, format!("expected 5 fields, found {}", f.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|_| parse_err(lineno, format!("bad number '{s}'")));
        history.records.push(crate::history::IterationRecord {
            iter: f[0].parse().map_err(|_| parse_err(lineno, "bad iteration count"))?,
            saddle_resnorm: num(f[1])?,
            forward_resnorm: num(f[2])?,
            adjoint_resnorm: num(f[3])?,
            amplitude: num(f[4])?,
        });
    }
    Ok(history)
}

/// The JSON run summary.
///
/// Non-finite numbers serialize as `null`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub solver: String,
    pub problem: String,
    pub n: usize,
    pub w: Option<f64>,
    pub gamma: Option<f64>,
    pub droptol: Option<f64>,
    pub status: String,
    pub iterations: usize,
    pub final_saddle_residual: Option<f64>,
    pub final_forward_residual: Option<f64>,
    pub final_adjoint_residual: Option<f64>,
    pub amplitude: Option<f64>,
    pub consistency_gap: Option<f64>,
    /// Wall-clock time, only when timing was requested.
    pub wall_ms: Option<f64>,
}

impl RunSummary {
    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string_pretty(self)?;
        s.push('\n');
        Ok(s)
    }
}

/// `Some(x)` for finite `x`.
pub fn finite(x: f64) -> Option<f64> {
    x.is_finite().then_some(x)
}
