//! MatrixMarket `coordinate real general` I/O.
//!
//! Values are written in the shortest decimal form that parses back to the
//! same `f64` (never more than 17 significant digits), so a write/read round
//! trip is bit-exact.

use std::fmt::Write as _;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use super::csr::CsrMatrix;
use crate::error::{Error, Result};

const BANNER: &str = "%%MatrixMarket matrix coordinate real general";

fn fmt_value(out: &mut String, v: f64) {
    let a = v.abs();
    if a == 0.0 || (1e-5..1e16).contains(&a) {
        write!(out, "{v}").unwrap();
    } else {
        write!(out, "{v:e}").unwrap();
    }
}

pub fn to_matrix_market_string(a: &CsrMatrix) -> String {
    let mut out = String::with_capacity(32 * a.nnz() + 64);
    out.push_str(BANNER);
    out.push('\n');
    writeln!(out, "{} {} {}", a.n_rows(), a.n_cols(), a.nnz()).unwrap();
    for i in 0..a.n_rows() {
        let (cols, vals) = a.row(i);
        for (&j, &v) in cols.iter().zip(vals) {
            write!(out, "{} {} ", i + 1, j + 1).unwrap();
            fmt_value(&mut out, v);
            out.push('\n');
        }
    }
    out
}

pub fn write_matrix_market(a: &CsrMatrix, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, to_matrix_market_string(a))?;
    Ok(())
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    parse_matrix_market(std::fs::File::open(path)?)
}

pub fn parse_matrix_market(reader: impl Read) -> Result<CsrMatrix> {
    let reader = BufReader::new(reader);
    let mut lines = reader.lines().enumerate();
    let fmt_err = |line: usize, msg: String| Error::Format { line: line + 1, msg };

    let (ln, banner) = lines.next().ok_or_else(|| fmt_err(0, "empty file".into()))?;
    let banner = banner?;
    let tokens: Vec<String> = banner.split_whitespace().map(|t| t.to_ascii_lowercase()).collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(fmt_err(ln, format!("bad banner {banner:?}")));
    }
    if tokens[2] != "coordinate" {
        return Err(fmt_err(ln, format!("unsupported storage {:?}, expected coordinate", tokens[2])));
    }
    if tokens[3] != "real" {
        return Err(fmt_err(ln, format!("unsupported field {:?}, expected real", tokens[3])));
    }
    if tokens[4] != "general" {
        return Err(fmt_err(ln, format!("unsupported symmetry {:?}, expected general", tokens[4])));
    }

    let mut size: Option<(usize, usize, usize)> = None;
    let mut trip = Vec::new();
    for (ln, line) in lines {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('%') {
            continue;
        }
        let parts: Vec<&str> = t.split_whitespace().collect();
        match size {
            None => {
                if parts.len() != 3 {
                    return Err(fmt_err(ln, format!("bad size line {t:?}")));
                }
                let p = |s: &str| s.parse::<usize>().map_err(|e| fmt_err(ln, format!("{s:?}: {e}")));
                let s = (p(parts[0])?, p(parts[1])?, p(parts[2])?);
                trip.reserve(s.2);
                size = Some(s);
            }
            Some((m, n, _)) => {
                if parts.len() != 3 {
                    return Err(fmt_err(ln, format!("bad entry line {t:?}")));
                }
                let idx = |s: &str, bound: usize| -> Result<usize> {
                    let v = s.parse::<usize>().map_err(|e| fmt_err(ln, format!("{s:?}: {e}")))?;
                    if v == 0 || v > bound {
                        return Err(fmt_err(ln, format!("index {v} outside 1..={bound}")));
                    }
                    Ok(v - 1)
                };
                let i = idx(parts[0], m)?;
                let j = idx(parts[1], n)?;
                let v = parts[2]
                    .parse::<f64>()
                    .map_err(|e| fmt_err(ln, format!("{:?}: {e}", parts[2])))?;
                trip.push((i, j, v));
            }
        }
    }
    let (m, n, nnz) = size.ok_or_else(|| fmt_err(1, "missing size line".into()))?;
    if trip.len() != nnz {
        return Err(fmt_err(0, format!("header declares {nnz} entries, found {}", trip.len())));
    }
    CsrMatrix::from_triplets(&trip, m, n)
}
