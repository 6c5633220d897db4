//! Text form of complex matrices.
//!
//! One matrix per block, one row per line, entries separated by whitespace
//! or commas, complex entries written `a+bi`. Blocks are separated by blank
//! lines; `;` also ends a row so a matrix fits on one command-line argument.
//! Lines starting with `#` are comments. Formatting uses the shortest
//! round-tripping decimal form, so `parse(format(m)) == m` bit for bit.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::HermitianMatrix;

pub fn parse_entry(s: &str) -> Result<Complex64> {
    let s = s.trim();
    if s.is_empty() {
        return Err(Error::Parse("empty entry".into()));
    }
    let bad = || Error::Parse(format!("bad complex entry `{s}`"));
    let num = |t: &str| -> Result<f64> {
        match t {
            "" | "+" => Ok(1.0),
            "-" => Ok(-1.0),
            _ => t.parse::<f64>().map_err(|_| bad()),
        }
    };
    let value = if let Some(body) = s.strip_suffix('i') {
        let bytes = body.as_bytes();
        let split = (1..bytes.len())
            .rev()
            .find(|&k| (bytes[k] == b'+' || bytes[k] == b'-') && !matches!(bytes[k - 1], b'e' | b'E'));
        match split {
            Some(k) => {
                let re = body[..k].parse::<f64>().map_err(|_| bad())?;
                Complex64::new(re, num(&body[k..])?)
            }
            None => Complex64::new(0.0, num(body)?),
        }
    } else {
        Complex64::new(s.parse::<f64>().map_err(|_| bad())?, 0.0)
    };
    if !value.re.is_finite() || !value.im.is_finite() {
        return Err(bad());
    }
    Ok(value)
}

pub fn format_entry(z: Complex64) -> String {
    let sign = if z.im.is_sign_negative() { '-' } else { '+' };
    format!("{}{}{}i", z.re, sign, z.im.abs())
}

fn parse_block(lines: &[&str]) -> Result<DMatrix<Complex64>> {
    let mut rows: Vec<Vec<Complex64>> = Vec::new();
    for line in lines {
        for row in line.split(';') {
            let entries: Vec<&str> = row.split(|c: char| c.is_whitespace() || c == ',').filter(|t| !t.is_empty()).collect();
            if entries.is_empty() {
                continue;
            }
            rows.push(entries.into_iter().map(parse_entry).collect::<Result<_>>()?);
        }
    }
    let nrows = rows.len();
    let ncols = rows.first().map_or(0, Vec::len);
    if nrows == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse("ragged or empty matrix block".into()));
    }
    Ok(DMatrix::from_fn(nrows, ncols, |j, k| rows[j][k]))
}

/// Parses every block in `text`.
pub fn parse_blocks(text: &str) -> Result<Vec<DMatrix<Complex64>>> {
    let mut blocks = Vec::new();
    let mut current: Vec<&str> = Vec::new();
    for line in text.lines() {
        let t = line.trim();
        if t.starts_with('#') {
            continue;
        }
        if t.is_empty() {
            if !current.is_empty() {
                blocks.push(parse_block(&current)?);
                current.clear();
            }
        } else {
            current.push(t);
        }
    }
    if !current.is_empty() {
        blocks.push(parse_block(&current)?);
    }
    Ok(blocks)
}

/// Parses exactly one matrix.
pub fn parse_matrix(text: &str) -> Result<DMatrix<Complex64>> {
    let mut blocks = parse_blocks(text)?;
    match blocks.len() {
        1 => Ok(blocks.remove(0)),
        k => Err(Error::Parse(format!("expected one matrix block, found {k}"))),
    }
}

pub fn parse_hermitian(text: &str) -> Result<HermitianMatrix> {
    HermitianMatrix::new(parse_matrix(text)?)
}

pub fn format_matrix(m: &DMatrix<Complex64>) -> String {
    let mut out = String::new();
    for j in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols()).map(|k| format_entry(m[(j, k)])).collect();
        out.push_str(&row.join(" "));
        out.push('\n');
    }
    out
}

/// Single-line form with `;` row separators.
pub fn format_matrix_inline(m: &DMatrix<Complex64>) -> String {
    (0..m.nrows())
        .map(|j| (0..m.ncols()).map(|k| format_entry(m[(j, k)])).collect::<Vec<_>>().join(" "))
        .collect::<Vec<_>>()
        .join("; ")
}

pub fn format_blocks(blocks: &[DMatrix<Complex64>]) -> String {
    blocks.iter().map(format_matrix).collect::<Vec<_>>().join("\n")
}
