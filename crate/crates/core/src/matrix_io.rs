//! Plain-text matrix files: a `rows cols` header followed by the entries in
//! row-major order, separated by arbitrary whitespace.

use std::fmt::Write as _;

use crate::error::{NmfError, Result};
use crate::linalg::Matrix;

fn parse_err(msg: impl Into<String>) -> NmfError {
    NmfError::InvalidParameter(format!("matrix file: {}", msg.into()))
}

pub fn parse_matrix(text: &str) -> Result<Matrix> {
    let mut tokens = text.split_whitespace();
    let mut dim = |what: &str| -> Result<usize> {
        tokens
            .next()
            .ok_or_else(|| parse_err(format!("missing {what}")))?
            .parse::<usize>()
            .map_err(|e| parse_err(format!("bad {what}: {e}")))
    };
    let rows = dim("row count")?;
    let cols = dim("column count")?;
    let data = tokens
        .map(|t| {
            t.parse::<f64>()
                .map_err(|e| parse_err(format!("bad entry `{t}`: {e}")))
        })
        .collect::<Result<Vec<_>>>()?;
    if data.len() != rows * cols {
        return Err(parse_err(format!(
            "expected {} entries for {rows}x{cols}, found {}",
            rows * cols,
            data.len()
        )));
    }
    if data.iter().any(|x| !x.is_finite()) {
        return Err(NmfError::NonFinite("matrix file"));
    }
    Matrix::from_vec(rows, cols, data)
}

/// Entries use the shortest representation that parses back to the same
/// `f64`, one matrix row per line.
pub fn format_matrix(m: &Matrix) -> String {
    let mut out = format!("{} {}\n", m.rows(), m.cols());
    for i in 0..m.rows() {
        let row = m.row(i);
        for (j, x) in row.iter().enumerate() {
            if j > 0 {
                out.push(' ');
            }
            let _ = write!(out, "{x:?}");
        }
        out.push('\n');
    }
    out
}
