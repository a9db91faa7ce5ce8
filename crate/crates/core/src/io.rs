//! Text formats: Matrix Market coordinate files for matrices, a one-line
//! index list for permutations.
//!
//! Files are 1-based; everything in memory is 0-based.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::permutation::Permutation;
use crate::sparse::CsrMatrix;

const MM_HEADER: &str = "%%MatrixMarket matrix coordinate real general";

/// Canonical Matrix Market text: sorted coordinates, 17 significant digits,
/// so that writing and re-reading is entry-exact.
pub fn matrix_market_string(a: &CsrMatrix) -> String {
    let mut s = String::with_capacity(32 * a.nnz() + 64);
    s.push_str(MM_HEADER);
    s.push('\n');
    let _ = writeln!(s, "{} {} {}", a.n(), a.n(), a.nnz());
    for (x, y, w) in a.entries() {
        let _ = writeln!(s, "{} {} {:.16e}", x + 1, y + 1, w);
    }
    s
}

pub fn parse_matrix_market(text: &str) -> Result<CsrMatrix> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));

    let (line, header) = lines.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty input".into(),
    })?;
    let tokens: Vec<String> = header
        .split_whitespace()
        .map(str::to_ascii_lowercase)
        .collect();
    if tokens.len() != 5 || tokens[0] != "%%matrixmarket" || tokens[1] != "matrix" {
        return Err(parse_err(line, "expected a %%MatrixMarket matrix header"));
    }
    if tokens[2] != "coordinate" || tokens[3] != "real" || tokens[4] != "general" {
        return Err(parse_err(
            line,
            "only `coordinate real general` is supported",
        ));
    }

    let mut lines = lines.filter(|(_, l)| !l.is_empty() && !l.starts_with('%'));
    let (line, size) = lines
        .next()
        .ok_or_else(|| parse_err(line + 1, "missing size line"))?;
    let dims: Vec<usize> = size
        .split_whitespace()
        .map(|t| {
            t.parse()
                .map_err(|_| parse_err(line, format!("bad integer `{t}`")))
        })
        .collect::<Result<_>>()?;
    let &[rows, cols, nnz] = dims.as_slice() else {
        return Err(parse_err(line, "size line needs `rows cols nnz`"));
    };
    if rows != cols {
        return Err(parse_err(
            line,
            format!("matrix is {rows}x{cols}, must be square"),
        ));
    }

    let mut triplets = Vec::with_capacity(nnz);
    let mut last_line = line;
    for (line, entry) in lines {
        last_line = line;
        let mut it = entry.split_whitespace();
        let (Some(i), Some(j), Some(v), None) = (it.next(), it.next(), it.next(), it.next()) else {
            return Err(parse_err(line, "entry needs `row col value`"));
        };
        let index = |t: &str| -> Result<usize> {
            match t.parse::<usize>() {
                Ok(k) if (1..=rows).contains(&k) => Ok(k - 1),
                _ => Err(parse_err(line, format!("index `{t}` not in 1..={rows}"))),
            }
        };
        let (i, j) = (index(i)?, index(j)?);
        let v: f64 = v
            .parse()
            .map_err(|_| parse_err(line, format!("bad value `{v}`")))?;
        if !(v.is_finite() && v > 0.0) {
            return Err(parse_err(
                line,
                format!("weight {v} must be positive and finite"),
            ));
        }
        triplets.push((i, j, v));
    }
    if triplets.len() != nnz {
        return Err(parse_err(
            last_line,
            format!("header announces {nnz} entries, found {}", triplets.len()),
        ));
    }
    CsrMatrix::from_triplets(rows, triplets)
}

pub fn write_matrix_market(path: impl AsRef<Path>, a: &CsrMatrix) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, matrix_market_string(a)).map_err(|e| Error::io(path, e))
}

pub fn read_matrix_market(path: impl AsRef<Path>) -> Result<CsrMatrix> {
    let path = path.as_ref();
    parse_matrix_market(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// `n σ(1) … σ(n)` on one line, 1-based.
pub fn permutation_string(sigma: &Permutation) -> String {
    let mut s = sigma.len().to_string();
    for &y in sigma.as_slice() {
        let _ = write!(s, " {}", y + 1);
    }
    s.push('\n');
    s
}

/// Reads the format written by [`permutation_string`]. Line breaks are
/// tolerated; comment lines start with `#`.
pub fn parse_permutation(text: &str) -> Result<Permutation> {
    let mut tokens = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim_start().starts_with('#'))
        .flat_map(|(i, l)| l.split_whitespace().map(move |t| (i + 1, t)));
    let (line, head) = tokens.next().ok_or(Error::Parse {
        line: 1,
        msg: "empty permutation file".into(),
    })?;
    let n: usize = head
        .parse()
        .map_err(|_| parse_err(line, format!("bad length `{head}`")))?;
    let mut map = Vec::with_capacity(n);
    let mut last = line;
    for (line, t) in tokens {
        last = line;
        match t.parse::<usize>() {
            Ok(k) if (1..=n).contains(&k) => map.push(k - 1),
            _ => return Err(parse_err(line, format!("index `{t}` not in 1..={n}"))),
        }
    }
    if map.len() != n {
        return Err(parse_err(
            last,
            format!("expected {n} indices, found {}", map.len()),
        ));
    }
    Permutation::new(map).map_err(|e| parse_err(last, e.to_string()))
}

pub fn write_permutation(path: impl AsRef<Path>, sigma: &Permutation) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, permutation_string(sigma)).map_err(|e| Error::io(path, e))
}

pub fn read_permutation(path: impl AsRef<Path>) -> Result<Permutation> {
    let path = path.as_ref();
    parse_permutation(&fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
}

/// Index set file: whitespace-separated 1-based indices, `#` comments.
pub fn parse_index_set(text: &str, n: usize) -> Result<Vec<usize>> {
    let mut out = Vec::new();
    for (i, l) in text.lines().enumerate() {
        if l.trim_start().starts_with('#') {
            continue;
        }
        for t in l.split_whitespace() {
            match t.parse::<usize>() {
                Ok(k) if (1..=n).contains(&k) => out.push(k - 1),
                _ => return Err(parse_err(i + 1, format!("index `{t}` not in 1..={n}"))),
            }
        }
    }
    out.sort_unstable();
    out.dedup();
    Ok(out)
}

/// CSV with header `re,im`, one eigenvalue per row.
pub fn eigenvalue_csv(values: &[num_complex::Complex64]) -> String {
    let mut s = String::from("re,im\n");
    for z in values {
        let _ = writeln!(s, "{},{}", z.re, z.im);
    }
    s
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
