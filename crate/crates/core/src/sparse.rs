//! Row-compressed nonnegative square matrices and the bistochastic wrapper.

use std::ops::Deref;

use nalgebra::DMatrix;
use serde::Serialize;

use crate::error::{Error, Result};

/// Default tolerance for row and column sums.
pub const DEFAULT_TOL: f64 = 1e-12;

/// Square sparse matrix in CSR layout.
///
/// Structural invariants: every stored weight is finite and strictly
/// positive, and column indices within a row are strictly increasing. Zero
/// weights are never stored, so the stored pattern is the numerical support.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds a matrix from per-row `(column, weight)` lists, which must already
    /// be sorted by column.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidMatrix("dimension must be positive".into()));
        }
        if rows.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: rows.len(),
            });
        }
        let nnz = rows.iter().map(Vec::len).sum();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        let mut values = Vec::with_capacity(nnz);
        row_ptr.push(0);
        for (x, row) in rows.into_iter().enumerate() {
            let mut prev: Option<usize> = None;
            for (y, w) in row {
                if y >= n {
                    return Err(Error::InvalidMatrix(format!(
                        "column {y} out of range in row {x}"
                    )));
                }
                if !(w.is_finite() && w > 0.0) {
                    return Err(Error::InvalidMatrix(format!(
                        "entry ({x},{y}) = {w} is not a positive finite weight"
                    )));
                }
                if prev.is_some_and(|p| p >= y) {
                    return Err(Error::InvalidMatrix(format!(
                        "row {x} columns not strictly increasing at {y}"
                    )));
                }
                prev = Some(y);
                col_idx.push(y);
                values.push(w);
            }
            row_ptr.push(col_idx.len());
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    /// Builds a matrix from unordered `(row, column, weight)` triplets,
    /// summing duplicates.
    pub fn from_triplets(
        n: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (x, y, w) in triplets {
            if x >= n {
                return Err(Error::InvalidMatrix(format!("row {x} out of range")));
            }
            rows[x].push((y, w));
        }
        for row in &mut rows {
            row.sort_by_key(|&(y, _)| y);
            row.dedup_by(|next, kept| {
                if next.0 == kept.0 {
                    kept.1 += next.1;
                    true
                } else {
                    false
                }
            });
        }
        Self::from_rows(n, rows)
    }

    /// Sparse copy of a dense matrix; entries equal to zero are dropped.
    pub fn from_dense(a: &DMatrix<f64>) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch {
                expected: a.nrows(),
                got: a.ncols(),
            });
        }
        let n = a.nrows();
        let rows = (0..n)
            .map(|x| {
                (0..n)
                    .filter(|&y| a[(x, y)] != 0.0)
                    .map(|y| (y, a[(x, y)]))
                    .collect()
            })
            .collect();
        Self::from_rows(n, rows)
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::from_rows(n, (0..n).map(|x| vec![(x, 1.0)]).collect())
    }

    /// The matrix `(1/n) 1 1^T`.
    pub fn uniform(n: usize) -> Result<Self> {
        let w = 1.0 / n as f64;
        Self::from_rows(
            n,
            (0..n).map(|_| (0..n).map(|y| (y, w)).collect()).collect(),
        )
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Column indices and weights of row `x`.
    #[inline]
    pub fn row(&self, x: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[x], self.row_ptr[x + 1]);
        (&self.col_idx[a..b], &self.values[a..b])
    }

    pub fn row_entries(&self, x: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (cols, vals) = self.row(x);
        cols.iter().copied().zip(vals.iter().copied())
    }

    /// All stored entries as `(row, column, weight)` in row-major order.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |x| self.row_entries(x).map(move |(y, w)| (x, y, w)))
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Stored value at `(x, y)`, zero when absent.
    pub fn get(&self, x: usize, y: usize) -> f64 {
        let (cols, vals) = self.row(x);
        cols.binary_search(&y).map_or(0.0, |k| vals[k])
    }

    /// Largest number of stored entries in a row.
    pub fn max_row_support(&self) -> usize {
        (0..self.n)
            .map(|x| self.row_ptr[x + 1] - self.row_ptr[x])
            .max()
            .unwrap_or(0)
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n).map(|x| self.row(x).1.iter().sum()).collect()
    }

    /// Column sums accumulated in one pass over the stored entries.
    pub fn column_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for (&y, &w) in self.col_idx.iter().zip(&self.values) {
            sums[y] += w;
        }
        sums
    }

    /// For each column, the rows holding a stored entry (ascending).
    pub fn column_supports(&self) -> Vec<Vec<usize>> {
        let mut cols = vec![Vec::new(); self.n];
        for x in 0..self.n {
            for &y in self.row(x).0 {
                cols[y].push(x);
            }
        }
        cols
    }

    /// `out = A v`.
    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.n);
        debug_assert_eq!(out.len(), self.n);
        for (x, o) in out.iter_mut().enumerate() {
            let (cols, vals) = self.row(x);
            *o = cols.iter().zip(vals).map(|(&y, &w)| w * v[y]).sum();
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self.n, v.len())?;
        let mut out = vec![0.0; self.n];
        self.mul_vec_into(v, &mut out);
        Ok(out)
    }

    /// `out = v^T A`, i.e. `A^T v`.
    pub fn left_mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (x, &vx) in v.iter().enumerate() {
            if vx == 0.0 {
                continue;
            }
            for (y, w) in self.row_entries(x) {
                out[y] += vx * w;
            }
        }
    }

    /// Row `x` of the result is row `perm[x]` of `self`. No arithmetic.
    pub fn permute_rows(&self, perm: &[usize]) -> Self {
        let mut row_ptr = Vec::with_capacity(self.n + 1);
        let mut col_idx = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        row_ptr.push(0);
        for &src in perm {
            let (cols, vals) = self.row(src);
            col_idx.extend_from_slice(cols);
            values.extend_from_slice(vals);
            row_ptr.push(col_idx.len());
        }
        Self {
            n: self.n,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn transpose(&self) -> Self {
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); self.n];
        for (x, y, w) in self.entries() {
            rows[y].push((x, w));
        }
        Self::from_rows(self.n, rows).expect("transpose preserves structure")
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (x, y, w) in self.entries() {
            m[(x, y)] = w;
        }
        m
    }
}

pub(crate) fn check_len(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}

/// Outcome of [`validate_bistochastic`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ValidationReport {
    pub max_row_deviation: f64,
    pub max_col_deviation: f64,
    pub tol: f64,
    pub passed: bool,
}

/// Checks that every row and column of `a` sums to one within `tol`.
pub fn validate_bistochastic(a: &CsrMatrix, tol: f64) -> ValidationReport {
    let dev = |s: Vec<f64>| s.into_iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
    let max_row_deviation = dev(a.row_sums());
    let max_col_deviation = dev(a.column_sums());
    ValidationReport {
        max_row_deviation,
        max_col_deviation,
        tol,
        passed: max_row_deviation <= tol && max_col_deviation <= tol,
    }
}

/// A [`CsrMatrix`] whose rows and columns all sum to one.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseBistochastic(CsrMatrix);

impl SparseBistochastic {
    /// Validates at [`DEFAULT_TOL`].
    pub fn new(m: CsrMatrix) -> Result<Self> {
        Self::with_tol(m, DEFAULT_TOL)
    }

    pub fn with_tol(m: CsrMatrix, tol: f64) -> Result<Self> {
        let report = validate_bistochastic(&m, tol);
        if report.passed {
            Ok(Self(m))
        } else {
            Err(Error::InvalidMatrix(format!(
                "not bistochastic: row deviation {:e}, column deviation {:e} (tol {:e})",
                report.max_row_deviation, report.max_col_deviation, tol
            )))
        }
    }

    pub fn identity(n: usize) -> Result<Self> {
        Ok(Self(CsrMatrix::identity(n)?))
    }

    /// The rank-one chain `(1/n) 1 1^T`.
    pub fn uniform(n: usize) -> Result<Self> {
        Ok(Self(CsrMatrix::uniform(n)?))
    }

    /// Row relabeling of a bistochastic matrix stays bistochastic.
    pub(crate) fn permute_rows(&self, perm: &[usize]) -> Self {
        Self(self.0.permute_rows(perm))
    }

    pub fn as_csr(&self) -> &CsrMatrix {
        &self.0
    }

    pub fn into_inner(self) -> CsrMatrix {
        self.0
    }
}

impl Deref for SparseBistochastic {
    type Target = CsrMatrix;

    fn deref(&self) -> &CsrMatrix {
        &self.0
    }
}

impl AsRef<CsrMatrix> for SparseBistochastic {
    fn as_ref(&self) -> &CsrMatrix {
        &self.0
    }
}
