//! Dense nonnegative matrices, stochasticity classification and the text format.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default tolerance for stochasticity checks; matches the default Sinkhorn target.
pub const DEFAULT_STOCHASTIC_TOL: f64 = 1e-9;

/// Dense row-major matrix with finite nonnegative entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawMatrix")]
pub struct Matrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

#[derive(Deserialize)]
struct RawMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<f64>,
}

impl TryFrom<RawMatrix> for Matrix {
    type Error = Error;

    fn try_from(raw: RawMatrix) -> Result<Self> {
        Matrix::new(raw.n_rows, raw.n_cols, raw.entries)
    }
}

impl Matrix {
    pub fn new(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Result<Self> {
        if n_rows == 0 || n_cols == 0 {
            return Err(Error::dim("matrix must have at least one row and one column"));
        }
        if entries.len() != n_rows * n_cols {
            return Err(Error::dim(format!(
                "expected {} entries for a {n_rows}x{n_cols} matrix, got {}",
                n_rows * n_cols,
                entries.len()
            )));
        }
        if let Some((k, v)) = entries
            .iter()
            .enumerate()
            .find(|(_, v)| !v.is_finite() || **v < 0.0)
        {
            return Err(Error::domain(format!(
                "entry ({}, {}) = {v} is not a finite nonnegative number",
                k / n_cols,
                k % n_cols
            )));
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries,
        })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.as_ref().len());
        if rows.iter().any(|r| r.as_ref().len() != n_cols) {
            return Err(Error::dim("rows have different lengths"));
        }
        let entries = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Self::new(n_rows, n_cols, entries)
    }

    pub fn from_fn(n_rows: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Result<Self> {
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                entries.push(f(i, j));
            }
        }
        Self::new(n_rows, n_cols, entries)
    }

    /// Builds a matrix whose entries are already known to be valid.
    pub(crate) fn from_raw(n_rows: usize, n_cols: usize, entries: Vec<f64>) -> Self {
        debug_assert_eq!(entries.len(), n_rows * n_cols);
        debug_assert!(entries.iter().all(|v| v.is_finite() && *v >= 0.0));
        Self {
            n_rows,
            n_cols,
            entries,
        }
    }

    pub fn filled(n_rows: usize, n_cols: usize, value: f64) -> Result<Self> {
        Self::new(n_rows, n_cols, vec![value; n_rows * n_cols])
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::from_raw(n, n, vec![0.0; n * n]);
        for i in 0..n {
            m.entries[i * n + i] = 1.0;
        }
        m
    }

    pub fn diagonal(d: &[f64]) -> Result<Self> {
        let n = d.len();
        Self::from_fn(n, n, |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// The all-`1/n` matrix.
    pub fn uniform(n: usize) -> Self {
        Self::from_raw(n, n, vec![1.0 / n as f64; n * n])
    }

    /// Permutation matrix with a one at `(i, perm[i])`.
    pub fn permutation(perm: &[usize]) -> Result<Self> {
        let n = perm.len();
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || std::mem::replace(&mut seen[p], true) {
                return Err(Error::arg("not a permutation"));
            }
        }
        Self::from_fn(n, n, |i, j| if perm[i] == j { 1.0 } else { 0.0 })
    }

    #[inline]
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    #[inline]
    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    #[inline]
    pub fn is_square(&self) -> bool {
        self.n_rows == self.n_cols
    }

    /// Side length of a square matrix.
    pub fn order(&self) -> Result<usize> {
        if self.is_square() {
            Ok(self.n_rows)
        } else {
            Err(Error::dim(format!(
                "expected a square matrix, got {}x{}",
                self.n_rows, self.n_cols
            )))
        }
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.n_cols + j]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.entries[i * self.n_cols..(i + 1) * self.n_cols]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.entries.chunks_exact(self.n_cols)
    }

    pub fn entries(&self) -> &[f64] {
        &self.entries
    }

    pub fn into_entries(self) -> Vec<f64> {
        self.entries
    }

    pub fn row_sums(&self) -> Vec<f64> {
        self.rows().map(|r| r.iter().sum()).collect()
    }

    pub fn col_sums(&self) -> Vec<f64> {
        let mut s = vec![0.0; self.n_cols];
        for r in self.rows() {
            for (acc, v) in s.iter_mut().zip(r) {
                *acc += v;
            }
        }
        s
    }

    pub fn max_entry(&self) -> f64 {
        self.entries.iter().copied().fold(0.0, f64::max)
    }

    pub fn transpose(&self) -> Matrix {
        let (r, c) = (self.n_rows, self.n_cols);
        let mut out = vec![0.0; r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.entries[i * c + j];
            }
        }
        Matrix::from_raw(c, r, out)
    }

    /// Row `i` of the result is row `perm[i]` of `self`.
    pub fn permute_rows(&self, perm: &[usize]) -> Matrix {
        assert_eq!(perm.len(), self.n_rows);
        let entries = perm.iter().flat_map(|&p| self.row(p).iter().copied()).collect();
        Matrix::from_raw(self.n_rows, self.n_cols, entries)
    }

    /// Column `j` of the result is column `perm[j]` of `self`.
    pub fn permute_cols(&self, perm: &[usize]) -> Matrix {
        assert_eq!(perm.len(), self.n_cols);
        let entries = self
            .rows()
            .flat_map(|r| perm.iter().map(move |&p| r[p]))
            .collect();
        Matrix::from_raw(self.n_rows, self.n_cols, entries)
    }

    /// Entry-wise map; fails if `f` produces an invalid entry.
    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Matrix> {
        Matrix::new(self.n_rows, self.n_cols, self.entries.iter().map(|&v| f(v)).collect())
    }

    /// `c * self` for `c >= 0`.
    pub fn scaled(&self, c: f64) -> Result<Matrix> {
        self.map(|v| c * v)
    }

    /// `diag(r) * self * diag(c)`.
    pub fn scale_lines(&self, row: &[f64], col: &[f64]) -> Result<Matrix> {
        if row.len() != self.n_rows || col.len() != self.n_cols {
            return Err(Error::dim("scaling vector length mismatch"));
        }
        Matrix::from_fn(self.n_rows, self.n_cols, |i, j| row[i] * self.get(i, j) * col[j])
    }

    /// Rows divided by their sums; zero rows are rejected.
    pub fn row_normalized(&self) -> Result<Matrix> {
        let sums = self.row_sums();
        if sums.iter().any(|&s| s <= 0.0) {
            return Err(Error::domain("cannot row-normalize a matrix with a zero row"));
        }
        let inv: Vec<f64> = sums.iter().map(|s| 1.0 / s).collect();
        self.scale_lines(&inv, &vec![1.0; self.n_cols])
    }

    /// Submatrix on the given row and column index sets.
    pub fn submatrix(&self, rows: &[usize], cols: &[usize]) -> Matrix {
        let entries = rows
            .iter()
            .flat_map(|&i| cols.iter().map(move |&j| self.get(i, j)))
            .collect();
        Matrix::from_raw(rows.len(), cols.len(), entries)
    }

    pub fn is_zero_one(&self) -> bool {
        self.entries.iter().all(|&v| v == 0.0 || v == 1.0)
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.n_rows, self.n_cols), (other.n_rows, other.n_cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Parses the whitespace text format (`"rows cols"` header, then rows),
    /// or headerless CSV when the input contains commas.
    pub fn parse(text: &str) -> Result<Matrix> {
        let lines: Vec<&str> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .collect();
        if lines.is_empty() {
            return Err(Error::Parse("empty matrix input".into()));
        }
        let parse_f = |tok: &str, line: usize| -> Result<f64> {
            tok.trim()
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("line {}: bad number {tok:?}: {e}", line + 1)))
        };
        if text.contains(',') {
            let rows = lines
                .iter()
                .enumerate()
                .map(|(k, l)| l.split(',').map(|t| parse_f(t, k)).collect::<Result<Vec<_>>>())
                .collect::<Result<Vec<_>>>()?;
            return Matrix::from_rows(&rows);
        }
        let header: Vec<&str> = lines[0].split_whitespace().collect();
        let dims = match header.as_slice() {
            [r, c] => r.parse::<usize>().ok().zip(c.parse::<usize>().ok()),
            _ => None,
        };
        let (n_rows, n_cols) =
            dims.ok_or_else(|| Error::Parse("first line must be \"n_rows n_cols\"".into()))?;
        if lines.len() - 1 != n_rows {
            return Err(Error::Parse(format!(
                "header declares {n_rows} rows but {} follow",
                lines.len() - 1
            )));
        }
        let mut entries = Vec::with_capacity(n_rows * n_cols);
        for (k, l) in lines.iter().enumerate().skip(1) {
            let row = l
                .split_whitespace()
                .map(|t| parse_f(t, k))
                .collect::<Result<Vec<_>>>()?;
            if row.len() != n_cols {
                return Err(Error::Parse(format!(
                    "line {}: expected {n_cols} entries, got {}",
                    k + 1,
                    row.len()
                )));
            }
            entries.extend(row);
        }
        Matrix::new(n_rows, n_cols, entries)
    }

    /// Text format with 17 significant digits per entry.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n_rows, self.n_cols);
        for r in self.rows() {
            let line: Vec<String> = r.iter().map(|v| format!("{v:.16e}")).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StochasticityReport {
    pub row_sum_deviation: f64,
    pub col_sum_deviation: f64,
    pub is_row_stochastic: bool,
    pub is_doubly_stochastic: bool,
}

fn max_dev(sums: &[f64]) -> f64 {
    sums.iter().map(|s| (s - 1.0).abs()).fold(0.0, f64::max)
}

pub fn row_sum_deviation(a: &Matrix) -> f64 {
    max_dev(&a.row_sums())
}

pub fn is_row_stochastic(a: &Matrix, tol: f64) -> bool {
    row_sum_deviation(a) <= tol
}

/// Line-sum deviations of a square matrix and the stochasticity verdicts at `tol`.
pub fn classify(a: &Matrix, tol: f64) -> Result<StochasticityReport> {
    if !(tol > 0.0) {
        return Err(Error::arg("tolerance must be positive"));
    }
    a.order()?;
    let row_sum_deviation = max_dev(&a.row_sums());
    let col_sum_deviation = max_dev(&a.col_sums());
    let is_row_stochastic = row_sum_deviation <= tol;
    Ok(StochasticityReport {
        row_sum_deviation,
        col_sum_deviation,
        is_row_stochastic,
        is_doubly_stochastic: is_row_stochastic && col_sum_deviation <= tol,
    })
}

pub fn is_doubly_stochastic(a: &Matrix, tol: f64) -> bool {
    classify(a, tol).is_ok_and(|r| r.is_doubly_stochastic)
}

pub(crate) fn require_doubly_stochastic(a: &Matrix, tol: f64, what: &str) -> Result<()> {
    let r = classify(a, tol)?;
    if r.is_doubly_stochastic {
        Ok(())
    } else {
        Err(Error::domain(format!(
            "{what} must be doubly stochastic (row deviation {:.3e}, column deviation {:.3e})",
            r.row_sum_deviation, r.col_sum_deviation
        )))
    }
}
