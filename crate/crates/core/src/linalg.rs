//! Sparse column-major storage and the dense kernels the solvers run on.
//!
//! Columns are examples: every algorithmic access (`A_i^T w`, column
//! blocks, local Gram matrices) walks one column at a time, so the matrix
//! is stored as compressed sparse columns.

use std::ops::{Deref, DerefMut};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Owned dense vector of `f64`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct DenseVec(Vec<f64>);

impl DenseVec {
    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn from_vec(values: Vec<f64>) -> Self {
        Self(values)
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.0
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        norm(&self.0)
    }

    pub fn norm_sq(&self) -> f64 {
        dot(&self.0, &self.0)
    }

    /// `self += a * x`
    pub fn axpy(&mut self, a: f64, x: &[f64]) {
        axpy(a, x, &mut self.0);
    }

    pub fn scale(&mut self, a: f64) {
        self.0.iter_mut().for_each(|v| *v *= a);
    }

    pub fn is_finite(&self) -> bool {
        self.0.iter().all(|v| v.is_finite())
    }

    pub fn check_len(&self, expected: usize) -> Result<()> {
        if self.0.len() == expected {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected,
                got: self.0.len(),
            })
        }
    }
}

impl Deref for DenseVec {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl DerefMut for DenseVec {
    fn deref_mut(&mut self) -> &mut [f64] {
        &mut self.0
    }
}

impl From<Vec<f64>> for DenseVec {
    fn from(v: Vec<f64>) -> Self {
        Self(v)
    }
}

impl FromIterator<f64> for DenseVec {
    fn from_iter<I: IntoIterator<Item = f64>>(iter: I) -> Self {
        Self(iter.into_iter().collect())
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += a * x`
pub fn axpy(a: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += a * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> DenseVec {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Sparse matrix `A` of shape `d x n` stored column-major.
///
/// Row indices inside a column are strictly increasing and no explicit
/// zeros are stored.
#[derive(Debug, Clone, PartialEq)]
pub struct ColMatrix {
    d: usize,
    n: usize,
    col_ptr: Vec<usize>,
    row_idx: Vec<usize>,
    values: Vec<f64>,
    col_norms: Vec<f64>,
}

impl ColMatrix {
    /// Builds a matrix from `(row, col, value)` triplets. Zero values are
    /// dropped; duplicate coordinates are rejected.
    pub fn from_triplets(entries: &[(usize, usize, f64)], d: usize, n: usize) -> Result<Self> {
        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for &(r, c, v) in entries {
            if r >= d {
                return Err(Error::IndexOutOfRange {
                    what: "row",
                    index: r,
                    bound: d,
                });
            }
            if c >= n {
                return Err(Error::IndexOutOfRange {
                    what: "column",
                    index: c,
                    bound: n,
                });
            }
            if !v.is_finite() {
                return Err(Error::NonFinite("matrix entry"));
            }
            columns[c].push((r, v));
        }
        for (c, col) in columns.iter_mut().enumerate() {
            col.sort_by_key(|&(r, _)| r);
            if let Some(w) = col.windows(2).find(|w| w[0].0 == w[1].0) {
                return Err(Error::DuplicateEntry { row: w[0].0, col: c });
            }
        }
        Ok(Self::from_sorted_columns(d, columns))
    }

    /// Builds a matrix from per-column lists already sorted by row.
    pub fn from_columns(d: usize, columns: Vec<Vec<(usize, f64)>>) -> Result<Self> {
        for (c, col) in columns.iter().enumerate() {
            for w in col.windows(2) {
                if w[0].0 == w[1].0 {
                    return Err(Error::DuplicateEntry { row: w[0].0, col: c });
                }
                if w[0].0 > w[1].0 {
                    return Err(Error::InvalidSpec(format!("column {c} rows not sorted")));
                }
            }
            if let Some(&(r, _)) = col.last() {
                if r >= d {
                    return Err(Error::IndexOutOfRange {
                        what: "row",
                        index: r,
                        bound: d,
                    });
                }
            }
        }
        Ok(Self::from_sorted_columns(d, columns))
    }

    fn from_sorted_columns(d: usize, columns: Vec<Vec<(usize, f64)>>) -> Self {
        let n = columns.len();
        let mut col_ptr = Vec::with_capacity(n + 1);
        let mut row_idx = Vec::new();
        let mut values = Vec::new();
        col_ptr.push(0);
        for col in columns {
            for (r, v) in col {
                if v != 0.0 {
                    row_idx.push(r);
                    values.push(v);
                }
            }
            col_ptr.push(row_idx.len());
        }
        let mut m = Self {
            d,
            n,
            col_ptr,
            row_idx,
            values,
            col_norms: Vec::new(),
        };
        m.col_norms = (0..n).map(|i| norm(m.column(i).1)).collect();
        m
    }

    /// Dense `d x n` array (row-major `Vec` of rows); test and audit helper.
    pub fn from_dense_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let d = rows.len();
        let n = rows.first().map_or(0, Vec::len);
        let mut entries = Vec::new();
        for (r, row) in rows.iter().enumerate() {
            if row.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: row.len(),
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if v != 0.0 {
                    entries.push((r, c, v));
                }
            }
        }
        Self::from_triplets(&entries, d, n)
    }

    pub fn rows(&self) -> usize {
        self.d
    }

    pub fn cols(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn col_norms(&self) -> &[f64] {
        &self.col_norms
    }

    pub fn col_norm(&self, i: usize) -> f64 {
        self.col_norms[i]
    }

    /// Row indices and values of column `i`.
    pub fn column(&self, i: usize) -> (&[usize], &[f64]) {
        let (s, e) = (self.col_ptr[i], self.col_ptr[i + 1]);
        (&self.row_idx[s..e], &self.values[s..e])
    }

    pub fn column_dense(&self, i: usize) -> DenseVec {
        let mut out = DenseVec::zeros(self.d);
        let (rows, vals) = self.column(i);
        for (&r, &v) in rows.iter().zip(vals) {
            out[r] = v;
        }
        out
    }

    /// Row-major dense copy.
    pub fn to_dense_rows(&self) -> Vec<Vec<f64>> {
        let mut out = vec![vec![0.0; self.n]; self.d];
        for i in 0..self.n {
            let (rows, vals) = self.column(i);
            for (&r, &v) in rows.iter().zip(vals) {
                out[r][i] = v;
            }
        }
        out
    }

    /// Divides every nonzero column by its norm. Returns the normalized
    /// matrix and the divisors (1.0 for zero columns).
    pub fn normalize_columns(&self) -> (ColMatrix, DenseVec) {
        let mut out = self.clone();
        let mut scales = DenseVec::zeros(self.n);
        for i in 0..self.n {
            let nrm = self.col_norms[i];
            // Columns already at unit norm keep a scale of exactly one so
            // normalization is idempotent.
            let s = if nrm == 0.0 || (nrm - 1.0).abs() <= 1e-15 {
                1.0
            } else {
                nrm
            };
            scales[i] = s;
            if s != 1.0 {
                let (start, end) = (out.col_ptr[i], out.col_ptr[i + 1]);
                for v in &mut out.values[start..end] {
                    *v /= s;
                }
            }
            let (_, vals) = out.column(i);
            out.col_norms[i] = norm(vals);
        }
        (out, scales)
    }

    /// `A x` for `x` of length n.
    pub fn mat_vec(&self, x: &[f64]) -> Result<DenseVec> {
        if x.len() != self.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: x.len(),
            });
        }
        let mut out = DenseVec::zeros(self.d);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                self.add_col_to(i, xi, &mut out);
            }
        }
        Ok(out)
    }

    /// `A^T w` for `w` of length d.
    pub fn t_mat_vec(&self, w: &[f64]) -> Result<DenseVec> {
        if w.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: w.len(),
            });
        }
        Ok((0..self.n).map(|i| self.col_dot_unchecked(i, w)).collect())
    }

    /// `A_i^T w`.
    pub fn col_dot(&self, i: usize, w: &[f64]) -> Result<f64> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange {
                what: "column",
                index: i,
                bound: self.n,
            });
        }
        if w.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: w.len(),
            });
        }
        Ok(self.col_dot_unchecked(i, w))
    }

    #[inline]
    pub(crate) fn col_dot_unchecked(&self, i: usize, w: &[f64]) -> f64 {
        let (rows, vals) = self.column(i);
        rows.iter().zip(vals).map(|(&r, &v)| v * w[r]).sum()
    }

    /// `out += a * A_i`
    #[inline]
    pub fn add_col_to(&self, i: usize, a: f64, out: &mut [f64]) {
        let (rows, vals) = self.column(i);
        for (&r, &v) in rows.iter().zip(vals) {
            out[r] += a * v;
        }
    }

    /// Largest eigenvalue of the Gram matrix `A^T A` (equivalently of `A A^T`).
    pub fn gram_max_eig(&self, iters: usize, tol: f64, seed: u64) -> Result<f64> {
        let mut tmp = vec![0.0; self.d];
        power_max_eig(
            self.d,
            |x, y| {
                // y = A A^T x
                tmp.iter_mut().for_each(|v| *v = 0.0);
                y.iter_mut().for_each(|v| *v = 0.0);
                for i in 0..self.n {
                    let c = self.col_dot_unchecked(i, x);
                    if c != 0.0 {
                        self.add_col_to(i, c, y);
                    }
                }
            },
            iters,
            tol,
            seed,
        )
    }
}

/// Power iteration for the largest eigenvalue of a symmetric positive
/// semidefinite map on vectors of length `dim`.
///
/// `op(x, y)` must overwrite `y` with the image of `x`. Iteration stops
/// once the Rayleigh quotient changes by less than `tol` relative, or
/// after `iters` applications.
pub fn power_max_eig<F>(dim: usize, mut op: F, iters: usize, tol: f64, seed: u64) -> Result<f64>
where
    F: FnMut(&[f64], &mut [f64]),
{
    if dim == 0 {
        return Ok(0.0);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
    let nx = norm(&x);
    x.iter_mut().for_each(|v| *v /= nx);
    let mut y = vec![0.0; dim];
    let mut lambda = 0.0;
    for it in 0..iters.max(1) {
        op(&x, &mut y);
        if !y.iter().all(|v| v.is_finite()) {
            return Err(Error::NonFinite("power iteration"));
        }
        let rq = dot(&x, &y);
        let ny = norm(&y);
        if ny == 0.0 {
            return Ok(0.0);
        }
        let converged = it > 0 && (rq - lambda).abs() <= tol * rq.abs();
        lambda = rq;
        if converged {
            break;
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / ny;
        }
    }
    Ok(lambda.max(0.0))
}
