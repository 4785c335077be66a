//! Sparse and dense matrix primitives shared by the model, trainer and
//! evaluation code.
//!
//! `SparseMatrix` stores observed entries only (coordinate triplets with a
//! row index for per-row iteration); a missing entry means "unobserved",
//! which is exactly the indicator semantics the objective and gradients
//! rely on. Both types are immutable once built.

use crate::error::{Error, Result};

/// One observed entry of a sparse matrix.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Entry {
    pub row: usize,
    pub col: usize,
    pub value: f64,
}

/// Coordinate-style sparse matrix of nonnegative observed entries,
/// row-sorted with a CSR-like row offset table.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    n_rows: usize,
    n_cols: usize,
    entries: Vec<Entry>,
    row_ptr: Vec<usize>,
}

impl SparseMatrix {
    /// Builds a matrix from (row, col, value) triplets, validating that all
    /// indices are in range, all values are nonnegative and no (row, col)
    /// pair occurs twice. Entry order is canonicalized to (row, col).
    pub fn from_triplets(
        n_rows: usize,
        n_cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut entries: Vec<Entry> = triplets
            .into_iter()
            .map(|(row, col, value)| Entry { row, col, value })
            .collect();
        for e in &entries {
            if e.row >= n_rows || e.col >= n_cols {
                return Err(Error::IndexOutOfRange(format!(
                    "entry ({}, {}) outside {}x{} matrix",
                    e.row, e.col, n_rows, n_cols
                )));
            }
            if e.value < 0.0 || !e.value.is_finite() {
                return Err(Error::NegativeValue {
                    row: e.row,
                    col: e.col,
                    value: e.value,
                });
            }
        }
        entries.sort_by(|a, b| (a.row, a.col).cmp(&(b.row, b.col)));
        for pair in entries.windows(2) {
            if pair[0].row == pair[1].row && pair[0].col == pair[1].col {
                return Err(Error::DuplicateEntry {
                    row: pair[0].row,
                    col: pair[0].col,
                });
            }
        }
        let mut row_ptr = vec![0usize; n_rows + 1];
        for e in &entries {
            row_ptr[e.row + 1] += 1;
        }
        for r in 0..n_rows {
            row_ptr[r + 1] += row_ptr[r];
        }
        Ok(Self {
            n_rows,
            n_cols,
            entries,
            row_ptr,
        })
    }

    /// An empty matrix with the given shape.
    pub fn empty(n_rows: usize, n_cols: usize) -> Self {
        Self {
            n_rows,
            n_cols,
            entries: Vec::new(),
            row_ptr: vec![0; n_rows + 1],
        }
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Number of stored entries (the |A| of a matrix A).
    pub fn nnz(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// All entries in (row, col) order.
    pub fn iter(&self) -> impl Iterator<Item = &Entry> {
        self.entries.iter()
    }

    /// The stored entries of one row.
    pub fn row(&self, row: usize) -> &[Entry] {
        &self.entries[self.row_ptr[row]..self.row_ptr[row + 1]]
    }

    /// The stored value at (row, col), if observed.
    pub fn get(&self, row: usize, col: usize) -> Option<f64> {
        let slice = self.row(row);
        slice
            .binary_search_by(|e| e.col.cmp(&col))
            .ok()
            .map(|i| slice[i].value)
    }

    /// Largest stored value; `None` when the matrix has no entries.
    pub fn max_value(&self) -> Option<f64> {
        self.entries.iter().map(|e| e.value).fold(None, |acc, v| {
            Some(match acc {
                Some(m) if m >= v => m,
                _ => v,
            })
        })
    }

    /// Divides every entry by the maximum entry value, returning the scaled
    /// matrix together with that maximum. Afterwards every stored value lies
    /// in (0, 1]. Fails when there is no positive entry to scale by.
    pub fn normalize_by_max(&self) -> Result<(SparseMatrix, f64)> {
        let max = self.max_value().filter(|&m| m > 0.0).ok_or(Error::NothingToNormalize)?;
        let mut scaled = self.clone();
        for e in &mut scaled.entries {
            e.value /= max;
        }
        Ok((scaled, max))
    }
}

/// Dense d x n matrix of latent feature vectors, one column per entity.
/// Stored column-major so a column is a contiguous slice.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseFactorMatrix {
    d: usize,
    n_cols: usize,
    values: Vec<f64>,
}

impl DenseFactorMatrix {
    pub fn zeros(d: usize, n_cols: usize) -> Self {
        Self {
            d,
            n_cols,
            values: vec![0.0; d * n_cols],
        }
    }

    pub fn from_fn(d: usize, n_cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut values = Vec::with_capacity(d * n_cols);
        for j in 0..n_cols {
            for r in 0..d {
                values.push(f(r, j));
            }
        }
        Self { d, n_cols, values }
    }

    /// Builds from a flat column-major value buffer.
    pub fn from_values(d: usize, n_cols: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != d * n_cols {
            return Err(Error::DimensionMismatch(format!(
                "expected {} values for a {}x{} factor matrix, got {}",
                d * n_cols,
                d,
                n_cols,
                values.len()
            )));
        }
        Ok(Self { d, n_cols, values })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Latent vector of entity `j`.
    pub fn col(&self, j: usize) -> &[f64] {
        &self.values[j * self.d..(j + 1) * self.d]
    }

    pub(crate) fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.values[j * self.d..(j + 1) * self.d]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Sum of squares of all entries.
    pub fn frobenius_norm_sq(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum()
    }

    /// self - scale * other, elementwise.
    pub fn sub_scaled(&self, other: &DenseFactorMatrix, scale: f64) -> DenseFactorMatrix {
        debug_assert_eq!(self.values.len(), other.values.len());
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a - scale * b)
            .collect();
        DenseFactorMatrix {
            d: self.d,
            n_cols: self.n_cols,
            values,
        }
    }

    /// Concatenates matrices column-wise; all inputs must share d.
    pub fn hstack(parts: &[&DenseFactorMatrix]) -> Result<DenseFactorMatrix> {
        let d = parts
            .first()
            .map(|m| m.d)
            .ok_or_else(|| Error::InvalidInput("hstack of zero matrices".into()))?;
        let mut values = Vec::new();
        let mut n_cols = 0;
        for m in parts {
            if m.d != d {
                return Err(Error::DimensionMismatch(format!(
                    "hstack: d {} vs {}",
                    m.d, d
                )));
            }
            values.extend_from_slice(&m.values);
            n_cols += m.n_cols;
        }
        Ok(DenseFactorMatrix { d, n_cols, values })
    }
}

/// Dot product of two latent vectors.
pub fn inner_product(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "inner product of length {} and {}",
            a.len(),
            b.len()
        )));
    }
    Ok(dot(a, b))
}

/// Unchecked dot product for the hot loops; columns of one model always
/// share d by construction.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
