//! Compressed sparse row matrix and sparse-dense products.
//!
//! Invariants held by every constructed `CsrMatrix`:
//! - `row_offsets` has `rows + 1` entries, starts at 0, is non-decreasing;
//! - column indices within each row are strictly increasing (so a row
//!   never stores a duplicate column);
//! - every column index is below `cols`.

use crate::error::{Error, Result};
use crate::matrix::DenseMatrix;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from triplets. Entries are sorted by (row, col); duplicate
    /// coordinates are rejected rather than summed, because every caller in
    /// this crate dedups first and a silent sum would hide bugs.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        entries: &[(usize, usize, f64)],
    ) -> Result<Self> {
        for &(r, c, _) in entries {
            if r >= rows || c >= cols {
                return Err(Error::validation(format!(
                    "entry ({r}, {c}) outside a {rows}x{cols} matrix"
                )));
            }
        }
        let mut sorted: Vec<&(usize, usize, f64)> = entries.iter().collect();
        sorted.sort_by_key(|&&(r, c, _)| (r, c));
        for w in sorted.windows(2) {
            if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                return Err(Error::validation(format!(
                    "duplicate entry at ({}, {})",
                    w[0].0, w[0].1
                )));
            }
        }

        let mut row_offsets = vec![0usize; rows + 1];
        for &&(r, _, _) in &sorted {
            row_offsets[r + 1] += 1;
        }
        for i in 0..rows {
            row_offsets[i + 1] += row_offsets[i];
        }
        let col_indices = sorted.iter().map(|&&(_, c, _)| c).collect();
        let values = sorted.iter().map(|&&(_, _, v)| v).collect();
        Ok(CsrMatrix {
            rows,
            cols,
            row_offsets,
            col_indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.col_indices.len()
    }

    /// Column indices of row `i`, ascending.
    #[inline]
    pub fn row_indices(&self, i: usize) -> &[usize] {
        &self.col_indices[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    /// Values of row `i`, aligned with `row_indices`.
    #[inline]
    pub fn row_values(&self, i: usize) -> &[f64] {
        &self.values[self.row_offsets[i]..self.row_offsets[i + 1]]
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    /// Iterates all stored entries in (row, col) order.
    pub fn iter_entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |r| {
            self.row_indices(r)
                .iter()
                .zip(self.row_values(r))
                .map(move |(&c, &v)| (r, c, v))
        })
    }

    /// Looks up a single entry, zero if absent.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        match self.row_indices(r).binary_search(&c) {
            Ok(pos) => self.row_values(r)[pos],
            Err(_) => 0.0,
        }
    }

    /// Entry-wise value transform that preserves the sparsity pattern.
    pub fn map_values(&self, f: impl Fn(usize, usize, f64) -> f64) -> CsrMatrix {
        let mut out = self.clone();
        for r in 0..self.rows {
            let (start, end) = (self.row_offsets[r], self.row_offsets[r + 1]);
            for idx in start..end {
                out.values[idx] = f(r, self.col_indices[idx], self.values[idx]);
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut out = DenseMatrix::zeros(self.rows, self.cols);
        for (r, c, v) in self.iter_entries() {
            out.set(r, c, v);
        }
        out
    }
}

/// Sparse-dense product `A * M`. Accumulates each output row in ascending
/// column-index order, which makes it agree bit-for-bit with a dense loop
/// over the same nonzeros.
pub fn spmm(a: &CsrMatrix, m: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols() != m.rows() {
        return Err(Error::validation(format!(
            "spmm shape mismatch: {}x{} * {}x{}",
            a.rows(),
            a.cols(),
            m.rows(),
            m.cols()
        )));
    }
    let mut out = DenseMatrix::zeros(a.rows(), m.cols());
    for i in 0..a.rows() {
        let dst = out.row_mut(i);
        for (&j, &v) in a.row_indices(i).iter().zip(a.row_values(i)) {
            let src = m.row(j);
            for (d, &s) in dst.iter_mut().zip(src) {
                *d += v * s;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn dense_oracle(a: &CsrMatrix, m: &DenseMatrix) -> DenseMatrix {
        // Same nonzero ordering as spmm, written as the obvious triple loop.
        let ad = a.to_dense();
        let mut out = DenseMatrix::zeros(a.rows(), m.cols());
        for i in 0..a.rows() {
            for k in 0..a.cols() {
                let v = ad.get(i, k);
                if v != 0.0 {
                    for j in 0..m.cols() {
                        out.set(i, j, out.get(i, j) + v * m.get(k, j));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn from_triplets_sorts_and_validates() {
        let a = CsrMatrix::from_triplets(2, 3, &[(1, 2, 5.0), (0, 1, 2.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(a.row_indices(1), &[0, 2]);
        assert_eq!(a.row_values(1), &[3.0, 5.0]);
        assert_eq!(a.get(0, 1), 2.0);
        assert_eq!(a.get(0, 0), 0.0);

        assert!(CsrMatrix::from_triplets(2, 2, &[(0, 5, 1.0)]).is_err());
        assert!(CsrMatrix::from_triplets(2, 2, &[(0, 1, 1.0), (0, 1, 2.0)]).is_err());
    }

    #[test]
    fn spmm_matches_dense_oracle_exactly() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for trial in 0..20 {
            let rows = 1 + rng.gen_range(0..20);
            let cols = 1 + rng.gen_range(0..20);
            let inner = 1 + rng.gen_range(0..20);
            let mut entries = Vec::new();
            for r in 0..rows {
                for c in 0..inner {
                    if rng.gen_bool(0.3) {
                        entries.push((r, c, rng.gen_range(-2.0..2.0)));
                    }
                }
            }
            let a = CsrMatrix::from_triplets(rows, inner, &entries).unwrap();
            let m = DenseMatrix::from_vec(
                inner,
                cols,
                (0..inner * cols).map(|_| rng.gen_range(-2.0..2.0)).collect(),
            )
            .unwrap();
            let fast = spmm(&a, &m).unwrap();
            let slow = dense_oracle(&a, &m);
            assert!(
                fast.max_abs_diff(&slow) <= 1e-12,
                "trial {trial} diverged from oracle"
            );
        }
    }

    #[test]
    fn spmm_rejects_shape_mismatch() {
        let a = CsrMatrix::from_triplets(2, 2, &[(0, 0, 1.0)]).unwrap();
        let m = DenseMatrix::zeros(3, 1);
        assert!(spmm(&a, &m).is_err());
    }
}
