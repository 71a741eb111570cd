//! Row-major dense f64 matrix.
//!
//! Small on purpose: the models and estimators in this crate are desk-scale,
//! so a flat `Vec<f64>` with explicit loops is easier to audit than a
//! full linear algebra dependency. Products accumulate left-to-right in
//! index order, which keeps results reproducible bit-for-bit.

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// Builds from a flat row-major buffer. `data.len()` must equal
    /// `rows * cols`.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::validation(format!(
                "matrix buffer has {} entries, expected {} ({} x {})",
                data.len(),
                rows * cols,
                rows,
                cols
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    /// Builds from nested rows. All rows must share one length.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.len());
        for (i, r) in rows.iter().enumerate() {
            if r.len() != cols {
                return Err(Error::validation(format!(
                    "row {} has {} entries, expected {}",
                    i,
                    r.len(),
                    cols
                )));
            }
        }
        let data = rows.iter().flatten().copied().collect();
        Ok(DenseMatrix {
            rows: rows.len(),
            cols,
            data,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j] = v;
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    /// `self * other`, `(m x k) * (k x n) -> (m x n)`.
    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        // i-k-j order: stream through other's rows instead of its columns.
        for i in 0..self.rows {
            let lhs = self.row(i);
            let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in lhs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let rhs = &other.data[k * other.cols..(k + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(rhs) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self^T * other`, `(m x k)^T * (m x n) -> (k x n)`. Used for weight
    /// gradients without materializing a transpose.
    pub fn matmul_at_b(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.rows, other.rows,
            "matmul_at_b shape mismatch: {}x{} vs {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DenseMatrix::zeros(self.cols, other.cols);
        for i in 0..self.rows {
            let lhs = self.row(i);
            let rhs = other.row(i);
            for (k, &a) in lhs.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let dst = &mut out.data[k * other.cols..(k + 1) * other.cols];
                for (d, &b) in dst.iter_mut().zip(rhs) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `self * other^T`, `(m x k) * (n x k)^T -> (m x n)`. Used to push
    /// gradients back through a linear layer.
    pub fn matmul_a_bt(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(
            self.cols, other.cols,
            "matmul_a_bt shape mismatch: {}x{} vs {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let mut out = DenseMatrix::zeros(self.rows, other.rows);
        for i in 0..self.rows {
            let lhs = self.row(i);
            for j in 0..other.rows {
                let rhs = other.row(j);
                let mut acc = 0.0;
                for (&a, &b) in lhs.iter().zip(rhs) {
                    acc += a * b;
                }
                out.data[i * other.rows + j] = acc;
            }
        }
        out
    }

    /// Concatenates columns of `a` and `b` (same row count).
    pub fn hstack(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!(a.rows, b.rows, "hstack row mismatch");
        let mut out = DenseMatrix::zeros(a.rows, a.cols + b.cols);
        for i in 0..a.rows {
            out.data[i * out.cols..i * out.cols + a.cols].copy_from_slice(a.row(i));
            out.data[i * out.cols + a.cols..(i + 1) * out.cols].copy_from_slice(b.row(i));
        }
        out
    }

    /// Entry-wise mean of two equal-shape matrices.
    pub fn mean_of(a: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
        assert_eq!((a.rows, a.cols), (b.rows, b.cols), "mean_of shape mismatch");
        let data = a
            .data
            .iter()
            .zip(&b.data)
            .map(|(&x, &y)| 0.5 * (x + y))
            .collect();
        DenseMatrix {
            rows: a.rows,
            cols: a.cols,
            data,
        }
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> DenseMatrix {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Largest absolute entry-wise difference between equal-shape matrices.
    pub fn max_abs_diff(&self, other: &DenseMatrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_small() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![5.0, 6.0], vec![7.0, 8.0]]).unwrap();
        let c = a.matmul(&b);
        assert_eq!(c.data(), &[19.0, 22.0, 43.0, 50.0]);
    }

    #[test]
    fn transpose_products_agree_with_explicit_transpose() {
        let a = DenseMatrix::from_rows(&[vec![1.0, -2.0, 0.5], vec![0.0, 3.0, 1.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![-1.0, 4.0]]).unwrap();
        // a^T (3x2) * b (2x2)
        let atb = a.matmul_at_b(&b);
        assert_eq!(atb.rows(), 3);
        assert_eq!(atb.cols(), 2);
        assert_eq!(atb.get(0, 0), 1.0 * 2.0 - 0.0 * 1.0);
        assert_eq!(atb.get(1, 1), -2.0 * 1.0 + 3.0 * 4.0);

        // a (2x3) * c^T where c is (4x3)
        let c = DenseMatrix::from_rows(&[
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![1.0, 1.0, 1.0],
        ])
        .unwrap();
        let abt = a.matmul_a_bt(&c);
        assert_eq!(abt.get(0, 3), 1.0 - 2.0 + 0.5);
        assert_eq!(abt.get(1, 0), 0.0);
    }

    #[test]
    fn from_rows_rejects_ragged_input() {
        let err = DenseMatrix::from_rows(&[vec![1.0], vec![1.0, 2.0]]);
        assert!(err.is_err());
    }

    #[test]
    fn hstack_and_mean() {
        let a = DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap();
        let b = DenseMatrix::from_rows(&[vec![3.0]]).unwrap();
        let h = DenseMatrix::hstack(&a, &b);
        assert_eq!(h.row(0), &[1.0, 2.0, 3.0]);

        let m = DenseMatrix::mean_of(&a, &a.map(|x| x + 2.0));
        assert_eq!(m.row(0), &[2.0, 3.0]);
    }
}
