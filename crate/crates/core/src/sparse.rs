//! Compressed sparse row matrices.

use rayon::prelude::*;

use crate::dense::DenseMatrix;
use crate::error::{Error, Result};

const PAR_ROWS: usize = 256;

/// CSR matrix with sorted, duplicate-free column indices per row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Assemble from `(row, col, value)` triplets. Duplicates are summed;
    /// explicit zeros produced by summation are kept.
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Result<Self> {
        let mut t: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        for &(r, c, v) in &t {
            if r >= rows || c >= cols {
                return Err(Error::Shape(format!(
                    "entry ({r}, {c}) outside {rows}x{cols}"
                )));
            }
            if !v.is_finite() {
                return Err(Error::Data(format!("non-finite entry at ({r}, {c})")));
            }
        }
        t.sort_unstable_by_key(|a| (a.0, a.1));
        let mut indptr = vec![0usize; rows + 1];
        let mut indices = Vec::with_capacity(t.len());
        let mut values: Vec<f64> = Vec::with_capacity(t.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in t {
            if last == Some((r, c)) {
                *values.last_mut().expect("nonempty") += v;
                continue;
            }
            indices.push(c);
            values.push(v);
            indptr[r + 1] += 1;
            last = Some((r, c));
        }
        for i in 0..rows {
            indptr[i + 1] += indptr[i];
        }
        Ok(Self {
            rows,
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn identity(n: usize) -> Self {
        Self {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn from_diagonal(d: &[f64]) -> Self {
        let mut m = Self::identity(d.len());
        m.values.copy_from_slice(d);
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }

    /// Column indices and values of row `i`.
    #[inline]
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.indptr[i], self.indptr[i + 1]);
        (&self.indices[a..b], &self.values[a..b])
    }

    pub fn row_iter(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (c, v) = self.row(i);
        c.iter().copied().zip(v.iter().copied())
    }

    /// Iterate all stored entries as `(row, col, value)`.
    pub fn triplets(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.rows).flat_map(move |i| self.row_iter(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        match c.binary_search(&j) {
            Ok(p) => v[p],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.rows.min(self.cols))
            .map(|i| self.get(i, i))
            .collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.rows).map(|i| self.row(i).1.iter().sum()).collect()
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The nonzero entries of `d`.
    pub fn from_dense(d: &DenseMatrix) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(d.rows() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for i in 0..d.rows() {
            for (j, &v) in d.row(i).iter().enumerate() {
                if v != 0.0 {
                    indices.push(j);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: d.rows(),
            cols: d.cols(),
            indptr,
            indices,
            values,
        }
    }

    /// Visit stored entries in row-major order; `f` returns the new value or
    /// `None` to drop the entry.
    pub fn filter_map_entries(
        &self,
        mut f: impl FnMut(usize, usize, f64) -> Option<f64>,
    ) -> CsrMatrix {
        let mut indptr = Vec::with_capacity(self.rows + 1);
        let mut indices = Vec::with_capacity(self.nnz());
        let mut values = Vec::with_capacity(self.nnz());
        indptr.push(0);
        for i in 0..self.rows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                if let Some(v) = f(i, self.indices[p], self.values[p]) {
                    indices.push(self.indices[p]);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        CsrMatrix {
            rows: self.rows,
            cols: self.cols,
            indptr,
            indices,
            values,
        }
    }

    /// Apply `f(row, col, value)` to every stored value, keeping the pattern.
    pub fn map_entries(&self, f: impl Fn(usize, usize, f64) -> f64) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.rows {
            for p in self.indptr[i]..self.indptr[i + 1] {
                out.values[p] = f(i, self.indices[p], self.values[p]);
            }
        }
        out
    }

    pub fn transpose(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(
            self.cols,
            self.rows,
            self.triplets().map(|(i, j, v)| (j, i, v)),
        )
        .expect("transpose of a valid matrix is valid")
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.rows == self.cols
            && self
                .triplets()
                .all(|(i, j, v)| (self.get(j, i) - v).abs() <= tol)
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for (i, j, v) in self.triplets() {
            d.set(i, j, d.get(i, j) + v);
        }
        d
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec length mismatch");
        let f = |i: usize| self.row_iter(i).map(|(j, v)| v * x[j]).sum::<f64>();
        if self.rows >= PAR_ROWS * 8 {
            (0..self.rows).into_par_iter().map(f).collect()
        } else {
            (0..self.rows).map(f).collect()
        }
    }

    /// Sparse times dense: `self * x`.
    pub fn spmm(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.rows(), self.cols, "spmm inner dimension mismatch");
        let m = x.cols();
        let mut out = DenseMatrix::zeros(self.rows, m);
        if m == 0 {
            return out;
        }
        let kernel = |(i, out_row): (usize, &mut [f64])| {
            for (j, v) in self.row_iter(i) {
                for (o, &xv) in out_row.iter_mut().zip(x.row(j)) {
                    *o += v * xv;
                }
            }
        };
        if self.rows >= PAR_ROWS {
            out.as_mut_slice()
                .par_chunks_mut(m)
                .enumerate()
                .for_each(kernel);
        } else {
            out.as_mut_slice()
                .chunks_mut(m)
                .enumerate()
                .for_each(kernel);
        }
        out
    }

    /// `selfᵀ * x`, accumulated row by row (deterministic).
    pub fn t_spmm(&self, x: &DenseMatrix) -> DenseMatrix {
        assert_eq!(x.rows(), self.rows, "t_spmm dimension mismatch");
        let m = x.cols();
        let mut out = DenseMatrix::zeros(self.cols, m);
        for i in 0..self.rows {
            let xi = x.row(i);
            for (j, v) in self.row_iter(i) {
                for (o, &xv) in out.row_mut(j).iter_mut().zip(xi) {
                    *o += v * xv;
                }
            }
        }
        out
    }

    /// Sparse-sparse product.
    pub fn matmul(&self, other: &CsrMatrix) -> CsrMatrix {
        assert_eq!(self.cols, other.rows, "sparse matmul mismatch");
        let mut trip = Vec::new();
        for i in 0..self.rows {
            for (k, a) in self.row_iter(i) {
                for (j, b) in other.row_iter(k) {
                    trip.push((i, j, a * b));
                }
            }
        }
        CsrMatrix::from_triplets(self.rows, other.cols, trip).expect("valid product")
    }

    /// Largest absolute row sum; an upper bound on the spectral norm of a
    /// symmetric matrix.
    pub fn inf_norm(&self) -> f64 {
        (0..self.rows)
            .map(|i| self.row(i).1.iter().map(|v| v.abs()).sum::<f64>())
            .fold(0.0, f64::max)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let m = CsrMatrix::from_triplets(
            2,
            3,
            vec![(1, 2, 1.0), (0, 1, 2.0), (1, 2, 0.5), (1, 0, 4.0)],
        )
        .unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(1).0, &[0, 2]);
        assert_eq!(m.get(1, 2), 1.5);
        assert_eq!(m.get(0, 0), 0.0);
    }

    #[test]
    fn out_of_range_entry_is_rejected() {
        assert!(CsrMatrix::from_triplets(2, 2, vec![(2, 0, 1.0)]).is_err());
    }

    #[test]
    fn spmm_and_transpose_agree_with_dense() {
        let m = CsrMatrix::from_triplets(
            3,
            2,
            vec![(0, 0, 1.0), (1, 1, -2.0), (2, 0, 3.0), (2, 1, 0.5)],
        )
        .unwrap();
        let x = DenseMatrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        assert_eq!(m.spmm(&x), m.to_dense().matmul(&x));
        let y = DenseMatrix::from_rows(&[vec![1.0], vec![2.0], vec![3.0]]);
        assert_eq!(m.t_spmm(&y), m.to_dense().t_matmul(&y));
        assert_eq!(m.transpose().to_dense(), m.to_dense().transpose());
    }
}
