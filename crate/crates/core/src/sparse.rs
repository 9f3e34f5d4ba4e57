//! Compressed-row sparse matrices.

use nalgebra::DMatrix;

use crate::par;

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(col, value)` lists. Columns are sorted and
    /// duplicates summed.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let nrows = rows.len();
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_unstable_by_key(|e| e.0);
            let mut iter = row.into_iter();
            if let Some((mut c, mut v)) = iter.next() {
                for (c2, v2) in iter {
                    if c2 == c {
                        v += v2;
                    } else {
                        col_idx.push(c);
                        vals.push(v);
                        c = c2;
                        v = v2;
                    }
                }
                col_idx.push(c);
                vals.push(v);
            }
            row_ptr.push(col_idx.len());
        }
        debug_assert!(col_idx.iter().all(|&c| c < ncols));
        Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            vals,
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_rows(n, (0..n).map(|i| vec![(i, 1.0)]).collect())
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].iter().copied().zip(self.vals[lo..hi].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        match self.col_idx[lo..hi].binary_search(&j) {
            Ok(k) => self.vals[lo + k],
            Err(_) => 0.0,
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.nrows.min(self.ncols)).map(|i| self.get(i, i)).collect()
    }

    /// `y = A x`
    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        par::fill_indexed(y, |i| self.row(i).map(|(j, v)| v * x[j]).sum());
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn transpose(&self) -> Self {
        let mut rows = vec![Vec::new(); self.ncols];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                rows[j].push((i, v));
            }
        }
        Self::from_rows(self.nrows, rows)
    }

    /// `self + alpha * I`
    pub fn add_diagonal(&self, alpha: f64) -> Self {
        let rows = (0..self.nrows)
            .map(|i| {
                let mut r: Vec<_> = self.row(i).collect();
                r.push((i, alpha));
                r
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    /// `alpha * self + beta * other` (same shape).
    pub fn combine(&self, alpha: f64, other: &Self, beta: f64) -> Self {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let rows = (0..self.nrows)
            .map(|i| {
                self.row(i)
                    .map(|(j, v)| (j, alpha * v))
                    .chain(other.row(i).map(|(j, v)| (j, beta * v)))
                    .collect()
            })
            .collect();
        Self::from_rows(self.ncols, rows)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0, |a, v| a.max(v.abs()))
    }

    /// Largest `|a_ij - a_ji|` relative to the largest entry.
    pub fn symmetry_defect(&self) -> f64 {
        if self.nrows != self.ncols {
            return f64::INFINITY;
        }
        let scale = self.max_abs();
        if scale == 0.0 {
            return 0.0;
        }
        let worst = (0..self.nrows)
            .flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v)))
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max);
        worst / scale
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicates_are_summed_and_sorted() {
        let a = CsrMatrix::from_rows(3, vec![vec![(2, 1.0), (0, 2.0), (2, 3.0)], vec![], vec![(1, -1.0)]]);
        assert_eq!(a.nnz(), 3);
        assert_eq!(a.get(0, 2), 4.0);
        assert_eq!(a.get(1, 1), 0.0);
        assert_eq!(a.matvec(&[1.0, 2.0, 3.0]), vec![14.0, 0.0, -2.0]);
        let t = a.transpose();
        assert_eq!(t.get(2, 0), 4.0);
        assert!(a.symmetry_defect() > 0.0);
        assert_eq!(CsrMatrix::identity(4).symmetry_defect(), 0.0);
    }
}
