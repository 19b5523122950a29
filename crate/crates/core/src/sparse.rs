//! Compressed sparse row storage for complex operators.
//!
//! Dense operands are nalgebra matrices (column-major), so the hot
//! kernels walk one dense column at a time.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

type C64 = Complex64;

#[derive(Debug, Clone, PartialEq)]
pub struct SparseMatrix {
    dim: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, row_ptr: vec![0; dim + 1], col_idx: Vec::new(), vals: Vec::new() }
    }

    pub fn identity(dim: usize) -> Self {
        Self::from_triplets(dim, (0..dim).map(|i| (i, i, C64::new(1.0, 0.0))))
    }

    /// Builds from (row, col, value) triplets; duplicates are summed and
    /// exact zeros dropped.
    pub fn from_triplets<I>(dim: usize, triplets: I) -> Self
    where
        I: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<Vec<(usize, C64)>> = vec![Vec::new(); dim];
        for (r, c, v) in triplets {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) out of bounds for dim {dim}");
            rows[r].push((c, v));
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut col_idx = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != C64::new(0.0, 0.0) {
                    col_idx.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        Self { dim, row_ptr, col_idx, vals }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols());
        let n = m.nrows();
        let mut trip = Vec::new();
        for r in 0..n {
            for c in 0..n {
                let v = m[(r, c)];
                if v.norm_sqr() > 0.0 {
                    trip.push((r, c, v));
                }
            }
        }
        Self::from_triplets(n, trip)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.dim).flat_map(move |r| {
            (self.row_ptr[r]..self.row_ptr[r + 1]).map(move |k| (r, self.col_idx[k], self.vals[k]))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let row = &self.col_idx[self.row_ptr[r]..self.row_ptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.vals[self.row_ptr[r] + k],
            Err(_) => C64::new(0.0, 0.0),
        }
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.dim, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self::from_triplets(self.dim, self.iter().chain(other.iter()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(C64::new(-1.0, 0.0)))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        let mut trip = Vec::new();
        for r in 0..self.dim {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                let mid = self.col_idx[k];
                let a = self.vals[k];
                for k2 in other.row_ptr[mid]..other.row_ptr[mid + 1] {
                    trip.push((r, other.col_idx[k2], a * other.vals[k2]));
                }
            }
        }
        Self::from_triplets(self.dim, trip)
    }

    pub fn kron(&self, other: &Self) -> Self {
        let d2 = other.dim;
        let mut trip = Vec::with_capacity(self.nnz() * other.nnz());
        for (r1, c1, v1) in self.iter() {
            for (r2, c2, v2) in other.iter() {
                trip.push((r1 * d2 + r2, c1 * d2 + c2, v1 * v2));
            }
        }
        Self::from_triplets(self.dim * d2, trip)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// max |A - A†| over entries.
    pub fn hermiticity_defect(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    /// Gershgorin bounds on the real parts of the spectrum.
    pub fn gershgorin_interval(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for r in 0..self.dim {
            let mut diag = 0.0;
            let mut radius = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    diag = self.vals[k].re;
                } else {
                    radius += self.vals[k].norm();
                }
            }
            lo = lo.min(diag - radius);
            hi = hi.max(diag + radius);
        }
        if self.dim == 0 {
            (0.0, 0.0)
        } else {
            (lo, hi)
        }
    }

    /// y = A x
    pub fn mul_vec(&self, x: &DVector<C64>) -> DVector<C64> {
        let mut y = DVector::zeros(self.dim);
        self.mul_vec_acc(C64::new(1.0, 0.0), x.as_slice(), y.as_mut_slice());
        y
    }

    /// y += s A x on raw slices.
    pub fn mul_vec_acc(&self, s: C64, x: &[C64], y: &mut [C64]) {
        for r in 0..self.dim {
            let mut acc = C64::new(0.0, 0.0);
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[r] += s * acc;
        }
    }

    /// Y += s A X for dense column-major X, Y.
    pub fn mul_dense_acc(&self, s: C64, x: &DMatrix<C64>, y: &mut DMatrix<C64>) {
        assert_eq!(x.nrows(), self.dim);
        let n = self.dim;
        let xs = x.as_slice();
        let ys = y.as_mut_slice();
        for j in 0..x.ncols() {
            let xc = &xs[j * n..(j + 1) * n];
            let yc = &mut ys[j * n..(j + 1) * n];
            self.mul_vec_acc(s, xc, yc);
        }
    }

    pub fn mul_dense(&self, x: &DMatrix<C64>) -> DMatrix<C64> {
        let mut y = DMatrix::zeros(self.dim, x.ncols());
        self.mul_dense_acc(C64::new(1.0, 0.0), x, &mut y);
        y
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    #[test]
    fn triplets_sum_duplicates_and_drop_zeros() {
        let m = SparseMatrix::from_triplets(
            2,
            vec![(0, 1, c(1.0, 0.0)), (0, 1, c(2.0, 1.0)), (1, 0, c(1.0, 0.0)), (1, 0, c(-1.0, 0.0))],
        );
        assert_eq!(m.nnz(), 1);
        assert_eq!(m.get(0, 1), c(3.0, 1.0));
    }

    #[test]
    fn kron_matches_dense() {
        let a = DMatrix::from_fn(2, 2, |r, k| c(r as f64 + 1.0, k as f64));
        let b = DMatrix::from_fn(3, 3, |r, k| c((r * k) as f64, 1.0));
        let k = SparseMatrix::from_dense(&a).kron(&SparseMatrix::from_dense(&b)).to_dense();
        let expect = a.kronecker(&b);
        assert!((k - expect).camax() < 1e-14);
    }

    #[test]
    fn products_match_dense() {
        let a = DMatrix::from_fn(4, 4, |r, k| if (r + k) % 3 == 0 { c(r as f64, -(k as f64)) } else { c(0.0, 0.0) });
        let x = DMatrix::from_fn(4, 4, |r, k| c((r + 2 * k) as f64, 0.5));
        let sa = SparseMatrix::from_dense(&a);
        assert!((sa.mul_dense(&x) - &a * &x).camax() < 1e-13);
        assert!((sa.matmul(&sa).to_dense() - &a * &a).camax() < 1e-13);
        assert!((sa.adjoint().to_dense() - a.adjoint()).camax() < 1e-15);
    }
}
