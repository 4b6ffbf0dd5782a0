//! Small dense row-major matrices.
//!
//! State dimensions in this crate are small (n ≤ a few tens), so a plain `Vec`
//! backed matrix with allocation-free `*_into` kernels is all that is needed.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Clone, Debug, PartialEq)]
pub struct Mat<T> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Scalar> Mat<T> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![T::zero(); rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = T::one();
        }
        m
    }

    pub fn from_diag(diag: &[T]) -> Self {
        let mut m = Self::zeros(diag.len(), diag.len());
        for (i, &v) in diag.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    /// Builds a matrix from row-major data. Panics if the length does not match.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "matrix data length mismatch");
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<T>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|row| row.len() != c) {
            return Err(Error::InvalidArgument("ragged matrix rows".into()));
        }
        Ok(Self { rows: r, cols: c, data: rows.iter().flatten().copied().collect() })
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[T] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<T> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn fill(&mut self, v: T) {
        self.data.iter_mut().for_each(|x| *x = v);
    }

    pub fn set_identity(&mut self) {
        debug_assert_eq!(self.rows, self.cols);
        self.fill(T::zero());
        for i in 0..self.rows {
            self[(i, i)] = T::one();
        }
    }

    pub fn copy_from(&mut self, other: &Mat<T>) {
        debug_assert_eq!(self.shape(), other.shape());
        self.data.copy_from_slice(&other.data);
    }

    pub fn transpose(&self) -> Mat<T> {
        let mut t = Mat::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t[(j, i)] = self[(i, j)];
            }
        }
        t
    }

    pub fn scaled(&self, s: T) -> Mat<T> {
        Mat { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&v| v * s).collect() }
    }

    /// `self += s * other`
    pub fn add_scaled(&mut self, s: T, other: &Mat<T>) {
        debug_assert_eq!(self.shape(), other.shape());
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a += s * b;
        }
    }

    pub fn sub(&self, other: &Mat<T>) -> Mat<T> {
        let mut out = self.clone();
        out.add_scaled(-T::one(), other);
        out
    }

    pub fn matmul(&self, rhs: &Mat<T>) -> Mat<T> {
        let mut out = Mat::zeros(self.rows, rhs.cols);
        matmul_into(self, rhs, &mut out);
        out
    }

    pub fn matvec(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.rows];
        matvec_into(self, v, &mut out);
        out
    }

    /// `vᵀ · self` as a row vector.
    pub fn vecmat(&self, v: &[T]) -> Vec<T> {
        let mut out = vec![T::zero(); self.cols];
        vecmat_into(v, self, &mut out);
        out
    }

    pub fn frobenius_norm(&self) -> T {
        self.data.iter().map(|&v| v * v).sum::<T>().sqrt()
    }

    pub fn max_abs(&self) -> T {
        self.data.iter().fold(T::zero(), |m, &v| m.max(v.abs()))
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn is_symmetric(&self, tol: T) -> bool {
        self.rows == self.cols && (0..self.rows).all(|i| (0..i).all(|j| (self[(i, j)] - self[(j, i)]).abs() <= tol))
    }

    /// Lower Cholesky factor `L` with `L Lᵀ = self`, tolerant of positive
    /// semi-definite input: a vanishing pivot zeroes its column provided the rest of
    /// the column vanishes too.
    pub fn cholesky(&self) -> Result<Mat<T>> {
        if self.rows != self.cols {
            return Err(Error::Factorization(format!("matrix is {}x{}, not square", self.rows, self.cols)));
        }
        let scale = self.max_abs().max(T::one());
        let tol = T::epsilon() * T::lit(64.0) * scale * T::from_usize_lossy(self.rows.max(1));
        if !self.is_symmetric(tol) {
            return Err(Error::Factorization("matrix is not symmetric".into()));
        }
        let n = self.rows;
        let mut l = Mat::zeros(n, n);
        for j in 0..n {
            let mut d = self[(j, j)];
            for p in 0..j {
                d -= l[(j, p)] * l[(j, p)];
            }
            if d < -tol {
                return Err(Error::Factorization(format!("negative pivot {d} at {j}")));
            }
            if d <= tol {
                for i in j + 1..n {
                    let mut s = self[(i, j)];
                    for p in 0..j {
                        s -= l[(i, p)] * l[(j, p)];
                    }
                    if s.abs() > tol.sqrt() {
                        return Err(Error::Factorization(format!("matrix is not positive semi-definite (column {j})")));
                    }
                }
                continue;
            }
            let djj = d.sqrt();
            l[(j, j)] = djj;
            for i in j + 1..n {
                let mut s = self[(i, j)];
                for p in 0..j {
                    s -= l[(i, p)] * l[(j, p)];
                }
                l[(i, j)] = s / djj;
            }
        }
        Ok(l)
    }

    /// Solves `self · X = rhs` for symmetric positive definite `self`.
    pub fn spd_solve(&self, rhs: &Mat<T>) -> Result<Mat<T>> {
        let l = self.cholesky()?;
        let n = self.rows;
        if (0..n).any(|i| l[(i, i)] <= T::zero()) {
            return Err(Error::InvalidArgument("matrix is singular".into()));
        }
        let mut x = rhs.clone();
        for c in 0..rhs.cols {
            for i in 0..n {
                let mut s = x[(i, c)];
                for p in 0..i {
                    s -= l[(i, p)] * x[(p, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
            for i in (0..n).rev() {
                let mut s = x[(i, c)];
                for p in i + 1..n {
                    s -= l[(p, i)] * x[(p, c)];
                }
                x[(i, c)] = s / l[(i, i)];
            }
        }
        Ok(x)
    }
}

impl<T> Index<(usize, usize)> for Mat<T> {
    type Output = T;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &T {
        &self.data[i * self.cols + j]
    }
}

impl<T> IndexMut<(usize, usize)> for Mat<T> {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut T {
        &mut self.data[i * self.cols + j]
    }
}

/// `out = a · b`
pub fn matmul_into<T: Scalar>(a: &Mat<T>, b: &Mat<T>, out: &mut Mat<T>) {
    debug_assert_eq!(a.cols, b.rows);
    debug_assert_eq!(out.shape(), (a.rows, b.cols));
    out.fill(T::zero());
    for i in 0..a.rows {
        let orow = &mut out.data[i * b.cols..(i + 1) * b.cols];
        for p in 0..a.cols {
            let aip = a.data[i * a.cols + p];
            if aip == T::zero() {
                continue;
            }
            let brow = &b.data[p * b.cols..(p + 1) * b.cols];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += aip * bv;
            }
        }
    }
}

/// `out = m · v`
pub fn matvec_into<T: Scalar>(m: &Mat<T>, v: &[T], out: &mut [T]) {
    debug_assert_eq!(m.cols, v.len());
    for (i, o) in out.iter_mut().enumerate() {
        *o = m.row(i).iter().zip(v).map(|(&a, &b)| a * b).sum();
    }
}

/// `out = vᵀ · m`
pub fn vecmat_into<T: Scalar>(v: &[T], m: &Mat<T>, out: &mut [T]) {
    debug_assert_eq!(m.rows, v.len());
    out.iter_mut().for_each(|o| *o = T::zero());
    for (i, &vi) in v.iter().enumerate() {
        if vi == T::zero() {
            continue;
        }
        for (o, &mv) in out.iter_mut().zip(m.row(i)) {
            *o += vi * mv;
        }
    }
}

pub fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

pub fn norm<T: Scalar>(a: &[T]) -> T {
    dot(a, a).sqrt()
}
