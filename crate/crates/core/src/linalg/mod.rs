//! Row-major dense matrices and the factorizations used as reference
//! solvers and inside tiles.

mod svd;

pub use svd::{jacobi_columns, svd, svd_eps_rank, Svd};

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols, "data length does not match shape");
        Self { rows, cols, data }
    }

    pub fn from_fn<F: FnMut(usize, usize) -> f64>(rows: usize, cols: usize, mut f: F) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        Self { rows, cols, data }
    }

    pub fn diagonal(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
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

    #[inline]
    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    /// Leading `cols` columns.
    pub fn truncate_cols(&self, cols: usize) -> Self {
        Self::from_fn(self.rows, cols, |i, j| self[(i, j)])
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, &v| m.max(v.abs()))
    }

    /// `self − other`.
    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self::from_vec(self.rows, self.cols, data)
    }

    /// `self · other`.
    pub fn matmul(&self, other: &Self) -> Self {
        let mut c = Self::zeros(self.rows, other.cols);
        gemm(1.0, self, Trans::No, other, Trans::No, 0.0, &mut c);
        c
    }

    /// `selfᵀ · other`.
    pub fn t_matmul(&self, other: &Self) -> Self {
        let mut c = Self::zeros(self.cols, other.cols);
        gemm(1.0, self, Trans::Yes, other, Trans::No, 0.0, &mut c);
        c
    }

    /// `self · otherᵀ`.
    pub fn matmul_t(&self, other: &Self) -> Self {
        let mut c = Self::zeros(self.rows, other.rows);
        gemm(1.0, self, Trans::No, other, Trans::Yes, 0.0, &mut c);
        c
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `y += selfᵀ x`.
    pub fn matvec_t_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.rows);
        assert_eq!(y.len(), self.cols);
        for (i, &xi) in x.iter().enumerate() {
            if xi != 0.0 {
                axpy(xi, self.row(i), y);
            }
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Trans {
    No,
    Yes,
}

/// `C ← α·op(A)·op(B) + β·C`.
pub fn gemm(alpha: f64, a: &DenseMatrix, ta: Trans, b: &DenseMatrix, tb: Trans, beta: f64, c: &mut DenseMatrix) {
    let (m, k, rsa, csa) = match ta {
        Trans::No => (a.rows, a.cols, a.cols as isize, 1),
        Trans::Yes => (a.cols, a.rows, 1, a.cols as isize),
    };
    let (kb, n, rsb, csb) = match tb {
        Trans::No => (b.rows, b.cols, b.cols as isize, 1),
        Trans::Yes => (b.cols, b.rows, 1, b.cols as isize),
    };
    assert_eq!(k, kb, "inner dimensions differ");
    assert_eq!((c.rows, c.cols), (m, n), "output shape mismatch");
    if m == 0 || n == 0 {
        return;
    }
    if k == 0 {
        c.data.iter_mut().for_each(|v| *v *= beta);
        return;
    }
    // SAFETY: the shapes and strides describe the three row-major buffers
    // exactly, and `c` does not alias `a` or `b`.
    unsafe {
        matrixmultiply::dgemm(
            m,
            k,
            n,
            alpha,
            a.data.as_ptr(),
            rsa,
            csa,
            b.data.as_ptr(),
            rsb,
            csb,
            beta,
            c.data.as_mut_ptr(),
            c.cols as isize,
            1,
        );
    }
}

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let n = a.len();
    let chunks = n / 8;
    let mut acc = [0.0f64; 8];
    for c in 0..chunks {
        let x = &a[c * 8..c * 8 + 8];
        let y = &b[c * 8..c * 8 + 8];
        for l in 0..8 {
            acc[l] += x[l] * y[l];
        }
    }
    let mut s = ((acc[0] + acc[1]) + (acc[2] + acc[3])) + ((acc[4] + acc[5]) + (acc[6] + acc[7]));
    for i in chunks * 8..n {
        s += a[i] * b[i];
    }
    s
}

#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, &xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    dot(x, x).sqrt()
}

pub fn norm_inf(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, &v| m.max(v.abs()))
}

/// Lower Cholesky factor `L` with `A = L·Lᵀ`, reading only the lower
/// triangle of `a`. `block` is reported in errors.
pub fn cholesky_lower(a: &DenseMatrix, block: usize) -> Result<DenseMatrix> {
    let n = a.rows;
    assert_eq!(n, a.cols, "Cholesky needs a square matrix");
    let mut l = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let s = {
                let li = &l.data[i * n..i * n + j];
                let lj = &l.data[j * n..j * n + j];
                a[(i, j)] - dot(li, lj)
            };
            if i == j {
                if !(s > 0.0) || !s.is_finite() {
                    return Err(Error::NotPositiveDefinite { block, row: i, pivot: s });
                }
                l.data[i * n + i] = s.sqrt();
            } else {
                l.data[i * n + j] = s / l.data[j * n + j];
            }
        }
    }
    Ok(l)
}

/// Solves `L·x = b` in place for lower-triangular `L`.
pub fn solve_lower_in_place(l: &DenseMatrix, b: &mut [f64]) {
    let n = l.rows;
    for i in 0..n {
        let s = b[i] - dot(&l.row(i)[..i], &b[..i]);
        b[i] = s / l[(i, i)];
    }
}

/// Solves `Lᵀ·x = b` in place for lower-triangular `L`.
pub fn solve_lower_transpose_in_place(l: &DenseMatrix, b: &mut [f64]) {
    let n = l.rows;
    for i in (0..n).rev() {
        b[i] /= l[(i, i)];
        let xi = b[i];
        let row = &l.row(i)[..i];
        for (bj, &lij) in b[..i].iter_mut().zip(row) {
            *bj -= lij * xi;
        }
    }
}

/// Solves `L·X = B` for every column of `B` (`L` lower triangular).
pub fn solve_lower_matrix(l: &DenseMatrix, b: &DenseMatrix) -> DenseMatrix {
    let n = l.rows;
    assert_eq!(b.rows, n);
    let k = b.cols;
    let mut x = b.clone();
    for i in 0..n {
        // x_i ← (b_i − Σ_{j<i} L_ij x_j) / L_ii, row-wise on X
        let (done, rest) = x.data.split_at_mut(i * k);
        let xi = &mut rest[..k];
        for j in 0..i {
            let lij = l.data[i * n + j];
            if lij != 0.0 {
                axpy(-lij, &done[j * k..(j + 1) * k], xi);
            }
        }
        let d = 1.0 / l.data[i * n + i];
        xi.iter_mut().for_each(|v| *v *= d);
    }
    x
}

/// Dense Cholesky factor of an SPD matrix.
pub fn dense_cholesky(a: &DenseMatrix) -> Result<DenseMatrix> {
    cholesky_lower(a, 0)
}

/// Solves `A x = b` given the lower Cholesky factor of `A`.
pub fn dense_solve(l: &DenseMatrix, b: &[f64]) -> Result<Vec<f64>> {
    if b.len() != l.rows {
        return Err(Error::DimensionMismatch { expected: l.rows, got: b.len() });
    }
    let mut x = b.to_vec();
    solve_lower_in_place(l, &mut x);
    solve_lower_transpose_in_place(l, &mut x);
    Ok(x)
}

/// LU factorization with partial pivoting, `P·A = L·U`.
#[derive(Debug, Clone)]
pub struct LuFactor {
    lu: DenseMatrix,
    perm: Vec<usize>,
}

pub fn dense_lu(a: &DenseMatrix) -> Result<LuFactor> {
    let n = a.rows;
    assert_eq!(n, a.cols, "LU needs a square matrix");
    let mut lu = a.clone();
    let mut perm: Vec<usize> = (0..n).collect();
    let scale = a.max_abs();
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |best, c| if c.1 > best.1 { c } else { best });
        if !(pv > f64::EPSILON * scale * n as f64) {
            return Err(Error::Singular { row: k });
        }
        if p != k {
            for j in 0..n {
                lu.data.swap(k * n + j, p * n + j);
            }
            perm.swap(k, p);
        }
        let pivot = lu[(k, k)];
        let (top, bottom) = lu.data.split_at_mut((k + 1) * n);
        let row_k = &top[k * n + k + 1..k * n + n];
        for i in 0..n - k - 1 {
            let row_i = &mut bottom[i * n..(i + 1) * n];
            let f = row_i[k] / pivot;
            row_i[k] = f;
            if f != 0.0 {
                axpy(-f, row_k, &mut row_i[k + 1..]);
            }
        }
    }
    Ok(LuFactor { lu, perm })
}

impl LuFactor {
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.lu.rows;
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let mut x: Vec<f64> = self.perm.iter().map(|&p| b[p]).collect();
        for i in 0..n {
            let s = dot(&self.lu.row(i)[..i], &x[..i]);
            x[i] -= s;
        }
        for i in (0..n).rev() {
            let s = dot(&self.lu.row(i)[i + 1..], &x[i + 1..]);
            x[i] = (x[i] - s) / self.lu[(i, i)];
        }
        Ok(x)
    }
}
