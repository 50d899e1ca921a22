//! One-sided Jacobi SVD.

use super::{dot, DenseMatrix};

/// `A = U·diag(s)·Vᵀ` with singular values in non-increasing order.
#[derive(Debug, Clone)]
pub struct Svd {
    pub u: DenseMatrix,
    pub s: Vec<f64>,
    pub v: DenseMatrix,
}

/// Orthogonalizes the columns of `cols` (each of equal length) by plane
/// rotations and returns the accumulated `n×n` rotation as columns.
///
/// On return the columns are mutually orthogonal; their norms are the
/// singular values of the input.
pub fn jacobi_columns(cols: &mut [Vec<f64>]) -> Vec<Vec<f64>> {
    let n = cols.len();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            e
        })
        .collect();
    let mut norms: Vec<f64> = cols.iter().map(|c| dot(c, c)).collect();
    for _sweep in 0..60 {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let alpha = norms[p];
                let beta = norms[q];
                if alpha == 0.0 || beta == 0.0 {
                    continue;
                }
                let gamma = dot(&cols[p], &cols[q]);
                if gamma.abs() <= 1e-15 * (alpha * beta).sqrt() {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let t = zeta.signum() / (zeta.abs() + (1.0 + zeta * zeta).sqrt());
                let t = if zeta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                rotate_pair(cols, p, q, c, s);
                rotate_pair(&mut v, p, q, c, s);
                norms[p] = dot(&cols[p], &cols[p]);
                norms[q] = dot(&cols[q], &cols[q]);
            }
        }
        if !rotated {
            break;
        }
    }
    v
}

fn rotate_pair(cols: &mut [Vec<f64>], p: usize, q: usize, c: f64, s: f64) {
    let (a, b) = cols.split_at_mut(q);
    let x = &mut a[p];
    let y = &mut b[0];
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let u = *xi;
        let w = *yi;
        *xi = c * u - s * w;
        *yi = s * u + c * w;
    }
}

fn column_major(a: &DenseMatrix) -> Vec<Vec<f64>> {
    (0..a.cols()).map(|j| a.column(j)).collect()
}

/// Thin SVD of `a` (`r = min(rows, cols)` singular triplets).
pub fn svd(a: &DenseMatrix) -> Svd {
    if a.rows() < a.cols() {
        let t = svd(&a.transpose());
        return Svd { u: t.v, s: t.s, v: t.u };
    }
    let m = a.rows();
    let n = a.cols();
    let mut cols = column_major(a);
    let rot = jacobi_columns(&mut cols);
    let s: Vec<f64> = cols.iter().map(|c| dot(c, c).sqrt()).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&x, &y| s[y].total_cmp(&s[x]).then(x.cmp(&y)));
    let mut u = DenseMatrix::zeros(m, n);
    let mut v = DenseMatrix::zeros(n, n);
    let mut sorted = Vec::with_capacity(n);
    for (k, &j) in order.iter().enumerate() {
        sorted.push(s[j]);
        if s[j] > 0.0 {
            for i in 0..m {
                u[(i, k)] = cols[j][i] / s[j];
            }
        }
        for i in 0..n {
            v[(i, k)] = rot[j][i];
        }
    }
    Svd { u, s: sorted, v }
}

/// Number of singular values above `eps`: the smallest `k` with
/// `‖A − A_k‖₂ ≤ eps`.
pub fn svd_eps_rank(a: &DenseMatrix, eps: f64) -> usize {
    if a.rows() == 0 || a.cols() == 0 {
        return 0;
    }
    let mut cols = if a.rows() >= a.cols() {
        column_major(a)
    } else {
        column_major(&a.transpose())
    };
    jacobi_columns(&mut cols);
    cols.iter().filter(|c| dot(c, c).sqrt() > eps).count()
}
