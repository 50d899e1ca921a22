//! Adaptive randomized approximation of a block accessed only through
//! products with blocks of vectors.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::linalg::{axpy, dot, jacobi_columns, norm2, DenseMatrix};

use super::LowRank;

/// A linear operator of shape `rows × cols` that can be multiplied by
/// blocks of vectors from either side.
pub trait Sampler {
    fn rows(&self) -> usize;
    fn cols(&self) -> usize;
    /// `A·X` for `X` of shape `cols × k`.
    fn apply(&self, x: &DenseMatrix) -> DenseMatrix;
    /// `Aᵀ·Y` for `Y` of shape `rows × k`.
    fn apply_t(&self, y: &DenseMatrix) -> DenseMatrix;
}

impl Sampler for DenseMatrix {
    fn rows(&self) -> usize {
        DenseMatrix::rows(self)
    }
    fn cols(&self) -> usize {
        DenseMatrix::cols(self)
    }
    fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        self.matmul(x)
    }
    fn apply_t(&self, y: &DenseMatrix) -> DenseMatrix {
        self.t_matmul(y)
    }
}

/// Default number of random vectors drawn per sampling round.
pub const SAMPLE_BLOCK: usize = 16;

/// Outcome of a compression attempt.
#[derive(Debug, Clone)]
pub enum Compressed {
    LowRank(LowRank),
    /// The detected rank passed the storage break-even point; the caller
    /// should keep the block dense.
    Dense,
}

/// Deterministic generator for tile `stream` under `seed`.
pub fn tile_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Rank above which `U`, `V` cost more words than the dense block.
pub fn break_even_rank(rows: usize, cols: usize) -> usize {
    if rows + cols == 0 {
        0
    } else {
        rows * cols / (rows + cols)
    }
}

fn gaussian(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| StandardNormal.sample(rng)).collect();
    DenseMatrix::from_vec(rows, cols, data)
}

fn project_out(basis: &[Vec<f64>], v: &mut [f64]) {
    for q in basis {
        let c = dot(q, v);
        axpy(-c, q, v);
    }
}

/// Compresses `a` to a factorization `U·Vᵀ` with `‖A − UVᵀ‖_F ≲ eps`.
///
/// The range is sampled `block` vectors at a time. After each round the new
/// samples are projected against the basis found so far; once the RMS norm
/// of the projected samples, an estimate of the residual Frobenius norm,
/// drops to `eps/10` sampling stops. `V = AᵀQ` is then recompressed with a
/// one-sided Jacobi sweep and its trailing singular directions are dropped
/// while their combined norm stays below `0.9·eps`.
pub fn ara<S: Sampler + ?Sized>(a: &S, eps: f64, block: usize, rng: &mut ChaCha8Rng) -> Compressed {
    let (m, n) = (a.rows(), a.cols());
    let full = m.min(n);
    let cap = break_even_rank(m, n);
    let block = block.max(1);
    let mut basis: Vec<Vec<f64>> = Vec::new();
    let stop = eps / 10.0;
    while basis.len() < full {
        let y = a.apply(&gaussian(n, block, rng));
        let mut cols: Vec<Vec<f64>> = (0..block).map(|c| y.column(c)).collect();
        for c in cols.iter_mut() {
            project_out(&basis, c);
            project_out(&basis, c);
        }
        let mean_sq = cols.iter().map(|c| dot(c, c)).sum::<f64>() / block as f64;
        if mean_sq.sqrt() <= stop {
            break;
        }
        let before = basis.len();
        for mut c in cols {
            if basis.len() >= full {
                break;
            }
            project_out(&basis, &mut c);
            project_out(&basis, &mut c);
            let nrm = norm2(&c);
            if nrm > 1e-3 * stop {
                c.iter_mut().for_each(|v| *v /= nrm);
                basis.push(c);
            }
        }
        if basis.len() > cap {
            return Compressed::Dense;
        }
        if basis.len() == before {
            break;
        }
    }
    if basis.is_empty() {
        return Compressed::LowRank(LowRank::zero(m, n));
    }
    let k = basis.len();
    let q = DenseMatrix::from_fn(m, k, |i, j| basis[j][i]);
    let v = a.apply_t(&q);
    let mut vcols: Vec<Vec<f64>> = (0..k).map(|j| v.column(j)).collect();
    let rot = jacobi_columns(&mut vcols);

    let mut order: Vec<usize> = (0..k).collect();
    let norms: Vec<f64> = vcols.iter().map(|c| norm2(c)).collect();
    order.sort_by(|&x, &y| norms[y].total_cmp(&norms[x]).then(x.cmp(&y)));
    let budget = (0.9 * eps).powi(2);
    let mut tail = 0.0;
    let mut keep = k;
    while keep > 0 {
        let s = norms[order[keep - 1]];
        if tail + s * s > budget {
            break;
        }
        tail += s * s;
        keep -= 1;
    }
    if keep > cap {
        return Compressed::Dense;
    }
    let kept = &order[..keep];
    let u = DenseMatrix::from_fn(m, keep, |i, c| {
        let r = &rot[kept[c]];
        (0..k).map(|j| basis[j][i] * r[j]).sum()
    });
    let v = DenseMatrix::from_fn(n, keep, |i, c| vcols[kept[c]][i]);
    Compressed::LowRank(LowRank { u, v })
}
