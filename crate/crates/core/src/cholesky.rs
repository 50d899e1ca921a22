//! Left-looking Cholesky factorization on tile-low-rank storage.
//!
//! Block column `k` is produced in three steps: the diagonal tile receives
//! all updates from the left and is factored densely; every tile below it
//! is formed as the implicit operator `A(i,k) − Σ_j L(i,j) L(k,j)ᵀ`, which
//! is compressed once by randomized sampling; finally the triangular solve
//! with `L(k,k)` is applied to the `V` factor only.

use std::sync::atomic::{AtomicU32, Ordering};

use crate::error::{Error, Result};
use crate::linalg::{cholesky_lower, gemm, solve_lower_in_place, solve_lower_matrix, solve_lower_transpose_in_place, DenseMatrix, Trans};
use crate::par::Execution;
use crate::tlr::{ara, tile_rng, Compressed, Content, LowRank, Sampler, Tile, TlrMatrix, SAMPLE_BLOCK};

/// Lower Cholesky factor with instrumentation from the factorization.
#[derive(Debug, Clone)]
pub struct TlrFactor {
    /// Lower-triangular tiles (`content == Content::Factor`).
    pub l: TlrMatrix,
    /// Update-compressions written to each tile `(i, k)`, row-major `nb × nb`.
    pub compressions: Vec<u32>,
}

/// `A(i,k) − Σ_j L(i,j) L(k,j)ᵀ`, applied without forming it.
struct UpdateSampler<'a> {
    a: &'a Tile,
    terms: Vec<(&'a Tile, &'a Tile)>,
    rows: usize,
    cols: usize,
}

impl Sampler for UpdateSampler<'_> {
    fn rows(&self) -> usize {
        self.rows
    }

    fn cols(&self) -> usize {
        self.cols
    }

    fn apply(&self, x: &DenseMatrix) -> DenseMatrix {
        let mut y = self.a.mul(x);
        for (lij, lkj) in &self.terms {
            let t = lij.mul(&lkj.t_mul(x));
            axpy_matrix(-1.0, &t, &mut y);
        }
        y
    }

    fn apply_t(&self, y: &DenseMatrix) -> DenseMatrix {
        let mut x = self.a.t_mul(y);
        for (lij, lkj) in &self.terms {
            let t = lkj.mul(&lij.t_mul(y));
            axpy_matrix(-1.0, &t, &mut x);
        }
        x
    }
}

fn axpy_matrix(alpha: f64, x: &DenseMatrix, y: &mut DenseMatrix) {
    for (a, b) in y.as_mut_slice().iter_mut().zip(x.as_slice()) {
        *a += alpha * b;
    }
}

/// Subtracts `L Lᵀ` for one tile of block row `k`.
fn subtract_gram(tile: &Tile, acc: &mut DenseMatrix) {
    match tile {
        Tile::Dense(d) => gemm(-1.0, d, Trans::No, d, Trans::Yes, 1.0, acc),
        Tile::LowRank(l) if l.rank() == 0 => {}
        Tile::LowRank(l) => {
            let g = l.v.t_matmul(&l.v);
            let ug = l.u.matmul(&g);
            gemm(-1.0, &ug, Trans::No, &l.u, Trans::Yes, 1.0, acc);
        }
    }
}

/// Factors a symmetric TLR operator as `L Lᵀ` with tile accuracy `eps`.
///
/// Every sub-diagonal tile is compressed exactly once. The random streams
/// are fixed by `a.seed` and the tile coordinates, so the sequential and
/// parallel schedules return bitwise identical factors.
pub fn factorize(a: &TlrMatrix, eps: f64, exec: Execution) -> Result<TlrFactor> {
    if !a.symmetric || a.content != Content::Operator {
        return Err(Error::Unsupported("Cholesky needs a symmetric TLR operator".into()));
    }
    if !(eps > 0.0) {
        return Err(Error::Config(format!("tile accuracy must be positive, got {eps}")));
    }
    let nb = a.nb();
    let p = &a.partition;
    let counters: Vec<AtomicU32> = (0..nb * nb).map(|_| AtomicU32::new(0)).collect();
    let mut diag: Vec<DenseMatrix> = Vec::with_capacity(nb);
    let mut off: Vec<Option<Tile>> = vec![None; nb * nb];

    for k in 0..nb {
        let mut akk = a.diag_tile(k).clone();
        for j in 0..k {
            subtract_gram(off[k * nb + j].as_ref().expect("left tile computed"), &mut akk);
        }
        let lkk = cholesky_lower(&akk, k)?;

        let column = exec.map_range(k + 1..nb, |i| {
            let sampler = UpdateSampler {
                a: a.tile(i, k).expect("symmetric operator stores the lower triangle"),
                terms: (0..k)
                    .map(|j| {
                        (
                            off[i * nb + j].as_ref().expect("left tile computed"),
                            off[k * nb + j].as_ref().expect("left tile computed"),
                        )
                    })
                    .collect(),
                rows: p.size(i),
                cols: p.size(k),
            };
            let mut rng = tile_rng(a.seed, (nb * nb + i * nb + k) as u64);
            let updated = match ara(&sampler, eps, SAMPLE_BLOCK, &mut rng) {
                Compressed::LowRank(l) => Tile::LowRank(l),
                Compressed::Dense => Tile::Dense(sampler.apply(&DenseMatrix::identity(p.size(k)))),
            };
            counters[i * nb + k].fetch_add(1, Ordering::Relaxed);
            // L(i,k) = S L(k,k)⁻ᵀ
            match updated {
                Tile::LowRank(l) if l.rank() == 0 => Tile::LowRank(l),
                Tile::LowRank(l) => Tile::LowRank(LowRank { v: solve_lower_matrix(&lkk, &l.v), u: l.u }),
                Tile::Dense(d) => Tile::Dense(solve_lower_matrix(&lkk, &d.transpose()).transpose()),
            }
        });
        for (i, t) in (k + 1..nb).zip(column) {
            off[i * nb + k] = Some(t);
        }
        diag.push(lkk);
    }

    let l = TlrMatrix::from_parts(a.dim, p.clone(), eps, false, a.seed, Content::Factor, diag, off);
    Ok(TlrFactor {
        l,
        compressions: counters.into_iter().map(AtomicU32::into_inner).collect(),
    })
}

impl TlrFactor {
    /// Solves `L Lᵀ x = b` with `b`, `x` in the original point order.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.l.n();
        if b.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.len() });
        }
        let x = self.solve_permuted(&self.l.partition.permute(b));
        Ok(self.l.partition.unpermute(&x))
    }

    /// Forward then backward substitution in tile order.
    pub fn solve_permuted(&self, b: &[f64]) -> Vec<f64> {
        let nb = self.l.nb();
        let p = &self.l.partition;
        let mut x = b.to_vec();
        for k in 0..nb {
            let mut rhs = x[p.range(k)].to_vec();
            for j in 0..k {
                let mut t = vec![0.0; rhs.len()];
                self.tile(k, j).apply_add(&x[p.range(j)], &mut t);
                rhs.iter_mut().zip(&t).for_each(|(r, v)| *r -= v);
            }
            solve_lower_in_place(self.l.diag_tile(k), &mut rhs);
            x[p.range(k)].copy_from_slice(&rhs);
        }
        for k in (0..nb).rev() {
            let mut rhs = x[p.range(k)].to_vec();
            for i in k + 1..nb {
                let mut t = vec![0.0; rhs.len()];
                self.tile(i, k).apply_t_add(&x[p.range(i)], &mut t);
                rhs.iter_mut().zip(&t).for_each(|(r, v)| *r -= v);
            }
            solve_lower_transpose_in_place(self.l.diag_tile(k), &mut rhs);
            x[p.range(k)].copy_from_slice(&rhs);
        }
        x
    }

    fn tile(&self, i: usize, j: usize) -> &Tile {
        self.l.tile(i, j).expect("factor stores every sub-diagonal tile")
    }

    /// `L·Lᵀ` in tile order.
    pub fn reconstruct(&self) -> DenseMatrix {
        let l = self.l.to_dense();
        l.matmul_t(&l)
    }
}
