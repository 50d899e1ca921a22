//! Tile-low-rank storage: dense diagonal tiles, factored off-diagonal tiles.

mod ara;
mod snapshot;

use std::collections::BTreeMap;

pub use ara::{ara, break_even_rank, tile_rng, Compressed, Sampler, SAMPLE_BLOCK};
pub use snapshot::{read_snapshot, write_snapshot};

use crate::assembly::DiscreteOperator;
use crate::clustering::TilePartition;
use crate::error::{Error, Result};
use crate::linalg::{dot, DenseMatrix};
use crate::par::Execution;

/// `U·Vᵀ` with `U: rows × k`, `V: cols × k`.
#[derive(Debug, Clone, PartialEq)]
pub struct LowRank {
    pub u: DenseMatrix,
    pub v: DenseMatrix,
}

impl LowRank {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self { u: DenseMatrix::zeros(rows, 0), v: DenseMatrix::zeros(cols, 0) }
    }

    pub fn rank(&self) -> usize {
        self.u.cols()
    }

    pub fn to_dense(&self) -> DenseMatrix {
        if self.rank() == 0 {
            return DenseMatrix::zeros(self.u.rows(), self.v.rows());
        }
        self.u.matmul_t(&self.v)
    }

    /// `y += U (Vᵀ x)`.
    pub fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        let k = self.rank();
        if k == 0 {
            return;
        }
        let mut t = vec![0.0; k];
        self.v.matvec_t_add(x, &mut t);
        for (yi, ui) in y.iter_mut().zip(self.u.as_slice().chunks_exact(k)) {
            *yi += dot(ui, &t);
        }
    }

    /// `y += V (Uᵀ x)`.
    pub fn apply_t_add(&self, x: &[f64], y: &mut [f64]) {
        let k = self.rank();
        if k == 0 {
            return;
        }
        let mut t = vec![0.0; k];
        self.u.matvec_t_add(x, &mut t);
        for (yi, vi) in y.iter_mut().zip(self.v.as_slice().chunks_exact(k)) {
            *yi += dot(vi, &t);
        }
    }
}

/// An off-diagonal tile.
#[derive(Debug, Clone, PartialEq)]
pub enum Tile {
    Dense(DenseMatrix),
    LowRank(LowRank),
}

impl Tile {
    /// Stored rank; a dense tile counts as full rank.
    pub fn rank(&self) -> usize {
        match self {
            Tile::Dense(d) => d.rows().min(d.cols()),
            Tile::LowRank(l) => l.rank(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Tile::Dense(_))
    }

    /// Stored 64-bit words.
    pub fn words(&self) -> usize {
        match self {
            Tile::Dense(d) => d.rows() * d.cols(),
            Tile::LowRank(l) => (l.u.rows() + l.v.rows()) * l.rank(),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Tile::Dense(d) => d.clone(),
            Tile::LowRank(l) => l.to_dense(),
        }
    }

    pub fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Tile::Dense(d) => dense_apply_add(d, x, y),
            Tile::LowRank(l) => l.apply_add(x, y),
        }
    }

    pub fn apply_t_add(&self, x: &[f64], y: &mut [f64]) {
        match self {
            Tile::Dense(d) => d.matvec_t_add(x, y),
            Tile::LowRank(l) => l.apply_t_add(x, y),
        }
    }

    /// `T·X` for a block of vectors.
    pub fn mul(&self, x: &DenseMatrix) -> DenseMatrix {
        match self {
            Tile::Dense(d) => d.matmul(x),
            Tile::LowRank(l) if l.rank() == 0 => DenseMatrix::zeros(l.u.rows(), x.cols()),
            Tile::LowRank(l) => l.u.matmul(&l.v.t_matmul(x)),
        }
    }

    /// `Tᵀ·X` for a block of vectors.
    pub fn t_mul(&self, x: &DenseMatrix) -> DenseMatrix {
        match self {
            Tile::Dense(d) => d.t_matmul(x),
            Tile::LowRank(l) if l.rank() == 0 => DenseMatrix::zeros(l.v.rows(), x.cols()),
            Tile::LowRank(l) => l.v.matmul(&l.u.t_matmul(x)),
        }
    }
}

fn dense_apply_add(d: &DenseMatrix, x: &[f64], y: &mut [f64]) {
    if d.cols() == 0 {
        return;
    }
    for (yi, row) in y.iter_mut().zip(d.as_slice().chunks_exact(d.cols())) {
        *yi += dot(row, x);
    }
}

/// Compresses a dense block to accuracy `eps`, keeping it dense when the
/// factorization would not save storage.
pub fn compress(block: DenseMatrix, eps: f64, seed: u64, stream: u64) -> Tile {
    let mut rng = tile_rng(seed, stream);
    match ara(&block, eps, SAMPLE_BLOCK, &mut rng) {
        Compressed::LowRank(l) => Tile::LowRank(l),
        Compressed::Dense => Tile::Dense(block),
    }
}

/// What a [`TlrMatrix`] holds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Content {
    /// A (possibly symmetric) operator.
    Operator,
    /// A lower-triangular Cholesky factor.
    Factor,
}

/// Tile-low-rank matrix in the tile order of its partition.
///
/// Symmetric operators and factors keep only the tiles below the diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct TlrMatrix {
    pub dim: usize,
    pub partition: TilePartition,
    pub eps: f64,
    pub symmetric: bool,
    pub seed: u64,
    pub content: Content,
    diag: Vec<DenseMatrix>,
    off: Vec<Option<Tile>>,
}

impl TlrMatrix {
    pub(crate) fn from_parts(
        dim: usize,
        partition: TilePartition,
        eps: f64,
        symmetric: bool,
        seed: u64,
        content: Content,
        diag: Vec<DenseMatrix>,
        off: Vec<Option<Tile>>,
    ) -> Self {
        let nb = partition.nb;
        assert_eq!(diag.len(), nb);
        assert_eq!(off.len(), nb * nb);
        Self { dim, partition, eps, symmetric, seed, content, diag, off }
    }

    pub fn n(&self) -> usize {
        self.partition.n()
    }

    pub fn nb(&self) -> usize {
        self.partition.nb
    }

    /// Whether tile `(i, j)`, `i ≠ j`, is stored.
    pub fn stores(&self, i: usize, j: usize) -> bool {
        i != j && (i > j || !self.lower_only())
    }

    fn lower_only(&self) -> bool {
        self.symmetric || self.content == Content::Factor
    }

    pub fn diag_tile(&self, k: usize) -> &DenseMatrix {
        &self.diag[k]
    }

    /// Stored off-diagonal tile `(i, j)`.
    pub fn tile(&self, i: usize, j: usize) -> Option<&Tile> {
        self.off[i * self.nb() + j].as_ref()
    }

    /// Stored tile coordinates in row-major order.
    pub fn stored_tiles(&self) -> Vec<(usize, usize)> {
        let nb = self.nb();
        (0..nb)
            .flat_map(|i| (0..nb).map(move |j| (i, j)))
            .filter(|&(i, j)| self.stores(i, j))
            .collect()
    }

    /// `y = A x` with `x`, `y` in tile order.
    pub fn matvec_permuted(&self, x: &[f64], exec: Execution) -> Result<Vec<f64>> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let nb = self.nb();
        let p = &self.partition;
        let blocks = exec.map_range(0..nb, |i| {
            let mut y = vec![0.0; p.size(i)];
            for j in 0..nb {
                let xj = &x[p.range(j)];
                if j == i {
                    dense_apply_add(&self.diag[i], xj, &mut y);
                } else if let Some(t) = self.tile(i, j) {
                    t.apply_add(xj, &mut y);
                } else if self.symmetric {
                    if let Some(t) = self.tile(j, i) {
                        t.apply_t_add(xj, &mut y);
                    }
                }
            }
            y
        });
        Ok(blocks.concat())
    }

    /// `y = A x` with `x`, `y` in the original point order.
    pub fn matvec(&self, x: &[f64], exec: Execution) -> Result<Vec<f64>> {
        if x.len() != self.n() {
            return Err(Error::DimensionMismatch { expected: self.n(), got: x.len() });
        }
        let y = self.matvec_permuted(&self.partition.permute(x), exec)?;
        Ok(self.partition.unpermute(&y))
    }

    /// Every entry in tile order; symmetric storage is mirrored, factors
    /// stay lower triangular.
    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.n();
        let p = &self.partition;
        let mut a = DenseMatrix::zeros(n, n);
        let mut put = |i: usize, j: usize, t: &DenseMatrix, transpose: bool| {
            let (ri, rj) = (p.range(i), p.range(j));
            for (a_row, r) in ri.clone().enumerate() {
                for (b_col, c) in rj.clone().enumerate() {
                    a[(r, c)] = if transpose { t[(b_col, a_row)] } else { t[(a_row, b_col)] };
                }
            }
        };
        for k in 0..self.nb() {
            put(k, k, &self.diag[k], false);
        }
        for (i, j) in self.stored_tiles() {
            let t = self.tile(i, j).map(Tile::to_dense).unwrap_or_else(|| DenseMatrix::zeros(p.size(i), p.size(j)));
            put(i, j, &t, false);
            if self.symmetric {
                put(j, i, &t, true);
            }
        }
        a
    }

    pub fn memory_stats(&self) -> MemoryStats {
        let word = std::mem::size_of::<f64>() as u64;
        let dense_diagonal: u64 = self.diag.iter().map(|d| (d.rows() * d.cols()) as u64).sum::<u64>() * word;
        let mut low_rank = 0u64;
        let mut dense_off = 0u64;
        let mut histogram = BTreeMap::new();
        let mut rank_sum = 0usize;
        let mut max_rank = 0usize;
        let mut fallbacks = 0usize;
        let tiles = self.stored_tiles();
        for &(i, j) in &tiles {
            let t = self.tile(i, j).expect("stored tile present");
            let r = t.rank();
            *histogram.entry(r).or_insert(0) += 1;
            rank_sum += r;
            max_rank = max_rank.max(r);
            if t.is_dense() {
                fallbacks += 1;
                dense_off += t.words() as u64 * word;
            } else {
                low_rank += t.words() as u64 * word;
            }
        }
        let n = self.n() as u64;
        MemoryStats {
            n: self.n(),
            m: self.partition.m,
            nb: self.nb(),
            total_bytes: dense_diagonal + low_rank + dense_off,
            dense_diagonal_bytes: dense_diagonal,
            low_rank_bytes: low_rank,
            dense_offdiag_bytes: dense_off,
            dense_equivalent_bytes: n * n * word,
            offdiag_tiles: tiles.len(),
            dense_fallbacks: fallbacks,
            rank_histogram: histogram,
            average_rank: if tiles.is_empty() { 0.0 } else { rank_sum as f64 / tiles.len() as f64 },
            max_rank,
        }
    }
}

/// Storage and rank summary of a [`TlrMatrix`].
#[derive(Debug, Clone, PartialEq)]
pub struct MemoryStats {
    pub n: usize,
    pub m: usize,
    pub nb: usize,
    pub total_bytes: u64,
    pub dense_diagonal_bytes: u64,
    pub low_rank_bytes: u64,
    pub dense_offdiag_bytes: u64,
    /// Bytes of the full dense `N × N` matrix.
    pub dense_equivalent_bytes: u64,
    /// Stored off-diagonal tiles.
    pub offdiag_tiles: usize,
    pub dense_fallbacks: usize,
    /// Stored rank → number of off-diagonal tiles.
    pub rank_histogram: BTreeMap<usize, usize>,
    pub average_rank: f64,
    pub max_rank: usize,
}

impl TlrMatrix {
    /// Compresses a dense matrix given in tile order. With `symmetric`
    /// only the lower triangle of `a` is read.
    pub fn from_dense(
        a: &DenseMatrix,
        partition: &TilePartition,
        eps: f64,
        seed: u64,
        symmetric: bool,
        exec: Execution,
    ) -> Result<Self> {
        let n = partition.n();
        if a.rows() != n || a.cols() != n {
            return Err(Error::DimensionMismatch { expected: n, got: a.rows() });
        }
        let nb = partition.nb;
        let block = |i: usize, j: usize| {
            let (ri, rj) = (partition.range(i), partition.range(j));
            DenseMatrix::from_fn(ri.len(), rj.len(), |r, c| a[(ri.start + r, rj.start + c)])
        };
        let diag = exec.map_range(0..nb, |k| {
            let d = block(k, k);
            if symmetric {
                DenseMatrix::from_fn(d.rows(), d.cols(), |r, c| if r >= c { d[(r, c)] } else { d[(c, r)] })
            } else {
                d
            }
        });
        let coords: Vec<(usize, usize)> = (0..nb)
            .flat_map(|i| (0..nb).map(move |j| (i, j)))
            .filter(|&(i, j)| i != j && (i > j || !symmetric))
            .collect();
        let tiles = exec.map_range(0..coords.len(), |t| {
            let (i, j) = coords[t];
            compress(block(i, j), eps, seed, (i * nb + j) as u64)
        });
        let mut off: Vec<Option<Tile>> = vec![None; nb * nb];
        for ((i, j), t) in coords.into_iter().zip(tiles) {
            off[i * nb + j] = Some(t);
        }
        Ok(Self::from_parts(0, partition.clone(), eps, symmetric, seed, Content::Operator, diag, off))
    }
}

/// Builds the TLR form of `op` over `partition`: every tile is evaluated
/// densely (with `D` and the sparse correction folded in) and off-diagonal
/// tiles are compressed to Frobenius accuracy `eps`.
pub fn assemble_tlr(
    op: &DiscreteOperator,
    partition: &TilePartition,
    eps: f64,
    seed: u64,
    exec: Execution,
) -> Result<TlrMatrix> {
    if partition.n() != op.n() {
        return Err(Error::DimensionMismatch { expected: op.n(), got: partition.n() });
    }
    if !(eps > 0.0) {
        return Err(Error::Config(format!("tile accuracy must be positive, got {eps}")));
    }
    let nb = partition.nb;
    let symmetric = op.is_symmetric();
    let rows = |t: usize| partition.order[partition.range(t)].to_vec();
    let block = |i: usize, j: usize| {
        let (r, c) = (rows(i), rows(j));
        let mut out = vec![0.0; r.len() * c.len()];
        op.fill_block(&r, &c, &mut out);
        DenseMatrix::from_vec(r.len(), c.len(), out)
    };
    let diag = exec.map_range(0..nb, |k| block(k, k));
    let coords: Vec<(usize, usize)> = (0..nb)
        .flat_map(|i| (0..nb).map(move |j| (i, j)))
        .filter(|&(i, j)| i != j && (i > j || !symmetric))
        .collect();
    let tiles = exec.map_range(0..coords.len(), |t| {
        let (i, j) = coords[t];
        compress(block(i, j), eps, seed, (i * nb + j) as u64)
    });
    let mut off: Vec<Option<Tile>> = vec![None; nb * nb];
    for ((i, j), t) in coords.into_iter().zip(tiles) {
        off[i * nb + j] = Some(t);
    }
    Ok(TlrMatrix::from_parts(
        op.grid.dim,
        partition.clone(),
        eps,
        symmetric,
        seed,
        Content::Operator,
        diag,
        off,
    ))
}
