//! Little-endian binary snapshots of [`TlrMatrix`] values.
//!
//! Layout: magic `TLR1`; `dim`, `N`, `m`, `nb` as u64; `eps` as f64; the
//! symmetric flag (u8); `seed` (u64); content kind (u8, 0 operator,
//! 1 factor); record count (u64); then one record per tile (diagonal
//! tiles first) holding `i`, `j` (u64), kind (u8, 0 dense, 1 low rank),
//! `rows`, `cols`, `k` (u64) and the row-major payload (dense block, or
//! `U` followed by `V`). The trailer stores the permutation (`N` u64) and
//! the tile boxes (`nb × 4` f64).

use std::io::{Read, Write};

use crate::clustering::{BBox, TilePartition};
use crate::error::{Error, Result};
use crate::linalg::DenseMatrix;

use super::{Content, LowRank, Tile, TlrMatrix};

const MAGIC: &[u8; 4] = b"TLR1";

fn io(e: std::io::Error) -> Error {
    Error::Snapshot(e.to_string())
}

fn put_u64(w: &mut impl Write, v: u64) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(io)
}

fn put_f64(w: &mut impl Write, v: f64) -> Result<()> {
    w.write_all(&v.to_le_bytes()).map_err(io)
}

fn put_u8(w: &mut impl Write, v: u8) -> Result<()> {
    w.write_all(&[v]).map_err(io)
}

fn put_matrix(w: &mut impl Write, m: &DenseMatrix) -> Result<()> {
    let mut buf = Vec::with_capacity(m.as_slice().len() * 8);
    for v in m.as_slice() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf).map_err(io)
}

fn put_record(w: &mut impl Write, i: usize, j: usize, tile: &Tile) -> Result<()> {
    put_u64(w, i as u64)?;
    put_u64(w, j as u64)?;
    match tile {
        Tile::Dense(d) => {
            put_u8(w, 0)?;
            put_u64(w, d.rows() as u64)?;
            put_u64(w, d.cols() as u64)?;
            put_u64(w, d.rows().min(d.cols()) as u64)?;
            put_matrix(w, d)
        }
        Tile::LowRank(l) => {
            put_u8(w, 1)?;
            put_u64(w, l.u.rows() as u64)?;
            put_u64(w, l.v.rows() as u64)?;
            put_u64(w, l.rank() as u64)?;
            put_matrix(w, &l.u)?;
            put_matrix(w, &l.v)
        }
    }
}

pub fn write_snapshot(a: &TlrMatrix, w: &mut impl Write) -> Result<()> {
    w.write_all(MAGIC).map_err(io)?;
    put_u64(w, a.dim as u64)?;
    put_u64(w, a.n() as u64)?;
    put_u64(w, a.partition.m as u64)?;
    put_u64(w, a.nb() as u64)?;
    put_f64(w, a.eps)?;
    put_u8(w, a.symmetric as u8)?;
    put_u64(w, a.seed)?;
    put_u8(w, match a.content {
        Content::Operator => 0,
        Content::Factor => 1,
    })?;
    let stored = a.stored_tiles();
    put_u64(w, (a.nb() + stored.len()) as u64)?;
    for k in 0..a.nb() {
        put_record(w, k, k, &Tile::Dense(a.diag_tile(k).clone()))?;
    }
    for (i, j) in stored {
        let t = a.tile(i, j).ok_or_else(|| Error::Snapshot(format!("tile ({i}, {j}) missing")))?;
        put_record(w, i, j, t)?;
    }
    for &o in &a.partition.order {
        put_u64(w, o as u64)?;
    }
    for b in &a.partition.boxes {
        for v in [b.lo[0], b.lo[1], b.hi[0], b.hi[1]] {
            put_f64(w, v)?;
        }
    }
    Ok(())
}

struct Reader<R> {
    r: R,
}

impl<R: Read> Reader<R> {
    fn bytes<const K: usize>(&mut self) -> Result<[u8; K]> {
        let mut b = [0u8; K];
        self.r.read_exact(&mut b).map_err(io)?;
        Ok(b)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.bytes()?))
    }

    fn usize(&mut self, limit: usize, what: &str) -> Result<usize> {
        let v = self.u64()?;
        if v > limit as u64 {
            return Err(Error::Snapshot(format!("{what} = {v} exceeds {limit}")));
        }
        Ok(v as usize)
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.bytes()?))
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.bytes::<1>()?[0])
    }

    fn matrix(&mut self, rows: usize, cols: usize) -> Result<DenseMatrix> {
        let mut buf = vec![0u8; rows * cols * 8];
        self.r.read_exact(&mut buf).map_err(io)?;
        let data = buf
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        Ok(DenseMatrix::from_vec(rows, cols, data))
    }
}

pub fn read_snapshot(r: impl Read) -> Result<TlrMatrix> {
    let mut rd = Reader { r };
    if &rd.bytes::<4>()? != MAGIC {
        return Err(Error::Snapshot("bad magic".into()));
    }
    const LIMIT: usize = 1 << 32;
    let dim = rd.usize(2, "dimension")?;
    let n = rd.usize(LIMIT, "N")?;
    let m = rd.usize(LIMIT, "tile size")?;
    let nb = rd.usize(LIMIT, "tile count")?;
    if m == 0 || nb != n.div_ceil(m) {
        return Err(Error::Snapshot(format!("inconsistent N = {n}, m = {m}, nb = {nb}")));
    }
    let eps = rd.f64()?;
    let symmetric = match rd.u8()? {
        0 => false,
        1 => true,
        v => return Err(Error::Snapshot(format!("bad symmetric flag {v}"))),
    };
    let seed = rd.u64()?;
    let content = match rd.u8()? {
        0 => Content::Operator,
        1 => Content::Factor,
        v => return Err(Error::Snapshot(format!("bad content kind {v}"))),
    };
    let size = |t: usize| m.min(n - t * m);
    let records = rd.usize(nb * nb, "record count")?;
    let mut diag: Vec<Option<DenseMatrix>> = vec![None; nb];
    let mut off: Vec<Option<Tile>> = vec![None; nb * nb];
    for _ in 0..records {
        let i = rd.usize(nb - 1, "tile row")?;
        let j = rd.usize(nb - 1, "tile column")?;
        let kind = rd.u8()?;
        let rows = rd.usize(m, "rows")?;
        let cols = rd.usize(m, "cols")?;
        let k = rd.usize(m, "rank")?;
        if rows != size(i) || cols != size(j) {
            return Err(Error::Snapshot(format!("tile ({i}, {j}) has shape {rows}×{cols}")));
        }
        let tile = match kind {
            0 => Tile::Dense(rd.matrix(rows, cols)?),
            1 => {
                let u = rd.matrix(rows, k)?;
                let v = rd.matrix(cols, k)?;
                Tile::LowRank(LowRank { u, v })
            }
            v => return Err(Error::Snapshot(format!("bad tile kind {v}"))),
        };
        if i == j {
            match tile {
                Tile::Dense(d) => diag[i] = Some(d),
                Tile::LowRank(_) => return Err(Error::Snapshot("low-rank diagonal tile".into())),
            }
        } else {
            off[i * nb + j] = Some(tile);
        }
    }
    let mut order = Vec::with_capacity(n);
    for _ in 0..n {
        order.push(rd.usize(n - 1, "permutation entry")?);
    }
    let mut position = vec![usize::MAX; n];
    for (new, &old) in order.iter().enumerate() {
        if position[old] != usize::MAX {
            return Err(Error::Snapshot("permutation repeats an index".into()));
        }
        position[old] = new;
    }
    let mut boxes = Vec::with_capacity(nb);
    for _ in 0..nb {
        let v = [rd.f64()?, rd.f64()?, rd.f64()?, rd.f64()?];
        boxes.push(BBox { lo: [v[0], v[1]], hi: [v[2], v[3]] });
    }
    let diag = diag
        .into_iter()
        .enumerate()
        .map(|(k, d)| d.ok_or_else(|| Error::Snapshot(format!("diagonal tile {k} missing"))))
        .collect::<Result<Vec<_>>>()?;
    let partition = TilePartition { m, nb, order, position, boxes };
    let a = TlrMatrix::from_parts(dim, partition, eps, symmetric, seed, content, diag, off);
    for (i, j) in a.stored_tiles() {
        if a.tile(i, j).is_none() {
            return Err(Error::Snapshot(format!("tile ({i}, {j}) missing")));
        }
    }
    Ok(a)
}

impl TlrMatrix {
    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(io)?;
        let mut w = std::io::BufWriter::new(f);
        write_snapshot(self, &mut w)?;
        w.flush().map_err(io)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(io)?;
        read_snapshot(std::io::BufReader::new(f))
    }
}
