//! KD-style recursive bisection that orders grid points into uniform tiles.

use std::ops::Range;

use crate::error::{Error, Result};
use crate::fields::Point;

/// Axis-aligned bounding box.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub lo: Point,
    pub hi: Point,
}

impl BBox {
    pub fn of(points: impl IntoIterator<Item = Point>) -> Self {
        let mut lo = [f64::INFINITY; 2];
        let mut hi = [f64::NEG_INFINITY; 2];
        for p in points {
            for d in 0..2 {
                lo[d] = lo[d].min(p[d]);
                hi[d] = hi[d].max(p[d]);
            }
        }
        Self { lo, hi }
    }

    pub fn diam(&self) -> f64 {
        (self.hi[0] - self.lo[0]).hypot(self.hi[1] - self.lo[1])
    }

    pub fn dist(&self, o: &BBox) -> f64 {
        let gap = |d: usize| (o.lo[d] - self.hi[d]).max(self.lo[d] - o.hi[d]).max(0.0);
        gap(0).hypot(gap(1))
    }

    fn longest_axis(&self) -> usize {
        if self.hi[1] - self.lo[1] > self.hi[0] - self.lo[0] {
            1
        } else {
            0
        }
    }
}

/// Uniform tiling of a reordered point set.
#[derive(Debug, Clone, PartialEq)]
pub struct TilePartition {
    pub m: usize,
    pub nb: usize,
    /// `order[new] = old`.
    pub order: Vec<usize>,
    /// `position[old] = new`.
    pub position: Vec<usize>,
    pub boxes: Vec<BBox>,
}

impl TilePartition {
    pub fn n(&self) -> usize {
        self.order.len()
    }

    pub fn range(&self, t: usize) -> Range<usize> {
        let start = t * self.m;
        start..(start + self.m).min(self.n())
    }

    pub fn size(&self, t: usize) -> usize {
        self.range(t).len()
    }

    /// Tiles of `m` consecutive indices without reordering.
    pub fn contiguous(points: &[Point], m: usize) -> Result<Self> {
        if points.is_empty() || m == 0 {
            return Err(Error::Config("cannot tile an empty point set".into()));
        }
        let order: Vec<usize> = (0..points.len()).collect();
        Ok(Self::from_order(points, m, order))
    }

    fn from_order(points: &[Point], m: usize, order: Vec<usize>) -> Self {
        let n = order.len();
        let nb = n.div_ceil(m);
        let mut position = vec![0; n];
        for (new, &old) in order.iter().enumerate() {
            position[old] = new;
        }
        let boxes = (0..nb)
            .map(|t| BBox::of(order[t * m..((t + 1) * m).min(n)].iter().map(|&i| points[i])))
            .collect();
        Self { m, nb, order, position, boxes }
    }

    /// `v` in tile order.
    pub fn permute<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.order.iter().map(|&i| v[i]).collect()
    }

    /// Inverse of [`permute`](Self::permute).
    pub fn unpermute<T: Copy>(&self, v: &[T]) -> Vec<T> {
        self.position.iter().map(|&p| v[p]).collect()
    }
}

/// Power of two nearest to `q ≥ 1`, ties going up.
fn nearest_power_of_two(q: usize) -> usize {
    let lo = if q.is_power_of_two() { q } else { q.next_power_of_two() / 2 };
    let hi = lo * 2;
    if q == lo {
        lo
    } else if q - lo < hi - q {
        lo
    } else {
        hi
    }
}

/// Orders `points` by recursive bisection into tiles of `m` points.
///
/// Each cluster is sorted along the longest side of its bounding box and
/// split so that the left part holds `(P/2)·m` points, `P` being the power
/// of two nearest to the number of tiles the cluster needs.
pub fn order_points(points: &[Point], m: usize) -> Result<TilePartition> {
    if points.is_empty() {
        return Err(Error::Config("cannot order an empty point set".into()));
    }
    if m < 2 {
        return Err(Error::Config(format!("tile size must be at least 2, got {m}")));
    }
    let mut order: Vec<usize> = (0..points.len()).collect();
    split(points, &mut order, m);
    Ok(TilePartition::from_order(points, m, order))
}

fn split(points: &[Point], idx: &mut [usize], m: usize) {
    let count = idx.len();
    if count <= m {
        return;
    }
    let bbox = BBox::of(idx.iter().map(|&i| points[i]));
    let a = bbox.longest_axis();
    let b = 1 - a;
    idx.sort_by(|&i, &j| {
        points[i][a]
            .total_cmp(&points[j][a])
            .then(points[i][b].total_cmp(&points[j][b]))
            .then(i.cmp(&j))
    });
    let p = nearest_power_of_two(count.div_ceil(m));
    let left = (p / 2) * m;
    let (l, r) = idx.split_at_mut(left);
    split(points, l, m);
    split(points, r, m);
}

/// `max(diam t, diam s) / dist(t, s)`, or `None` when the boxes touch.
pub fn admissibility_eta(t: &BBox, s: &BBox) -> Option<f64> {
    let dist = t.dist(s);
    if dist <= 0.0 {
        None
    } else {
        Some(t.diam().max(s.diam()) / dist)
    }
}

/// `⌈√N⌉` rounded to the nearest multiple of 32 (at least 32).
pub fn default_tile_size(n: usize) -> usize {
    let r = (n as f64).sqrt().ceil() as usize;
    (((r + 16) / 32) * 32).max(32)
}
