//! Regular lattices over the interior box and its exterior shell.
//!
//! Lattice nodes sit at `x = lo + k·h` for integer `k`. Interior unknowns are
//! the nodes strictly inside Ω; the nodes on ∂Ω and in Ω₀ carry the zero
//! volume constraint.

use crate::error::{Error, Result};
use crate::fields::{Point, ProblemSpec};

#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    pub dim: usize,
    pub h: f64,
    /// Cells across the interior box along each axis.
    pub cells: [usize; 2],
    /// Lower corner of the interior box.
    pub origin: Point,
    /// Smallest and largest lattice index inside the exterior box, per axis.
    pub kmin: [i64; 2],
    pub kmax: [i64; 2],
    /// Lattice coordinates of the interior unknowns, first axis fastest.
    pub interior: Vec<[i64; 2]>,
}

impl Grid {
    /// Lattice with `cells` cells across the interior box along its first
    /// axis; the other axis uses the same spacing.
    pub fn new(spec: &ProblemSpec, cells: usize) -> Result<Self> {
        spec.validate()?;
        if cells < 2 {
            return Err(Error::Config(format!("need at least 2 cells per axis, got {cells}")));
        }
        let dim = spec.dim;
        let h = (spec.interior.hi[0] - spec.interior.lo[0]) / cells as f64;
        let mut c = [cells, 1];
        let mut kmin = [0i64; 2];
        let mut kmax = [0i64; 2];
        for d in 0..dim {
            let len = (spec.interior.hi[d] - spec.interior.lo[d]) / h;
            let n = len.round();
            if (len - n).abs() > 1e-9 * len.max(1.0) || n < 2.0 {
                return Err(Error::Config(format!(
                    "interior box side {d} is not a whole number of cells of width {h}"
                )));
            }
            c[d] = n as usize;
            let below = ((spec.interior.lo[d] - spec.exterior.lo[d]) / h + 1e-9).floor() as i64;
            let above = ((spec.exterior.hi[d] - spec.interior.hi[d]) / h + 1e-9).floor() as i64;
            kmin[d] = -below;
            kmax[d] = c[d] as i64 + above;
        }
        let mut interior = Vec::new();
        let ky_range = if dim == 2 { 1..c[1] as i64 } else { 0..1 };
        for ky in ky_range {
            for kx in 1..c[0] as i64 {
                interior.push([kx, ky]);
            }
        }
        Ok(Self {
            dim,
            h,
            cells: c,
            origin: spec.interior.lo,
            kmin,
            kmax,
            interior,
        })
    }

    /// Lattice with `points` interior unknowns along each axis.
    pub fn with_points_per_axis(spec: &ProblemSpec, points: usize) -> Result<Self> {
        Self::new(spec, points + 1)
    }

    /// Number of interior unknowns.
    pub fn len(&self) -> usize {
        self.interior.len()
    }

    pub fn is_empty(&self) -> bool {
        self.interior.is_empty()
    }

    #[inline]
    pub fn coord(&self, k: [i64; 2]) -> Point {
        let y = if self.dim == 2 {
            self.origin[1] + k[1] as f64 * self.h
        } else {
            0.0
        };
        [self.origin[0] + k[0] as f64 * self.h, y]
    }

    pub fn point(&self, i: usize) -> Point {
        self.coord(self.interior[i])
    }

    pub fn points(&self) -> Vec<Point> {
        self.interior.iter().map(|&k| self.coord(k)).collect()
    }

    /// Whether lattice node `k` is an interior unknown.
    #[inline]
    pub fn is_interior(&self, k: [i64; 2]) -> bool {
        (0..self.dim).all(|d| k[d] >= 1 && k[d] < self.cells[d] as i64)
    }

    /// Linear index of an interior lattice node.
    #[inline]
    pub fn interior_index(&self, k: [i64; 2]) -> Option<usize> {
        if !self.is_interior(k) {
            return None;
        }
        let nx = self.cells[0] - 1;
        Some(if self.dim == 2 {
            (k[1] as usize - 1) * nx + (k[0] as usize - 1)
        } else {
            k[0] as usize - 1
        })
    }

    /// Whether lattice node `k` lies in the exterior box.
    #[inline]
    pub fn in_lattice(&self, k: [i64; 2]) -> bool {
        (0..self.dim).all(|d| k[d] >= self.kmin[d] && k[d] <= self.kmax[d])
    }

    /// Every lattice node of the exterior box, first axis fastest.
    pub fn lattice(&self) -> Vec<[i64; 2]> {
        let ky = if self.dim == 2 { self.kmin[1]..=self.kmax[1] } else { 0..=0 };
        let mut out = Vec::new();
        for y in ky {
            for x in self.kmin[0]..=self.kmax[0] {
                out.push([x, y]);
            }
        }
        out
    }

    /// Lattice nodes of the exterior box that are not interior unknowns.
    pub fn exterior(&self) -> Vec<[i64; 2]> {
        self.lattice().into_iter().filter(|&k| !self.is_interior(k)).collect()
    }

    /// Nodes per axis of the full lattice.
    pub fn lattice_shape(&self) -> [usize; 2] {
        let mut s = [1, 1];
        for d in 0..self.dim {
            s[d] = (self.kmax[d] - self.kmin[d] + 1) as usize;
        }
        s
    }

    /// Integer offsets `o ≠ 0` with `|o|·h < delta`, together with their
    /// lengths `|o|·h`.
    pub fn window_offsets(&self, delta: f64) -> Vec<([i64; 2], f64)> {
        let reach = (delta / self.h).ceil() as i64;
        let ry = if self.dim == 2 { reach } else { 0 };
        let mut out = Vec::new();
        for oy in -ry..=ry {
            for ox in -reach..=reach {
                if ox == 0 && oy == 0 {
                    continue;
                }
                let r = self.h * ((ox * ox + oy * oy) as f64).sqrt();
                if r < delta {
                    out.push(([ox, oy], r));
                }
            }
        }
        out
    }

    /// Index pairs `(coarse, fine)` of interior nodes at the same location
    /// when `fine` refines `self` by a whole factor (1 compares a grid with
    /// itself).
    pub fn coincident_with(&self, fine: &Grid) -> Result<Vec<(usize, usize)>> {
        let r = fine.cells[0] / self.cells[0].max(1);
        let nested = r >= 1
            && fine.dim == self.dim
            && (0..self.dim).all(|d| fine.cells[d] == r * self.cells[d])
            && (0..self.dim).all(|d| (fine.origin[d] - self.origin[d]).abs() < 1e-12);
        if !nested {
            return Err(Error::Config(format!(
                "grids with {:?} and {:?} cells are not nested",
                &self.cells[..self.dim],
                &fine.cells[..fine.dim]
            )));
        }
        let r = r as i64;
        Ok(self
            .interior
            .iter()
            .enumerate()
            .map(|(i, &k)| {
                let kf = [r * k[0], if self.dim == 2 { r * k[1] } else { 0 }];
                (i, fine.interior_index(kf).expect("nested node is interior"))
            })
            .collect())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_layout() {
        let spec = ProblemSpec::kappa_1d();
        let g = Grid::new(&spec, 8).unwrap();
        assert_eq!(g.len(), 7);
        assert_eq!(g.h, 0.25);
        assert_eq!(g.kmin[0], -4);
        assert_eq!(g.kmax[0], 12);
        assert_eq!(g.point(0), [-0.75, 0.0]);
        assert_eq!(g.coord([g.kmin[0], 0])[0], -2.0);
        assert_eq!(g.coord([g.kmax[0], 0])[0], 2.0);
        assert_eq!(g.exterior().len() + g.len(), g.lattice().len());
        assert_eq!(g.interior_index([0, 0]), None);
        assert_eq!(g.interior_index([7, 0]), Some(6));
    }

    #[test]
    fn two_dimensional_layout() {
        let spec = ProblemSpec::beta_2d();
        let g = Grid::with_points_per_axis(&spec, 5).unwrap();
        assert_eq!(g.len(), 25);
        assert!((g.h - 2.0 / 6.0).abs() < 1e-15);
        // margin of one unit holds three whole cells of width 1/3
        assert_eq!(g.kmin, [-3, -3]);
        assert_eq!(g.kmax, [9, 9]);
        for (i, &k) in g.interior.iter().enumerate() {
            assert_eq!(g.interior_index(k), Some(i));
        }
        assert_eq!(g.lattice_shape(), [13, 13]);
    }

    #[test]
    fn window_offsets_are_symmetric() {
        let spec = ProblemSpec::beta_2d();
        let g = Grid::new(&spec, 16).unwrap();
        let offs = g.window_offsets(4.0 * g.h);
        assert!(offs.iter().all(|&(_, r)| r < 4.0 * g.h));
        for &(o, _) in &offs {
            assert!(offs.iter().any(|&(p, _)| p == [-o[0], -o[1]]));
            assert!(offs.iter().any(|&(p, _)| p == [o[1], o[0]]));
        }
        // columns x = 0, ±1, ±2 hold 7 points each, x = ±3 holds 5; minus the origin
        assert_eq!(offs.len(), 44);
    }

    #[test]
    fn nesting() {
        let spec = ProblemSpec::kappa_2d(0.75);
        let c = Grid::new(&spec, 8).unwrap();
        let f = Grid::new(&spec, 16).unwrap();
        let pairs = c.coincident_with(&f).unwrap();
        assert_eq!(pairs.len(), 49);
        for (i, j) in pairs {
            assert_eq!(c.point(i), f.point(j));
        }
        assert!(c.coincident_with(&Grid::new(&spec, 12).unwrap()).is_err());
    }
}
