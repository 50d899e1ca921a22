//! Grid-refinement studies: solve on nested grids and measure the
//! successive-grid error at coincident nodes.

use crate::assembly::{assemble_dense_capped, assemble_with, AssemblyOptions, DiscreteOperator, DENSE_CAP};
use crate::error::{Error, Result};
use crate::fields::ProblemSpec;
use crate::grid::Grid;
use crate::linalg::{dense_cholesky, dense_lu, dense_solve, norm_inf};
use crate::cholesky::factorize;
use crate::clustering::{default_tile_size, order_points};
use crate::par::Execution;
use crate::tlr::assemble_tlr;

/// Solves `A u = f` with a dense factorization: Cholesky for the symmetric
/// formulations, pivoted LU otherwise.
pub fn solve_dense(op: &DiscreteOperator, exec: Execution) -> Result<Vec<f64>> {
    let a = assemble_dense_capped(op, DENSE_CAP, exec)?;
    if op.is_symmetric() {
        let l = dense_cholesky(&a)?;
        dense_solve(&l, &op.rhs)
    } else {
        dense_lu(&a)?.solve(&op.rhs)
    }
}

/// `‖u_c − u_f‖_∞ / ‖u_f‖_∞` over the nodes shared by the two grids.
pub fn successive_error(coarse: &Grid, uc: &[f64], fine: &Grid, uf: &[f64]) -> Result<f64> {
    let pairs = coarse.coincident_with(fine)?;
    let mut num = 0.0f64;
    let mut den = 0.0f64;
    for (i, j) in pairs {
        num = num.max((uc[i] - uf[j]).abs());
        den = den.max(uf[j].abs());
    }
    if den == 0.0 {
        return Ok(if num == 0.0 { 0.0 } else { f64::INFINITY });
    }
    Ok(num / den)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudyRow {
    /// Cells across the interior along each axis.
    pub cells: usize,
    /// Unknowns.
    pub n: usize,
    pub h: f64,
    /// Error against the next finer grid (absent on the finest grid).
    pub error: Option<f64>,
    /// `log₂(e_prev / e)` against the previous row.
    pub rate: Option<f64>,
}

/// Least-squares slope of `log e` against `log h`.
pub fn fitted_rate(rows: &[StudyRow]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = rows
        .iter()
        .filter_map(|r| r.error.filter(|e| *e > 0.0).map(|e| (r.h.ln(), e.ln())))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx).powi(2)).sum();
    Some(sxy / sxx)
}

/// Solves on each grid (cells doubling) with `solver` and tabulates the
/// successive-grid errors.
pub fn convergence_study<F>(
    spec: &ProblemSpec,
    cells: &[usize],
    opts: &AssemblyOptions,
    mut solver: F,
) -> Result<Vec<StudyRow>>
where
    F: FnMut(&DiscreteOperator) -> Result<Vec<f64>>,
{
    if cells.len() < 2 {
        return Err(Error::Config("a convergence study needs at least two grids".into()));
    }
    if cells.windows(2).any(|w| w[1] != 2 * w[0]) {
        return Err(Error::Config(format!("grids {cells:?} are not nested with ratio 2")));
    }
    let mut solutions = Vec::with_capacity(cells.len());
    for &c in cells {
        let grid = Grid::new(spec, c)?;
        let op = assemble_with(spec, &grid, opts)?;
        let u = solver(&op)?;
        solutions.push((grid, u));
    }
    let mut rows = Vec::with_capacity(cells.len());
    let mut prev: Option<f64> = None;
    for k in 0..cells.len() {
        let (grid, u) = &solutions[k];
        let error = match solutions.get(k + 1) {
            Some((fg, fu)) => Some(successive_error(grid, u, fg, fu)?),
            None => None,
        };
        let rate = match (prev, error) {
            (Some(p), Some(e)) if p > 0.0 && e > 0.0 => Some((p / e).log2()),
            _ => None,
        };
        rows.push(StudyRow {
            cells: cells[k],
            n: grid.len(),
            h: grid.h,
            error,
            rate,
        });
        prev = error;
    }
    Ok(rows)
}

/// Max-norm of a solution, handy for sanity checks.
pub fn max_norm(u: &[f64]) -> f64 {
    norm_inf(u)
}

/// Solves `A u = f` through a TLR Cholesky factorization with KD ordering
/// and tiles of `m` points (`m = 0` picks the default size).
pub fn solve_tlr(op: &DiscreteOperator, m: usize, eps: f64, seed: u64, exec: Execution) -> Result<Vec<f64>> {
    if !op.is_symmetric() {
        return Err(Error::Unsupported("TLR Cholesky needs a symmetric operator".into()));
    }
    let m = if m == 0 { default_tile_size(op.n()) } else { m };
    let partition = order_points(&op.grid.points(), m.min(op.n()).max(2))?;
    let a = assemble_tlr(op, &partition, eps, seed, exec)?;
    let f = factorize(&a, eps, exec)?;
    f.solve(&op.rhs)
}
