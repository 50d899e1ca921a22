//! Discrete operators `A = B + D + C` on a regular lattice.
//!
//! `B` is the dense kernel part, evaluated lazily entry by entry; `D` is the
//! diagonal collecting the kernel sums over the whole lattice of Ω ∪ Ω₀;
//! `C` is the sparse stencil produced by the singularity subtraction.
//! The non-symmetric flux formulation has no `D`, and its dense part is the
//! two-point divergence of the discrete fractional flux.

mod sparse;

use std::collections::HashMap;

pub use sparse::SparseCorrection;

use crate::error::{Error, Result};
use crate::fields::{omega, window, Formulation, Point, ProblemSpec, WindowSpec};
use crate::grid::Grid;
use crate::linalg::DenseMatrix;
use crate::par::Execution;
use crate::quadrature::{corr_log_nd_with, corr_u2_nd_with, flux_window_integral, QuadPath};

/// Largest operator that [`assemble_dense`] will materialize by default.
pub const DENSE_CAP: usize = 8192;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AssemblyOptions {
    /// How the windowed correction integrals are evaluated.
    pub quadrature: QuadPath,
    /// Use `k± = c_i(2c_{i±1/2} − c_i)` instead of `k± = c_i c_{i±1}`.
    pub half_point_kappa: bool,
    /// Apply the singularity correction. Switching it off keeps only the
    /// plain lattice sums (used to show what the correction buys).
    pub singularity_treatment: bool,
    pub execution: Execution,
}

impl Default for AssemblyOptions {
    fn default() -> Self {
        Self {
            quadrature: QuadPath::Analytic,
            half_point_kappa: false,
            singularity_treatment: true,
            execution: Execution::default(),
        }
    }
}

/// Values indexed by absolute lattice offset `(|dx|, |dy|)`.
#[derive(Debug, Clone)]
struct OffsetTable {
    nx: usize,
    data: Vec<f64>,
}

impl OffsetTable {
    fn build(span: [usize; 2], f: impl Fn(usize, usize) -> f64) -> Self {
        let nx = span[0] + 1;
        let mut data = Vec::with_capacity(nx * (span[1] + 1));
        for dy in 0..=span[1] {
            for dx in 0..nx {
                data.push(f(dx, dy));
            }
        }
        Self { nx, data }
    }

    #[inline]
    fn get(&self, dx: usize, dy: usize) -> f64 {
        self.data[dy * self.nx + dx]
    }

    /// Row `dy` mirrored to signed offsets `−span..=span`.
    fn signed_row(&self, dy: usize) -> Vec<f64> {
        let row = &self.data[dy * self.nx..(dy + 1) * self.nx];
        row.iter().rev().chain(row.iter().skip(1)).copied().collect()
    }
}

#[derive(Debug, Clone)]
enum Kernel {
    /// Constant order: `c_i c_j |x_j − x_i|^{−p}`.
    Separable { c: Vec<f64>, table: OffsetTable },
    /// Variable order, constant diffusivity:
    /// `κ exp(−(n + β_i + β_j) ln|x_j − x_i|)`.
    VariableOrder {
        beta: Vec<f64>,
        kappa: f64,
        log_r: OffsetTable,
    },
    /// Flux divergence; per-face `κω` and `β`, and `ln((m + ½)h)`.
    Flux {
        g: Vec<f64>,
        beta: Vec<f64>,
        log_half: Vec<f64>,
    },
}

/// The assembled operator: lazy dense part, diagonal, sparse correction
/// and right-hand side, all over interior unknowns in lattice order.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    pub grid: Grid,
    pub formulation: Formulation,
    pub window: WindowSpec,
    /// `D` (zero for the flux formulation).
    pub diag: Vec<f64>,
    pub correction: SparseCorrection,
    pub rhs: Vec<f64>,
    kernel: Kernel,
    /// `−2hⁿ` for the symmetric kernels.
    weight: f64,
}

impl DiscreteOperator {
    pub fn n(&self) -> usize {
        self.grid.len()
    }

    pub fn is_symmetric(&self) -> bool {
        self.formulation.is_symmetric()
    }

    /// Dense part `B_ij`.
    #[inline]
    pub fn b_entry(&self, i: usize, j: usize) -> f64 {
        let ki = self.grid.interior[i];
        let kj = self.grid.interior[j];
        match &self.kernel {
            Kernel::Separable { c, table } => {
                let dx = ki[0].abs_diff(kj[0]) as usize;
                let dy = ki[1].abs_diff(kj[1]) as usize;
                self.weight * c[i] * c[j] * table.get(dx, dy)
            }
            Kernel::VariableOrder { beta, kappa, log_r } => {
                let dx = ki[0].abs_diff(kj[0]) as usize;
                let dy = ki[1].abs_diff(kj[1]) as usize;
                let p = self.grid.dim as f64 + (beta[i] + beta[j]);
                self.weight * kappa * (-p * log_r.get(dx, dy)).exp()
            }
            Kernel::Flux { g, beta, log_half } => {
                let t = kj[0] - ki[0];
                let right = ki[0] as usize;
                let left = right - 1;
                let flux = |f: usize, s: i64| {
                    // offset (s − ½)h from face f to node j
                    let (sign, m) = if s >= 1 { (1.0, s - 1) } else { (-1.0, -s) };
                    -g[f] * sign * (-(beta[f] + 1.0) * log_half[m as usize]).exp()
                };
                flux(right, t) - flux(left, t + 1)
            }
        }
    }

    /// `A_ij = B_ij + D_i[i = j] + C_ij`.
    pub fn entry(&self, i: usize, j: usize) -> f64 {
        let mut v = self.b_entry(i, j) + self.correction.get(i, j);
        if i == j {
            v += self.diag[i];
        }
        v
    }

    /// Row-major block `A[rows, cols]` into `out`.
    pub fn fill_block(&self, rows: &[usize], cols: &[usize], out: &mut [f64]) {
        let nc = cols.len();
        assert_eq!(out.len(), rows.len() * nc);
        for (a, &i) in rows.iter().enumerate() {
            let row = &mut out[a * nc..(a + 1) * nc];
            for (o, &j) in row.iter_mut().zip(cols) {
                *o = self.b_entry(i, j);
            }
        }
        let pos: HashMap<usize, usize> = cols.iter().enumerate().map(|(b, &j)| (j, b)).collect();
        for (a, &i) in rows.iter().enumerate() {
            if let Some(&b) = pos.get(&i) {
                out[a * nc + b] += self.diag[i];
            }
            let (cj, cv) = self.correction.row(i);
            for (j, v) in cj.iter().zip(cv) {
                if let Some(&b) = pos.get(j) {
                    out[a * nc + b] += v;
                }
            }
        }
    }

    /// Dense product `A x`, evaluating every entry.
    pub fn apply(&self, x: &[f64], exec: Execution) -> Result<Vec<f64>> {
        let n = self.n();
        if x.len() != n {
            return Err(Error::DimensionMismatch { expected: n, got: x.len() });
        }
        let mut y = exec.map_range(0..n, |i| {
            let b: f64 = (0..n).map(|j| self.b_entry(i, j) * x[j]).sum();
            b + self.diag[i] * x[i]
        });
        self.correction.apply_add(x, &mut y);
        Ok(y)
    }
}

/// Right-hand side: the source sampled at the interior nodes.
pub fn rhs(spec: &ProblemSpec, grid: &Grid) -> Vec<f64> {
    grid.points().into_iter().map(|p| spec.source.value(p)).collect()
}

/// Assembles the operator selected by `spec.formulation` with default options.
pub fn assemble(spec: &ProblemSpec, grid: &Grid) -> Result<DiscreteOperator> {
    assemble_with(spec, grid, &AssemblyOptions::default())
}

pub fn assemble_with(spec: &ProblemSpec, grid: &Grid, opts: &AssemblyOptions) -> Result<DiscreteOperator> {
    if grid.dim != spec.dim {
        return Err(Error::DimensionMismatch { expected: spec.dim, got: grid.dim });
    }
    match spec.formulation {
        Formulation::NonsymmetricVariableBeta => nonsym(spec, grid, opts),
        _ => symmetric(spec, grid, opts),
    }
}

fn require(spec: &ProblemSpec, formulation: Formulation, dim: usize) -> Result<()> {
    if spec.formulation != formulation || spec.dim != dim {
        return Err(Error::Config(format!(
            "expected a {formulation:?} problem in {dim}D, got {:?} in {}D",
            spec.formulation, spec.dim
        )));
    }
    Ok(())
}

/// 1D symmetric operator with variable diffusivity and constant order.
pub fn assemble_symmetric_kappa_1d(spec: &ProblemSpec, grid: &Grid) -> Result<DiscreteOperator> {
    require(spec, Formulation::SymmetricVariableKappa, 1)?;
    assemble(spec, grid)
}

/// 1D symmetric operator with variable order and constant diffusivity.
pub fn assemble_symmetric_beta_1d(spec: &ProblemSpec, grid: &Grid) -> Result<DiscreteOperator> {
    require(spec, Formulation::SymmetricVariableBeta, 1)?;
    assemble(spec, grid)
}

/// 2D symmetric operator; exactly one of κ and β may vary.
pub fn assemble_symmetric_2d(spec: &ProblemSpec, grid: &Grid) -> Result<DiscreteOperator> {
    if spec.dim != 2 || !spec.formulation.is_symmetric() {
        return Err(Error::Config("expected a symmetric 2D problem".into()));
    }
    assemble(spec, grid)
}

/// 1D flux-form operator with variable order.
pub fn assemble_nonsym_1d(spec: &ProblemSpec, grid: &Grid) -> Result<DiscreteOperator> {
    require(spec, Formulation::NonsymmetricVariableBeta, 1)?;
    assemble(spec, grid)
}

/// Materializes every entry of `op` (refuses above [`DENSE_CAP`]).
pub fn assemble_dense(op: &DiscreteOperator) -> Result<DenseMatrix> {
    assemble_dense_capped(op, DENSE_CAP, Execution::default())
}

pub fn assemble_dense_capped(op: &DiscreteOperator, cap: usize, exec: Execution) -> Result<DenseMatrix> {
    let n = op.n();
    if n > cap {
        return Err(Error::DenseCap { n, cap });
    }
    let all: Vec<usize> = (0..n).collect();
    let mut data = vec![0.0; n * n];
    let chunk = 16.min(n.max(1));
    exec.for_each_chunk_mut(&mut data, chunk * n, |c, block| {
        let rows: Vec<usize> = (c * chunk..(c * chunk + block.len() / n)).collect();
        op.fill_block(&rows, &all, block);
    });
    Ok(DenseMatrix::from_vec(n, n, data))
}

/// Field values at every lattice node, first axis fastest.
struct LatticeFields {
    shape: [usize; 2],
    c: Vec<f64>,
    beta: Vec<f64>,
}

impl LatticeFields {
    fn new(spec: &ProblemSpec, grid: &Grid, exec: Execution) -> Result<Self> {
        let nodes = grid.lattice();
        let vals = exec.map_range(0..nodes.len(), |q| -> Result<(f64, f64)> {
            let p = grid.coord(nodes[q]);
            Ok((spec.kappa_checked(p)?.sqrt(), spec.beta_checked(p)?))
        });
        let mut c = Vec::with_capacity(nodes.len());
        let mut beta = Vec::with_capacity(nodes.len());
        for v in vals {
            let (a, b) = v?;
            c.push(a);
            beta.push(b);
        }
        Ok(Self { shape: grid.lattice_shape(), c, beta })
    }

    #[inline]
    fn index(&self, grid: &Grid, k: [i64; 2]) -> usize {
        let x = (k[0] - grid.kmin[0]) as usize;
        let y = (k[1] - grid.kmin[1]) as usize;
        y * self.shape[0] + x
    }
}

struct WindowTerm {
    w: f64,
    /// `(o_d h)²` per direction.
    sq: [f64; 2],
    log_r: f64,
}

fn window_terms(grid: &Grid, delta: f64) -> Vec<WindowTerm> {
    grid.window_offsets(delta)
        .into_iter()
        .map(|(o, r)| WindowTerm {
            w: window(r, delta),
            sq: [
                (o[0] as f64 * grid.h).powi(2),
                (o[1] as f64 * grid.h).powi(2),
            ],
            log_r: r.ln(),
        })
        .collect()
}

/// `hⁿ Σ w (o_d h)² r^{−n−2β}` and the same with a `ln r` factor.
fn lattice_moments(terms: &[WindowTerm], hn: f64, n: usize, beta: f64, d: usize) -> (f64, f64) {
    let p = n as f64 + 2.0 * beta;
    let mut plain = 0.0;
    let mut log = 0.0;
    for t in terms {
        let v = t.w * t.sq[d] * (-p * t.log_r).exp();
        plain += v;
        log += v * t.log_r;
    }
    (hn * plain, hn * log)
}

fn unit(d: usize) -> [i64; 2] {
    let mut e = [0, 0];
    e[d] = 1;
    e
}

fn symmetric(spec: &ProblemSpec, grid: &Grid, opts: &AssemblyOptions) -> Result<DiscreteOperator> {
    spec.validate()?;
    let n = grid.dim;
    let h = grid.h;
    let hn = h.powi(n as i32);
    let window_spec = spec.window.resolve(h);
    spec.check_window(window_spec)?;
    let delta = window_spec.delta;

    let variable_beta = spec.formulation == Formulation::SymmetricVariableBeta;
    let kappa_const = spec.kappa.constant_value();
    let beta_const = spec.beta.constant_value();
    if variable_beta && kappa_const.is_none() {
        return Err(Error::Unsupported(
            "variable order together with variable diffusivity".into(),
        ));
    }
    if !variable_beta && beta_const.is_none() {
        return Err(Error::Unsupported(
            "variable diffusivity together with variable order".into(),
        ));
    }

    for d in 0..n {
        if grid.kmin[d] > -1 || grid.kmax[d] < grid.cells[d] as i64 + 1 {
            return Err(Error::Config("the exterior box must hold at least one cell beyond the interior".into()));
        }
    }
    let fields = LatticeFields::new(spec, grid, opts.execution)?;
    let interior_lattice: Vec<usize> = grid.interior.iter().map(|&k| fields.index(grid, k)).collect();
    let span = [fields.shape[0] - 1, fields.shape[1] - 1];
    let log_r = OffsetTable::build(span, |dx, dy| {
        if dx == 0 && dy == 0 {
            f64::INFINITY
        } else {
            (h * ((dx * dx + dy * dy) as f64).sqrt()).ln()
        }
    });
    let weight = -2.0 * hn;

    let kernel = if variable_beta {
        Kernel::VariableOrder {
            beta: interior_lattice.iter().map(|&q| fields.beta[q]).collect(),
            kappa: kappa_const.unwrap_or(1.0),
            log_r: log_r.clone(),
        }
    } else {
        let p = n as f64 + 2.0 * beta_const.unwrap_or(0.5);
        Kernel::Separable {
            c: interior_lattice.iter().map(|&q| fields.c[q]).collect(),
            table: OffsetTable {
                nx: log_r.nx,
                data: log_r.data.iter().map(|&l| (-p * l).exp()).collect(),
            },
        }
    };

    let diag = diagonal_sums(grid, &fields, &kernel, &log_r, span, -weight, opts.execution);

    let correction = if opts.singularity_treatment {
        symmetric_correction(spec, grid, &fields, delta, opts, variable_beta, kappa_const)?
    } else {
        SparseCorrection::zeros(grid.len())
    };

    Ok(DiscreteOperator {
        grid: grid.clone(),
        formulation: spec.formulation,
        window: window_spec,
        diag,
        correction,
        rhs: rhs(spec, grid),
        kernel,
        weight,
    })
}

/// `D_i = 2hⁿ Σ_{j ≠ i} γ_ij` over every lattice node of Ω ∪ Ω₀.
fn diagonal_sums(
    grid: &Grid,
    fields: &LatticeFields,
    kernel: &Kernel,
    log_r: &OffsetTable,
    span: [usize; 2],
    scale: f64,
    exec: Execution,
) -> Vec<f64> {
    let [sx, sy] = fields.shape;
    let n = grid.dim as f64;
    match kernel {
        Kernel::Separable { c, table } => {
            let rows: Vec<Vec<f64>> = (0..=span[1]).map(|dy| table.signed_row(dy)).collect();
            exec.map_range(0..grid.len(), |i| {
                let k = grid.interior[i];
                let ix = (k[0] - grid.kmin[0]) as usize;
                let iy = (k[1] - grid.kmin[1]) as usize;
                let start = span[0] - ix;
                let mut s = 0.0;
                for y in 0..sy {
                    let t = &rows[y.abs_diff(iy)][start..start + sx];
                    s += crate::linalg::dot(&fields.c[y * sx..(y + 1) * sx], t);
                }
                scale * c[i] * s
            })
        }
        Kernel::VariableOrder { beta, kappa, .. } => {
            let rows: Vec<Vec<f64>> = (0..=span[1]).map(|dy| log_r.signed_row(dy)).collect();
            exec.map_range(0..grid.len(), |i| {
                let k = grid.interior[i];
                let ix = (k[0] - grid.kmin[0]) as usize;
                let iy = (k[1] - grid.kmin[1]) as usize;
                let start = span[0] - ix;
                let a = n + beta[i];
                let mut s = 0.0;
                for y in 0..sy {
                    let l = &rows[y.abs_diff(iy)][start..start + sx];
                    let b = &fields.beta[y * sx..(y + 1) * sx];
                    s += l.iter().zip(b).map(|(&l, &bj)| (-(a + bj) * l).exp()).sum::<f64>();
                }
                scale * kappa * s
            })
        }
        Kernel::Flux { .. } => unreachable!("flux operators carry no diagonal sums"),
    }
}

/// Sparse stencil from the singularity subtraction, symmetrized so that
/// `C_ij = (raw_ij + raw_ji)/2` off the diagonal and every extended row
/// (including weights on constrained nodes) sums to zero.
fn symmetric_correction(
    spec: &ProblemSpec,
    grid: &Grid,
    fields: &LatticeFields,
    delta: f64,
    opts: &AssemblyOptions,
    variable_beta: bool,
    kappa_const: Option<f64>,
) -> Result<SparseCorrection> {
    let n = grid.dim;
    let h = grid.h;
    let hn = h.powi(n as i32);
    let terms = window_terms(grid, delta);
    let quad = opts.quadrature;

    // constant-order weights shared by every node
    let s_const: [f64; 2] = if variable_beta {
        [0.0; 2]
    } else {
        let beta = fields.beta[0];
        let corr = corr_u2_nd_with(beta, delta, n, quad);
        let mut s = [0.0; 2];
        for (d, sd) in s.iter_mut().enumerate().take(n) {
            *sd = lattice_moments(&terms, hn, n, beta, d).0 - corr;
        }
        s
    };

    // raw stencil weights of lattice node `k`: `[d][0]` toward −e_d, `[d][1]` toward +e_d
    let raw = |k: [i64; 2]| -> [[f64; 2]; 2] {
        let mut out = [[0.0; 2]; 2];
        let q = fields.index(grid, k);
        let x = grid.coord(k);
        if variable_beta {
            let beta = fields.beta[q];
            let kappa = kappa_const.unwrap_or(1.0);
            let grad = spec.beta.gradient(x, n, h);
            let corr_u2 = corr_u2_nd_with(beta, delta, n, quad);
            for d in 0..n {
                let (m_u2, m_log) = lattice_moments(&terms, hn, n, beta, d);
                let a = kappa * (m_u2 - corr_u2);
                let b = kappa * (grad[d] * m_log - corr_log_nd_with(beta, grad[d], delta, n, quad));
                out[d][0] = a / (h * h) + b / h;
                out[d][1] = a / (h * h) - b / h;
            }
        } else {
            let ci = fields.c[q];
            for d in 0..n {
                let e = unit(d);
                for (side, sgn) in [(0usize, -1i64), (1, 1)] {
                    let k_coef = if opts.half_point_kappa {
                        let mut half: Point = x;
                        half[d] += 0.5 * sgn as f64 * h;
                        ci * (2.0 * spec.kappa.value(half).sqrt() - ci)
                    } else {
                        let nb = [k[0] + sgn * e[0], k[1] + sgn * e[1]];
                        ci * fields.c[fields.index(grid, nb)]
                    };
                    out[d][side] = s_const[d] * k_coef / (h * h);
                }
            }
        }
        out
    };

    let rows = opts.execution.map_range(0..grid.len(), |i| {
        let k = grid.interior[i];
        let mine = raw(k);
        let mut entries = Vec::with_capacity(2 * n + 1);
        let mut exterior = 0.0;
        let mut diag = 0.0;
        for d in 0..n {
            let e = unit(d);
            for (side, sgn) in [(0usize, -1i64), (1, 1)] {
                let nb = [k[0] + sgn * e[0], k[1] + sgn * e[1]];
                let theirs = raw(nb)[d][1 - side];
                let v = 0.5 * (mine[d][side] + theirs);
                diag -= v;
                match grid.interior_index(nb) {
                    Some(j) => entries.push((j, v)),
                    None => exterior += v,
                }
            }
        }
        entries.push((i, diag));
        (entries, exterior)
    });
    let (rows, exterior): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
    Ok(SparseCorrection::from_rows(rows, exterior))
}

fn nonsym(spec: &ProblemSpec, grid: &Grid, opts: &AssemblyOptions) -> Result<DiscreteOperator> {
    spec.validate()?;
    if grid.dim != 1 {
        return Err(Error::Unsupported("the flux formulation is implemented in 1D only".into()));
    }
    let h = grid.h;
    let window_spec = spec.window.resolve(h);
    spec.check_window(window_spec)?;
    let delta = window_spec.delta;
    let cells = grid.cells[0];

    // faces sit halfway between lattice nodes f and f + 1
    let mut g = Vec::with_capacity(cells);
    let mut beta = Vec::with_capacity(cells);
    for f in 0..cells {
        let x = [grid.origin[0] + (f as f64 + 0.5) * h, 0.0];
        let b = spec.beta_checked(x)?;
        g.push(spec.kappa_checked(x)? * omega(b, 1)?);
        beta.push(b);
    }
    for &k in &grid.interior {
        spec.beta_checked(grid.coord(k))?;
    }

    let near: Vec<f64> = (0..)
        .map(|m| (m as f64 + 0.5) * h)
        .take_while(|&r| r < delta)
        .collect();
    let coef: Vec<f64> = (0..cells)
        .map(|f| {
            if !opts.singularity_treatment {
                return 0.0;
            }
            let c1 = -2.0 * h * near.iter().map(|&r| window(r, delta) * r.powf(-beta[f])).sum::<f64>();
            let c2 = flux_window_integral(beta[f], delta);
            g[f] * (c1 + c2) / (h * h)
        })
        .collect();

    let n = grid.len();
    let mut rows = Vec::with_capacity(n);
    let mut exterior = vec![0.0; n];
    for (i, &k) in grid.interior.iter().enumerate() {
        let right = k[0] as usize;
        let left = right - 1;
        let mut r = vec![(i, coef[right] + coef[left])];
        if i > 0 {
            r.push((i - 1, -coef[left]));
        } else {
            exterior[i] -= coef[left];
        }
        if i + 1 < n {
            r.push((i + 1, -coef[right]));
        } else {
            exterior[i] -= coef[right];
        }
        rows.push(r);
    }

    let log_half = (0..=cells + 1).map(|m| ((m as f64 + 0.5) * h).ln()).collect();
    Ok(DiscreteOperator {
        grid: grid.clone(),
        formulation: spec.formulation,
        window: window_spec,
        diag: vec![0.0; n],
        correction: SparseCorrection::from_rows(rows, exterior),
        rhs: rhs(spec, grid),
        kernel: Kernel::Flux { g, beta, log_half },
        weight: 1.0,
    })
}
