use std::io::Write;
use std::time::Instant;

use anyhow::{Context, Result};
use fradi::assembly::assemble_with;
use fradi::cholesky::factorize;
use fradi::clustering::default_tile_size;
use fradi::study::{convergence_study, fitted_rate, solve_dense, solve_tlr, StudyRow};
use fradi::tlr::assemble_tlr;
use fradi::{assemble, order_points, AssemblyOptions, DiscreteOperator, Execution};

use crate::config::{Command, RunConfig, Solver};

const EXEC: Execution = Execution::Parallel;

/// One CSV table; cells are preformatted strings.
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: Vec<&'static str>) -> Self {
        Self { header, rows: Vec::new() }
    }

    pub fn write(&self, w: impl Write) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }
}

/// Float formatting: shortest round-trip decimal, or 17 significant digits.
#[derive(Clone, Copy)]
pub struct Fmt {
    pub full: bool,
}

impl Fmt {
    pub fn f(self, v: f64) -> String {
        if self.full && v.is_finite() {
            format!("{v:.16e}")
        } else {
            format!("{v:?}")
        }
    }

    pub fn opt(self, v: Option<f64>) -> String {
        v.map(|x| self.f(x)).unwrap_or_default()
    }
}

fn slope(xs: &[f64], ys: &[f64]) -> Option<f64> {
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
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

fn median3<T>(mut run: impl FnMut() -> Result<T>) -> Result<(T, f64)> {
    let mut times = Vec::with_capacity(3);
    let mut last = None;
    for _ in 0..3 {
        let t = Instant::now();
        let v = run()?;
        times.push(t.elapsed().as_secs_f64());
        last = Some(v);
    }
    times.sort_by(f64::total_cmp);
    Ok((last.expect("three runs"), times[1]))
}

fn tile_size(cfg: &RunConfig, n: usize) -> usize {
    let m = if cfg.tile == 0 { default_tile_size(n) } else { cfg.tile };
    m.clamp(2, n.max(2))
}

fn solver(cfg: &RunConfig) -> impl Fn(&DiscreteOperator) -> fradi::Result<Vec<f64>> + '_ {
    move |op| match cfg.solver {
        Solver::Dense => solve_dense(op, EXEC),
        Solver::Tlr => solve_tlr(op, cfg.tile, cfg.eps, cfg.seed, EXEC),
    }
}

fn study(cfg: &RunConfig, treated: bool) -> Result<Vec<StudyRow>> {
    let spec = cfg.spec()?;
    let opts = AssemblyOptions {
        singularity_treatment: treated,
        ..AssemblyOptions::default()
    };
    Ok(convergence_study(&spec, &cfg.grids, &opts, solver(cfg))?)
}

pub fn converge(cfg: &RunConfig) -> Result<Table> {
    let fmt = Fmt { full: cfg.full_precision };
    let rows = study(cfg, true)?;
    let fit = fitted_rate(&rows);
    let mut t = Table::new(vec!["N", "h", "error", "rate", "fitted_rate"]);
    for r in &rows {
        t.rows.push(vec![r.n.to_string(), fmt.f(r.h), fmt.opt(r.error), fmt.opt(r.rate), fmt.opt(fit)]);
    }
    Ok(t)
}

pub fn converge_nonsym(cfg: &RunConfig) -> Result<Table> {
    let fmt = Fmt { full: cfg.full_precision };
    let treated = study(cfg, true)?;
    let untreated = study(cfg, false)?;
    let (ft, fu) = (fitted_rate(&treated), fitted_rate(&untreated));
    let mut t = Table::new(vec![
        "N",
        "h",
        "error_treated",
        "rate_treated",
        "error_untreated",
        "rate_untreated",
        "fitted_rate_treated",
        "fitted_rate_untreated",
    ]);
    for (a, b) in treated.iter().zip(&untreated) {
        t.rows.push(vec![
            a.n.to_string(),
            fmt.f(a.h),
            fmt.opt(a.error),
            fmt.opt(a.rate),
            fmt.opt(b.error),
            fmt.opt(b.rate),
            fmt.opt(ft),
            fmt.opt(fu),
        ]);
    }
    Ok(t)
}

pub fn tlr_report(cfg: &RunConfig) -> Result<Table> {
    let fmt = Fmt { full: cfg.full_precision };
    let spec = cfg.spec()?;
    let mut stats = Vec::new();
    for &g in &cfg.grids {
        let op = assemble(&spec, &cfg.grid(&spec, g)?)?;
        let p = order_points(&op.grid.points(), tile_size(cfg, op.n()))?;
        let a = assemble_tlr(&op, &p, cfg.eps, cfg.seed, EXEC)?;
        stats.push(a.memory_stats());
    }
    let ns: Vec<f64> = stats.iter().map(|s| s.n as f64).collect();
    let bytes: Vec<f64> = stats.iter().map(|s| s.total_bytes as f64).collect();
    let fit = slope(&ns, &bytes);
    let mut t = Table::new(vec![
        "N",
        "m",
        "eps",
        "bytes_dense_equiv",
        "bytes_tlr",
        "avg_rank",
        "max_rank",
        "dense_fallbacks",
        "memory_slope",
    ]);
    for s in &stats {
        t.rows.push(vec![
            s.n.to_string(),
            s.m.to_string(),
            fmt.f(cfg.eps),
            s.dense_equivalent_bytes.to_string(),
            s.total_bytes.to_string(),
            fmt.f(s.average_rank),
            s.max_rank.to_string(),
            s.dense_fallbacks.to_string(),
            fmt.opt(fit),
        ]);
    }
    Ok(t)
}

struct BenchRow {
    n: usize,
    m: usize,
    build: f64,
    factor: Option<f64>,
    solve: Option<f64>,
    residual: Option<f64>,
    status: String,
}

fn bench_row(cfg: &RunConfig, g: usize) -> Result<BenchRow> {
    let spec = cfg.spec()?;
    let op = assemble(&spec, &cfg.grid(&spec, g)?)?;
    let n = op.n();
    let m = tile_size(cfg, n);
    let p = order_points(&op.grid.points(), m)?;
    let (a, build) = median3(|| Ok(assemble_tlr(&op, &p, cfg.eps, cfg.seed, EXEC)?))?;
    let mut row = BenchRow { n, m, build, factor: None, solve: None, residual: None, status: "ok".into() };
    let (f, factor) = match median3(|| Ok(factorize(&a, cfg.eps, EXEC)?)) {
        Ok(v) => v,
        Err(e) => {
            row.status = e.to_string();
            return Ok(row);
        }
    };
    row.factor = Some(factor);
    let b = &op.rhs;
    let (x, solve) = median3(|| Ok(f.solve(b)?))?;
    row.solve = Some(solve);
    let ax = a.matvec(&x, EXEC)?;
    let num: f64 = ax.iter().zip(b).map(|(u, v)| (u - v).powi(2)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    row.residual = Some(num / den);
    Ok(row)
}

pub fn factor_bench(cfg: &RunConfig) -> Result<Table> {
    let fmt = Fmt { full: cfg.full_precision };
    let rows = cfg.grids.iter().map(|&g| bench_row(cfg, g)).collect::<Result<Vec<_>>>()?;
    let (ns, times): (Vec<f64>, Vec<f64>) = rows.iter().filter_map(|r| r.factor.map(|t| (r.n as f64, t))).unzip();
    let fit = slope(&ns, &times);
    let mut t = Table::new(vec![
        "N",
        "m",
        "build_s",
        "factor_s",
        "solve_s",
        "residual",
        "factor_slope",
        "status",
    ]);
    for r in &rows {
        t.rows.push(vec![
            r.n.to_string(),
            r.m.to_string(),
            fmt.f(r.build),
            fmt.opt(r.factor),
            fmt.opt(r.solve),
            fmt.opt(r.residual),
            fmt.opt(fit),
            r.status.clone(),
        ]);
    }
    Ok(t)
}

pub fn solve(cfg: &RunConfig) -> Result<Table> {
    let fmt = Fmt { full: cfg.full_precision };
    let spec = cfg.spec()?;
    let grid = cfg.grid(&spec, cfg.grids[0])?;
    let op = assemble_with(&spec, &grid, &AssemblyOptions::default())?;
    let u = solver(cfg)(&op).context("solve failed")?;
    let mut t = Table::new(vec!["x", "y", "u"]);
    for (p, v) in op.grid.points().iter().zip(&u) {
        t.rows.push(vec![fmt.f(p[0]), fmt.f(p[1]), fmt.f(*v)]);
    }
    Ok(t)
}

pub fn run(cfg: &RunConfig) -> Result<Table> {
    match cfg.command {
        Command::Converge => converge(cfg),
        Command::ConvergeNonsym => converge_nonsym(cfg),
        Command::TlrReport => tlr_report(cfg),
        Command::FactorBench => factor_bench(cfg),
        Command::Solve => solve(cfg),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn float_formats() {
        let short = Fmt { full: false };
        assert_eq!(short.f(0.1), "0.1");
        assert_eq!(short.f(2.0), "2.0");
        assert_eq!(short.f(1e-6), "1e-6");
        assert_eq!(short.opt(None), "");
        let full = Fmt { full: true };
        assert_eq!(full.f(0.1), "1.0000000000000001e-1");
        for v in [0.1, 1.0 / 3.0, 6.02e23, -2.5e-300] {
            assert_eq!(short.f(v).parse::<f64>().unwrap(), v);
            assert_eq!(full.f(v).parse::<f64>().unwrap(), v);
        }
    }

    #[test]
    fn slope_of_power_law() {
        let xs = [1.0, 2.0, 4.0, 8.0];
        let ys: Vec<f64> = xs.iter().map(|x: &f64| 3.0 * x.powf(1.5)).collect();
        assert!((slope(&xs, &ys).unwrap() - 1.5).abs() < 1e-12);
        assert_eq!(slope(&xs[..1], &ys[..1]), None);
    }
}
