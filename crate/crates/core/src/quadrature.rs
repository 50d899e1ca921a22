//! Windowed correction integrals and a general adaptive 1D rule.
//!
//! Every correction integral reduces to a radial moment of the window,
//! `∫₀^δ w(r) r^a dr` or `∫₀^δ w(r) r^a ln r dr`. The analytic path
//! integrates the window polynomial term by term; the adaptive path
//! integrates the same moments numerically and exists to cross-check it.

use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::fields::{window, WINDOW_TERMS};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadResult {
    pub value: f64,
    pub error_estimate: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdaptiveOptions {
    pub abs_tol: f64,
    pub rel_tol: f64,
    /// Maximum number of bisections applied to any subinterval.
    pub max_depth: u32,
}

impl Default for AdaptiveOptions {
    fn default() -> Self {
        Self {
            abs_tol: 1e-12,
            rel_tol: 1e-12,
            max_depth: 15,
        }
    }
}

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_18,
    0.140_653_259_715_525_92,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_83,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// Gauss–Kronrod 7/15 on `[a, b]`: (Kronrod value, |K − G|).
fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut k = WGK[7] * fc;
    let mut g = WG[3] * fc;
    for j in 0..7 {
        let x = h * XGK[j];
        let s = f(c - x) + f(c + x);
        k += WGK[j] * s;
        if j % 2 == 1 {
            g += WG[j / 2] * s;
        }
    }
    (k * h, ((k - g) * h).abs())
}

struct Piece {
    a: f64,
    b: f64,
    value: f64,
    err: f64,
    depth: u32,
}

impl PartialEq for Piece {
    fn eq(&self, o: &Self) -> bool {
        self.err == o.err
    }
}
impl Eq for Piece {}
impl PartialOrd for Piece {
    fn partial_cmp(&self, o: &Self) -> Option<Ordering> {
        Some(self.cmp(o))
    }
}
impl Ord for Piece {
    fn cmp(&self, o: &Self) -> Ordering {
        self.err.total_cmp(&o.err)
    }
}

/// Adaptive integration of `f` over `[a, b]` to absolute tolerance `tol`.
///
/// Never evaluates the endpoints, so integrable endpoint singularities are
/// admissible.
pub fn adaptive_1d<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> Result<QuadResult> {
    adaptive_1d_with(
        f,
        a,
        b,
        AdaptiveOptions {
            abs_tol: tol,
            rel_tol: 0.0,
            ..AdaptiveOptions::default()
        },
    )
}

/// Globally adaptive Gauss–Kronrod: repeatedly bisects the subinterval
/// with the largest error estimate until the summed estimate meets
/// `max(abs_tol, rel_tol·|value|)`.
pub fn adaptive_1d_with<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    opts: AdaptiveOptions,
) -> Result<QuadResult> {
    if !(a < b) {
        return Err(Error::Domain(format!("empty interval [{a}, {b}]")));
    }
    let mut heap = BinaryHeap::new();
    let (v, e) = gk15(&f, a, b);
    let mut evaluations = 15;
    let mut total = v;
    let mut total_err = e;
    heap.push(Piece { a, b, value: v, err: e, depth: 0 });
    let mut frozen_err = 0.0;

    loop {
        let target = opts.abs_tol.max(opts.rel_tol * total.abs());
        if total_err <= target {
            return Ok(QuadResult {
                value: total,
                error_estimate: total_err,
                evaluations,
            });
        }
        let Some(p) = heap.pop() else {
            break;
        };
        if p.depth >= opts.max_depth {
            frozen_err += p.err;
            // nothing refinable can bring the estimate below the target
            if frozen_err > target {
                break;
            }
            continue;
        }
        let m = 0.5 * (p.a + p.b);
        let (v1, e1) = gk15(&f, p.a, m);
        let (v2, e2) = gk15(&f, m, p.b);
        evaluations += 30;
        total += v1 + v2 - p.value;
        total_err += e1 + e2 - p.err;
        heap.push(Piece { a: p.a, b: m, value: v1, err: e1, depth: p.depth + 1 });
        heap.push(Piece { a: m, b: p.b, value: v2, err: e2, depth: p.depth + 1 });
    }
    Err(Error::QuadratureDepth {
        value: total,
        error_estimate: total_err.max(0.0),
    })
}

/// How correction integrals are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum QuadPath {
    #[default]
    Analytic,
    Adaptive,
}

/// `∫₀^ρ (r/δ)^k r^a dr` and the same with a `ln r` factor, for `k + a > −1`.
fn power_moment(k: i32, a: f64, rho: f64, delta: f64, log: bool) -> f64 {
    let q = k as f64 + a + 1.0;
    let base = rho.powf(q) / delta.powi(k);
    if log {
        base * (rho.ln() / q - 1.0 / (q * q))
    } else {
        base / q
    }
}

fn window_poly_moment(a: f64, rho: f64, delta: f64, log: bool) -> f64 {
    WINDOW_TERMS
        .iter()
        .map(|&(k, c)| c * power_moment(k, a, rho, delta, log))
        .sum()
}

/// `∫₀^δ w(r) r^a dr` (with `log`, `∫₀^δ w(r) r^a ln r dr`), `a > −1`.
pub fn window_moment(a: f64, delta: f64, log: bool, path: QuadPath) -> f64 {
    match path {
        QuadPath::Analytic => window_poly_moment(a, delta, delta, log),
        QuadPath::Adaptive => {
            // dyadic pieces [δ2^{-k-1}, δ2^{-k}] by quadrature; the innermost
            // [0, δ2^{-K}] by the power rule applied to each polynomial term
            const LEVELS: i32 = 40;
            let f = |r: f64| {
                let v = window(r, delta) * r.powf(a);
                if log {
                    v * r.ln()
                } else {
                    v
                }
            };
            let mut sum = 0.0;
            for k in 0..LEVELS {
                let hi = delta * 0.5f64.powi(k);
                let lo = 0.5 * hi;
                let opts = AdaptiveOptions {
                    abs_tol: 0.0,
                    rel_tol: 1e-14,
                    max_depth: 20,
                };
                let piece = match adaptive_1d_with(f, lo, hi, opts) {
                    Ok(q) => q.value,
                    Err(Error::QuadratureDepth { value, .. }) => value,
                    Err(_) => unreachable!(),
                };
                sum += piece;
            }
            let rho = delta * 0.5f64.powi(LEVELS);
            sum + window_poly_moment(a, rho, delta, log)
        }
    }
}

/// Surface measure of the unit sphere in ℝⁿ (2 in 1D, 2π in 2D, 4π in 3D).
pub fn sphere_measure(n: usize) -> f64 {
    match n {
        1 => 2.0,
        2 => 2.0 * PI,
        3 => 4.0 * PI,
        _ => panic!("dimension {n} not supported"),
    }
}

/// `∫ w(|y−x|) / |y−x|^{2β−1} dy` over the window in 1D.
pub fn corr_u2_1d(beta: f64, delta: f64) -> f64 {
    corr_u2_1d_with(beta, delta, QuadPath::Analytic)
}

pub fn corr_u2_1d_with(beta: f64, delta: f64, path: QuadPath) -> f64 {
    2.0 * window_moment(1.0 - 2.0 * beta, delta, false, path)
}

/// `β′ ∫ w(|y−x|) ln|y−x| / |y−x|^{2β−1} dy` over the window in 1D.
pub fn corr_log_1d(beta: f64, dbeta: f64, delta: f64) -> f64 {
    corr_log_1d_with(beta, dbeta, delta, QuadPath::Analytic)
}

pub fn corr_log_1d_with(beta: f64, dbeta: f64, delta: f64, path: QuadPath) -> f64 {
    if dbeta == 0.0 {
        return 0.0;
    }
    2.0 * dbeta * window_moment(1.0 - 2.0 * beta, delta, true, path)
}

/// Per-direction integral `∫ w(‖y−x‖)(y_d − x_d)² / ‖y−x‖^{n+2β} dy`.
///
/// The window is radial and unclipped, so the integral is the same for
/// every direction and equals `(|S^{n−1}|/n) ∫₀^δ w(r) r^{1−2β} dr`.
pub fn corr_u2_nd(beta: f64, delta: f64, n: usize) -> f64 {
    corr_u2_nd_with(beta, delta, n, QuadPath::Analytic)
}

pub fn corr_u2_nd_with(beta: f64, delta: f64, n: usize, path: QuadPath) -> f64 {
    sphere_measure(n) / n as f64 * window_moment(1.0 - 2.0 * beta, delta, false, path)
}

/// Per-direction log integral
/// `∂_dβ ∫ w(‖y−x‖)(y_d − x_d)² ln‖y−x‖ / ‖y−x‖^{n+2β} dy`.
pub fn corr_log_nd(beta: f64, dbeta_d: f64, delta: f64, n: usize) -> f64 {
    corr_log_nd_with(beta, dbeta_d, delta, n, QuadPath::Analytic)
}

pub fn corr_log_nd_with(beta: f64, dbeta_d: f64, delta: f64, n: usize, path: QuadPath) -> f64 {
    if dbeta_d == 0.0 {
        return 0.0;
    }
    dbeta_d * sphere_measure(n) / n as f64 * window_moment(1.0 - 2.0 * beta, delta, true, path)
}

/// `∫_{−δ}^{δ} w(|r|) |r|^{−β} dr`, the exact half of the flux correction
/// in the non-symmetric formulation.
pub fn flux_window_integral(beta: f64, delta: f64) -> f64 {
    2.0 * window_moment(-beta, delta, false, QuadPath::Analytic)
}
