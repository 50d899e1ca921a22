//! Coefficient fields, the radial window, bump profiles and the two kernels
//! that define the fractional operators.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::special::gamma;

/// A point in the plane; one-dimensional problems use the first coordinate
/// and keep the second at zero.
pub type Point = [f64; 2];

/// `(power, coefficient)` pairs of the window polynomial in `t = r / δ`.
pub(crate) const WINDOW_TERMS: [(i32, f64); 5] =
    [(0, 1.0), (4, -35.0), (5, 84.0), (6, -70.0), (7, 20.0)];

/// Radial window `1 − 35t⁴ + 84t⁵ − 70t⁶ + 20t⁷`, `t = r/δ`, zero for `r ≥ δ`.
#[inline]
pub fn window(r: f64, delta: f64) -> f64 {
    if r >= delta {
        return 0.0;
    }
    let t = r / delta;
    let t4 = t * t * t * t;
    1.0 + t4 * (-35.0 + t * (84.0 + t * (-70.0 + 20.0 * t)))
}

/// `exp(−1/(1−ρ²))` with `ρ = (x−c)/(l/2)` inside the support, else zero.
#[inline]
pub fn bump_1d(x: f64, c: f64, l: f64) -> f64 {
    let r = (x - c) / (0.5 * l);
    if r.abs() >= 1.0 {
        0.0
    } else {
        (-1.0 / (1.0 - r * r)).exp()
    }
}

/// d/dx of [`bump_1d`].
#[inline]
pub fn bump_1d_derivative(x: f64, c: f64, l: f64) -> f64 {
    let r = (x - c) / (0.5 * l);
    if r.abs() >= 1.0 {
        0.0
    } else {
        let q = 1.0 - r * r;
        (-1.0 / q).exp() * (-2.0 * r / (q * q)) * (2.0 / l)
    }
}

#[inline]
fn rotate(v: Point, theta: f64) -> Point {
    let (s, c) = theta.sin_cos();
    [c * v[0] - s * v[1], s * v[0] + c * v[1]]
}

/// Product of two one-dimensional bumps along axes rotated by `theta`
/// about the centre `c`.
pub fn bump_2d(x: Point, c: Point, l: [f64; 2], theta: f64) -> f64 {
    let local = rotate([x[0] - c[0], x[1] - c[1]], -theta);
    bump_1d(local[0], 0.0, l[0]) * bump_1d(local[1], 0.0, l[1])
}

/// Gradient of [`bump_2d`] in global coordinates.
pub fn bump_2d_gradient(x: Point, c: Point, l: [f64; 2], theta: f64) -> Point {
    let local = rotate([x[0] - c[0], x[1] - c[1]], -theta);
    let g_local = [
        bump_1d_derivative(local[0], 0.0, l[0]) * bump_1d(local[1], 0.0, l[1]),
        bump_1d(local[0], 0.0, l[0]) * bump_1d_derivative(local[1], 0.0, l[1]),
    ];
    // local = R(−θ)(x − c) ⇒ ∇ₓ = R(−θ)ᵀ ∇_local = R(θ) ∇_local
    rotate(g_local, theta)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldTag {
    Constant,
    Linear,
    Bump1d,
    Bump2dSum,
    Custom,
}

type Evaluator = Arc<dyn Fn(Point) -> f64 + Send + Sync>;
type GradientEvaluator = Arc<dyn Fn(Point) -> Point + Send + Sync>;

/// A scalar coefficient field with an optional analytic gradient.
#[derive(Clone)]
pub struct ScalarField {
    value: Evaluator,
    gradient: Option<GradientEvaluator>,
    constant: Option<f64>,
    tag: FieldTag,
}

impl fmt::Debug for ScalarField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("tag", &self.tag)
            .field("constant", &self.constant)
            .field("analytic_gradient", &self.gradient.is_some())
            .finish()
    }
}

impl ScalarField {
    pub fn constant(v: f64) -> Self {
        Self {
            value: Arc::new(move |_| v),
            gradient: Some(Arc::new(|_| [0.0, 0.0])),
            constant: Some(v),
            tag: FieldTag::Constant,
        }
    }

    /// `a + b·x₀`.
    pub fn linear_x(a: f64, b: f64) -> Self {
        Self {
            value: Arc::new(move |p| a + b * p[0]),
            gradient: Some(Arc::new(move |_| [b, 0.0])),
            constant: None,
            tag: FieldTag::Linear,
        }
    }

    /// `base + scale·bump_1d(x₀; c, l)`.
    pub fn bump_1d(base: f64, scale: f64, c: f64, l: f64) -> Self {
        Self {
            value: Arc::new(move |p| base + scale * bump_1d(p[0], c, l)),
            gradient: Some(Arc::new(move |p| {
                [scale * bump_1d_derivative(p[0], c, l), 0.0]
            })),
            constant: None,
            tag: FieldTag::Bump1d,
        }
    }

    /// `base + Σ scaleₖ·bump_2d(x; cₖ, lₖ, θₖ)`.
    pub fn bump_2d_sum(base: f64, bumps: Vec<(f64, Point, [f64; 2], f64)>) -> Self {
        let bumps = Arc::new(bumps);
        let b2 = Arc::clone(&bumps);
        Self {
            value: Arc::new(move |p| {
                base + bumps
                    .iter()
                    .map(|&(s, c, l, th)| s * bump_2d(p, c, l, th))
                    .sum::<f64>()
            }),
            gradient: Some(Arc::new(move |p| {
                b2.iter().fold([0.0, 0.0], |acc, &(s, c, l, th)| {
                    let g = bump_2d_gradient(p, c, l, th);
                    [acc[0] + s * g[0], acc[1] + s * g[1]]
                })
            })),
            constant: None,
            tag: FieldTag::Bump2dSum,
        }
    }

    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(Point) -> f64 + Send + Sync + 'static,
    {
        Self {
            value: Arc::new(f),
            gradient: None,
            constant: None,
            tag: FieldTag::Custom,
        }
    }

    pub fn with_gradient<G>(mut self, g: G) -> Self
    where
        G: Fn(Point) -> Point + Send + Sync + 'static,
    {
        self.gradient = Some(Arc::new(g));
        self
    }

    #[inline]
    pub fn value(&self, p: Point) -> f64 {
        (self.value)(p)
    }

    pub fn tag(&self) -> FieldTag {
        self.tag
    }

    /// The value if the field is known to be constant.
    pub fn constant_value(&self) -> Option<f64> {
        self.constant
    }

    pub fn has_analytic_gradient(&self) -> bool {
        self.gradient.is_some()
    }

    /// Analytic gradient when available, otherwise a centred difference
    /// with step `step` along each of the first `dim` axes.
    pub fn gradient(&self, p: Point, dim: usize, step: f64) -> Point {
        if let Some(g) = &self.gradient {
            return g(p);
        }
        let mut out = [0.0; 2];
        for (d, o) in out.iter_mut().enumerate().take(dim) {
            let mut a = p;
            let mut b = p;
            a[d] += step;
            b[d] -= step;
            *o = (self.value(a) - self.value(b)) / (2.0 * step);
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Formulation {
    SymmetricVariableKappa,
    SymmetricVariableBeta,
    NonsymmetricVariableBeta,
}

impl Formulation {
    pub fn is_symmetric(self) -> bool {
        !matches!(self, Formulation::NonsymmetricVariableBeta)
    }
}

/// Axis-aligned box; the second axis is ignored in one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoxDomain {
    pub lo: Point,
    pub hi: Point,
}

impl BoxDomain {
    pub fn new(lo: Point, hi: Point) -> Self {
        Self { lo, hi }
    }

    pub fn contains(&self, p: Point, dim: usize) -> bool {
        (0..dim).all(|d| p[d] >= self.lo[d] && p[d] <= self.hi[d])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WindowSpec {
    pub delta: f64,
}

/// How the window radius is chosen for a particular grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum WindowRadius {
    /// `δ = multiple · h`.
    CellMultiple(f64),
    /// Fixed `δ` independent of the grid.
    Fixed(f64),
}

impl WindowRadius {
    pub fn resolve(self, h: f64) -> WindowSpec {
        match self {
            WindowRadius::CellMultiple(m) => WindowSpec { delta: m * h },
            WindowRadius::Fixed(d) => WindowSpec { delta: d },
        }
    }
}

/// A complete problem description: formulation, geometry, coefficients,
/// window and source.
#[derive(Debug, Clone)]
pub struct ProblemSpec {
    pub formulation: Formulation,
    pub dim: usize,
    pub interior: BoxDomain,
    pub exterior: BoxDomain,
    pub kappa: ScalarField,
    pub beta: ScalarField,
    pub window: WindowRadius,
    pub source: ScalarField,
}

impl ProblemSpec {
    fn base(formulation: Formulation, dim: usize, kappa: ScalarField, beta: ScalarField) -> Self {
        let (interior, exterior) = if dim == 1 {
            (
                BoxDomain::new([-1.0, 0.0], [1.0, 0.0]),
                BoxDomain::new([-2.0, 0.0], [2.0, 0.0]),
            )
        } else {
            (
                BoxDomain::new([-1.0, -1.0], [1.0, 1.0]),
                BoxDomain::new([-2.0, -2.0], [2.0, 2.0]),
            )
        };
        Self {
            formulation,
            dim,
            interior,
            exterior,
            kappa,
            beta,
            window: WindowRadius::CellMultiple(4.0),
            source: ScalarField::constant(1.0),
        }
    }

    /// 1D, `κ = 1 + bump(x; 0.5, 1.0)`, `β = 0.75`.
    pub fn kappa_1d() -> Self {
        Self::base(
            Formulation::SymmetricVariableKappa,
            1,
            ScalarField::bump_1d(1.0, 1.0, 0.5, 1.0),
            ScalarField::constant(0.75),
        )
    }

    /// 1D, `β = 0.7 + 0.1x`, `κ = 1`.
    pub fn beta_1d() -> Self {
        Self::base(
            Formulation::SymmetricVariableBeta,
            1,
            ScalarField::constant(1.0),
            ScalarField::linear_x(0.7, 0.1),
        )
    }

    /// 1D non-symmetric flux form, `β = β₀ + 0.1x`, `κ = 1`.
    pub fn nonsym_1d(beta0: f64) -> Self {
        Self::base(
            Formulation::NonsymmetricVariableBeta,
            1,
            ScalarField::constant(1.0),
            ScalarField::linear_x(beta0, 0.1),
        )
    }

    /// 2D, `κ = 1 + 2.5·bump₂(c₁) + 2.5·bump₂(c₂)`, constant `β`.
    pub fn kappa_2d(beta: f64) -> Self {
        let kappa = ScalarField::bump_2d_sum(
            1.0,
            vec![
                (2.5, [0.2, 0.25], [1.4, 1.4], PI / 4.0),
                (2.5, [-0.1, -0.2], [1.4, 1.8], -PI / 10.0),
            ],
        );
        Self::base(
            Formulation::SymmetricVariableKappa,
            2,
            kappa,
            ScalarField::constant(beta),
        )
    }

    /// 2D, `β = 0.8 − 0.2·bump₂(x; 0, [2, 2], 0)`, `κ = 1`.
    pub fn beta_2d() -> Self {
        let beta = ScalarField::bump_2d_sum(0.8, vec![(-0.2, [0.0, 0.0], [2.0, 2.0], 0.0)]);
        Self::base(
            Formulation::SymmetricVariableBeta,
            2,
            ScalarField::constant(1.0),
            beta,
        )
    }

    pub fn with_window(mut self, window: WindowRadius) -> Self {
        self.window = window;
        self
    }

    pub fn with_source(mut self, source: ScalarField) -> Self {
        self.source = source;
        self
    }

    /// Geometric consistency checks that do not depend on a grid.
    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::Config(format!("dimension {} not in {{1, 2}}", self.dim)));
        }
        for d in 0..self.dim {
            if !(self.exterior.lo[d] < self.interior.lo[d]
                && self.interior.lo[d] < self.interior.hi[d]
                && self.interior.hi[d] < self.exterior.hi[d])
            {
                return Err(Error::Config(
                    "interior box must lie strictly inside the exterior box".into(),
                ));
            }
        }
        if self.formulation == Formulation::NonsymmetricVariableBeta && self.dim != 1 {
            return Err(Error::Unsupported(
                "the non-symmetric formulation is implemented in 1D only".into(),
            ));
        }
        Ok(())
    }

    /// Distance from Ω to the outer boundary of Ω ∪ Ω₀.
    pub fn exterior_margin(&self) -> f64 {
        (0..self.dim)
            .map(|d| {
                (self.interior.lo[d] - self.exterior.lo[d])
                    .min(self.exterior.hi[d] - self.interior.hi[d])
            })
            .fold(f64::INFINITY, f64::min)
    }

    pub fn check_window(&self, window: WindowSpec) -> Result<()> {
        if !(window.delta > 0.0) {
            return Err(Error::Config(format!("window radius {} must be positive", window.delta)));
        }
        if window.delta > self.exterior_margin() + 1e-12 {
            return Err(Error::Config(format!(
                "window radius {} exceeds the exterior margin {}",
                window.delta,
                self.exterior_margin()
            )));
        }
        Ok(())
    }

    /// κ at `p`, checked for positivity.
    pub fn kappa_checked(&self, p: Point) -> Result<f64> {
        let k = self.kappa.value(p);
        if k > 0.0 && k.is_finite() {
            Ok(k)
        } else {
            Err(Error::FieldBounds { what: "kappa", x: p[0], y: p[1], value: k })
        }
    }

    /// β at `p`, checked to lie in (0, 1).
    pub fn beta_checked(&self, p: Point) -> Result<f64> {
        let b = self.beta.value(p);
        if b > 0.0 && b < 1.0 {
            Ok(b)
        } else {
            Err(Error::FieldBounds { what: "beta", x: p[0], y: p[1], value: b })
        }
    }
}

/// Euclidean distance using the first `dim` coordinates.
#[inline]
pub fn distance(x: Point, y: Point, dim: usize) -> f64 {
    if dim == 1 {
        (y[0] - x[0]).abs()
    } else {
        (y[0] - x[0]).hypot(y[1] - x[1])
    }
}

/// Symmetric kernel `√(κ(x)κ(y)) / |y − x|^{n + β(x) + β(y)}`.
pub fn gamma_sym(x: Point, y: Point, spec: &ProblemSpec) -> Result<f64> {
    let r = distance(x, y, spec.dim);
    if r == 0.0 {
        return Err(Error::Domain("kernel evaluated at coincident points".into()));
    }
    let c = (spec.kappa_checked(x)? * spec.kappa_checked(y)?).sqrt();
    let p = spec.dim as f64 + (spec.beta_checked(x)? + spec.beta_checked(y)?);
    Ok(c * r.powf(-p))
}

/// Scaling of the fractional gradient, `2^β Γ((n+β+1)/2) / (π^{n/2} Γ((1−β)/2))`.
pub fn omega(beta: f64, dim: usize) -> Result<f64> {
    if !(beta > 0.0 && beta < 1.0) {
        return Err(Error::Domain(format!("beta = {beta} outside (0, 1)")));
    }
    let n = dim as f64;
    Ok(2f64.powf(beta) * gamma(0.5 * (n + beta + 1.0))
        / (PI.powf(0.5 * n) * gamma(0.5 * (1.0 - beta))))
}

/// [`omega`] evaluated with `β = β(x)` from the problem.
pub fn omega_at(x: Point, spec: &ProblemSpec) -> Result<f64> {
    omega(spec.beta.value(x), spec.dim)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn window_values() {
        assert_eq!(window(0.0, 0.1), 1.0);
        assert!(window(0.1, 0.1).abs() < 1e-15);
        assert!((window(0.05, 0.1) - 0.5).abs() < 1e-15);
        assert_eq!(window(0.2, 0.1), 0.0);
    }

    #[test]
    fn window_vanishes_smoothly_at_radius() {
        // first three one-sided derivatives at r = δ vanish: check by
        // finite differences of decreasing step.
        let d = 1.0;
        let fd = |k: i32, h: f64| match k {
            1 => (window(d, d) - window(d - h, d)) / h,
            2 => (window(d, d) - 2.0 * window(d - h, d) + window(d - 2.0 * h, d)) / (h * h),
            _ => {
                (window(d, d) - 3.0 * window(d - h, d) + 3.0 * window(d - 2.0 * h, d)
                    - window(d - 3.0 * h, d))
                    / (h * h * h)
            }
        };
        for k in 1..=3 {
            // w ~ 35(1 − r/δ)⁴ near δ, so the k-th backward difference is O(h^{4−k})
            let (a, b) = (fd(k, 1e-2), fd(k, 5e-3));
            let ratio = a / b;
            let expect = 2f64.powi(4 - k);
            assert!((ratio / expect - 1.0).abs() < 0.1, "derivative {k}: ratio {ratio}");
            assert!(b.abs() < 2e3 * 5e-3f64.powi(4 - k), "derivative {k}: {b}");
        }
    }

    #[test]
    fn window_is_flat_at_origin() {
        // |w(r) − 1| ≤ K r⁴ with K = 35/δ⁴ (leading coefficient)
        let d = 0.3;
        for i in 1..100 {
            let r = d * i as f64 / 1000.0;
            let k = 35.0 / d.powi(4);
            assert!((window(r, d) - 1.0).abs() <= k * r.powi(4) * (1.0 + 1e-9));
        }
    }

    #[test]
    fn bump_profiles() {
        assert!((bump_1d(0.5, 0.5, 1.0) - (-1f64).exp()).abs() < 1e-15);
        assert_eq!(bump_1d(1.0, 0.5, 1.0), 0.0);
        assert!((bump_1d(0.75, 0.5, 1.0) - (-4.0f64 / 3.0).exp()).abs() < 1e-15);
        assert!((bump_1d(0.75, 0.5, 1.0) - 0.263_597_1).abs() < 1e-7);

        let c = [0.2, -0.3];
        assert!((bump_2d(c, c, [0.7, 1.9], 0.4) - (-2f64).exp()).abs() < 1e-15);
        assert_eq!(bump_2d([c[0] + 0.5, c[1]], c, [1.0, 1.0], 0.0), 0.0);

        // rotated evaluation equals unrotated evaluation at the inverse-rotated point
        let l = [0.8, 0.5];
        let th = PI / 4.0;
        let off = rotate([0.1, 0.0], -th);
        let a = bump_2d([c[0] + 0.1, c[1]], c, l, th);
        let b = bump_2d([c[0] + off[0], c[1] + off[1]], c, l, 0.0);
        assert!((a - b).abs() < 1e-15);
    }

    #[test]
    fn gradients_match_central_differences() {
        let field = ProblemSpec::kappa_2d(0.75).kappa;
        let p = [0.13, 0.31];
        let exact = field.gradient(p, 2, 0.0);
        let mut prev = f64::INFINITY;
        for k in 0..4 {
            let h = 0.02 / 2f64.powi(k);
            let mut fd = [0.0; 2];
            for d in 0..2 {
                let mut a = p;
                let mut b = p;
                a[d] += h;
                b[d] -= h;
                fd[d] = (field.value(a) - field.value(b)) / (2.0 * h);
            }
            let err = (fd[0] - exact[0]).hypot(fd[1] - exact[1]);
            if k > 0 {
                // O(h²): halving h cuts the error by ~4
                assert!(err < prev / 3.0, "step {k}: {err} vs {prev}");
            }
            prev = err;
        }
    }

    #[test]
    fn kernel_values() {
        let mut s = ProblemSpec::beta_1d();
        s.beta = ScalarField::constant(0.75);
        let g = gamma_sym([0.0, 0.0], [0.5, 0.0], &s).unwrap();
        assert!((g - 0.5f64.powf(-2.5)).abs() < 1e-12);
        assert!((g - 5.656_854_2).abs() < 1e-6);

        s.kappa = ScalarField::custom(|p| if p[0] < 0.5 { 4.0 } else { 9.0 });
        s.beta = ScalarField::constant(0.5);
        assert!((gamma_sym([0.0, 0.0], [1.0, 0.0], &s).unwrap() - 6.0).abs() < 1e-14);

        assert!(gamma_sym([0.3, 0.0], [0.3, 0.0], &s).is_err());
    }

    #[test]
    fn kernel_swap_symmetry() {
        use rand::{Rng, SeedableRng};
        let s = ProblemSpec::kappa_2d(0.6);
        let mut sb = ProblemSpec::beta_2d();
        sb.kappa = s.kappa.clone();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..10_000 {
            let x = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let y = [rng.random_range(-2.0..2.0), rng.random_range(-2.0..2.0)];
            let a = gamma_sym(x, y, &sb).unwrap();
            let b = gamma_sym(y, x, &sb).unwrap();
            assert!((a - b).abs() <= 1e-15 * a.abs());
        }
    }

    #[test]
    fn omega_values() {
        let w1 = omega(0.5, 1).unwrap();
        let oracle1 = 2f64.sqrt() * 0.906_402_477_055_477 / (PI.sqrt() * 3.625_609_908_221_908_3);
        assert!((w1 - oracle1).abs() < 1e-13);
        assert!((w1 - 0.19947).abs() < 1e-5);
        let w2 = omega(0.5, 2).unwrap();
        let oracle2 = 2f64.sqrt() * 0.919_062_526_848_882_9 / (PI * 3.625_609_908_221_908_3);
        assert!((w2 - oracle2).abs() < 1e-13);
        assert!((w2 - 0.11411).abs() < 1e-5);
        assert!(omega(1.0 - 1e-9, 1).unwrap() < 1e-8);
        assert!(omega(1.0, 1).is_err());
        assert!(omega(0.0, 1).is_err());
    }

    #[test]
    fn preset_fields_respect_bounds() {
        let specs = [
            ProblemSpec::kappa_1d(),
            ProblemSpec::beta_1d(),
            ProblemSpec::nonsym_1d(0.7),
            ProblemSpec::kappa_2d(0.75),
            ProblemSpec::beta_2d(),
        ];
        for s in &specs {
            s.validate().unwrap();
            let n = 81;
            for i in 0..n {
                for j in 0..(if s.dim == 1 { 1 } else { n }) {
                    let p = [
                        -2.0 + 4.0 * i as f64 / (n - 1) as f64,
                        if s.dim == 1 { 0.0 } else { -2.0 + 4.0 * j as f64 / (n - 1) as f64 },
                    ];
                    assert!(s.kappa_checked(p).unwrap() >= 1.0 - 1e-15);
                    s.beta_checked(p).unwrap();
                }
            }
        }
    }
}
