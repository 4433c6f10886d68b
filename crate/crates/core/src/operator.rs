//! Eigenfunctions, resolvent and rank-one spectral projections of the
//! generator `L`, inner products in `L^2(mu)`, and a finite-difference
//! applier of `L` used to validate them.
//!
//! Functions on `E = R x {+1, -1}` are represented as `[f(x, +1), f(x, -1)]`.

use alloc::vec::Vec;
use core::cell::{Cell, OnceCell};

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::charfn::{saddle, Branch, CharFunctionHandle};
use crate::error::{Error, Result};
use crate::potential::{switching_rate, Direction, PotentialModel, SwitchingRateSpec, Velocity};
use crate::quadrature::{integrate_oscillatory, integrate_semiinfinite, DecayProfile, Estimate, QuadratureConfig};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Half the number of grid intervals of a default [`GridFunction`].
pub const GRID_HALF: usize = 2048;

/// `e^{-U}` is below this at the edge of a default grid.
pub const GRID_TAIL: f64 = 1e-14;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OperatorConfig {
    /// Inner integrals: `psi` and eigenfunction tails.
    pub quadrature: QuadratureConfig,
    /// Outer integrals over `x` in inner products.
    pub outer: QuadratureConfig,
    /// `|Z(gamma)|` at or below which `gamma` counts as an eigenvalue.
    pub root_tol: f64,
    /// `|Z'(gamma)|` above which an eigenvalue counts as simple.
    pub simple_tol: f64,
}

impl Default for OperatorConfig {
    fn default() -> Self {
        Self {
            quadrature: QuadratureConfig::with_tolerances(1e-12, 1e-14),
            outer: QuadratureConfig::with_tolerances(1e-10, 1e-13),
            root_tol: 1e-8,
            simple_tol: 1e-8,
        }
    }
}

/// A function on `E`, evaluated as `[f(x, +1), f(x, -1)]`.
pub trait Evaluable {
    fn eval(&self, x: f64) -> Result<[C; 2]>;

    /// Rate `a` with `|f(x)| = O(e^{a |x|})`, used to truncate integrals.
    fn growth(&self) -> f64 {
        0.0
    }

    /// Oscillation frequency in `x`, used to size quadrature panels.
    fn frequency(&self) -> f64 {
        0.0
    }
}

impl<F: Fn(f64) -> [C; 2]> Evaluable for F {
    fn eval(&self, x: f64) -> Result<[C; 2]> {
        Ok(self(x))
    }
}

/// Which eigenfunction: `f_gamma` on `E`, or `f+-_gamma` on `R` for the
/// branches of a symmetric potential.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Full,
    Plus,
    Minus,
}

impl Variant {
    pub fn branch(self) -> Branch {
        match self {
            Variant::Full => Branch::Full,
            Variant::Plus => Branch::Plus,
            Variant::Minus => Branch::Minus,
        }
    }

    pub fn from_branch(branch: Branch) -> Self {
        match branch {
            Branch::Full => Variant::Full,
            Branch::Plus => Variant::Plus,
            Branch::Minus => Variant::Minus,
        }
    }

    fn sign(self) -> f64 {
        if self == Variant::Minus {
            -1.0
        } else {
            1.0
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Side {
    Plus,
    Minus,
}

/// `u(eta) = U(eta)` on the plus side and `U(-eta)` on the minus side.
fn side_value(model: &PotentialModel, side: Side, eta: f64) -> f64 {
    match side {
        Side::Plus => model.value(eta),
        Side::Minus => model.value(-eta),
    }
}

/// Eigenfunction of `L` (or of `L+-`) at an eigenvalue, in closed form up
/// to one tail integral per evaluation point.
#[derive(Clone, Debug)]
pub struct PiecewiseEigenfunction {
    gamma: C,
    model: PotentialModel,
    variant: Variant,
    psi_plus: C,
    psi_minus: C,
    /// Bend point of the tail contour, for analytic (even) potentials with `Re gamma < 0`.
    bend: Option<C>,
    cfg: OperatorConfig,
    magnitude: OnceCell<f64>,
}

/// Checks that `gamma` is a root of the branch function and builds its eigenfunction.
pub fn eigenfunction(
    model: &PotentialModel,
    gamma: C,
    variant: Variant,
    cfg: &OperatorConfig,
) -> Result<PiecewiseEigenfunction> {
    let handle = CharFunctionHandle::new(model.clone(), variant.branch(), cfg.quadrature)?;
    let z = handle.eval(gamma)?;
    if z.value.norm() > cfg.root_tol {
        return Err(Error::NotAnEigenvalue { gamma, residual: z.value.norm() });
    }
    let (p, m) = handle.psi_pair(gamma)?;
    let bend = if gamma.re < 0.0 && model.is_analytic() { saddle(model, gamma) } else { None };
    Ok(PiecewiseEigenfunction {
        gamma,
        model: model.clone(),
        variant,
        psi_plus: p.value,
        psi_minus: m.value,
        bend,
        cfg: *cfg,
        magnitude: OnceCell::new(),
    })
}

impl PiecewiseEigenfunction {
    pub fn gamma(&self) -> C {
        self.gamma
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn psi_plus(&self) -> C {
        self.psi_plus
    }

    pub fn psi_minus(&self) -> C {
        self.psi_minus
    }

    /// `e^{gamma y + u(y)} int_y^inf u'(xi) e^{-2 gamma xi - u(xi)} dxi` for `y >= 0`,
    /// integrated by parts and shifted so no factor `e^{u(y)}` is formed:
    /// `e^{-gamma y} (1 - 2 gamma int_0^inf e^{-2 gamma s - (u(y+s) - u(y))} ds)`.
    fn tail(&self, side: Side, y: f64) -> Result<C> {
        let g = self.gamma;
        let model = &self.model;
        if let Some(Ok(i)) = self.bend.filter(|p| p.re > y).map(|p| self.bent_tail(p, y)) {
            return Ok((-g * y).exp() * (1.0 - 2.0 * g * i));
        }
        let uy = side_value(model, side, y);
        let profile = DecayProfile::new(
            move |s: f64| -2.0 * g.re * s - (side_value(model, side, y + s) - uy),
            2.0 * g.im,
            Direction::Positive,
        );
        let est = integrate_semiinfinite(
            |s: f64| (-2.0 * g * s - (side_value(model, side, y + s) - uy)).exp(),
            0.0,
            &profile,
            &self.cfg.quadrature,
        )?;
        Ok((-g * y).exp() * (1.0 - 2.0 * g * est.value))
    }

    /// The tail integral along `y -> p -> p + inf`. On the real axis the
    /// integrand peaks near `Re p` and cancels by oscillation; through the
    /// saddle it does not. Analytic potentials are even, so one contour
    /// serves both sides.
    fn bent_tail(&self, p: C, y: f64) -> Result<C> {
        let g = self.gamma;
        let model = &self.model;
        let uy = model.value(y);
        let nan = C::new(f64::NAN, 0.0);
        let exponent = move |z: C| -2.0 * g * (z - y) - (model.value_complex(z).unwrap_or(nan) - uy);
        let d = p - y;
        let omega = (2.0 * g * d).norm() + (d * model.slope_complex(p).unwrap_or(nan)).norm();
        let seg = integrate_oscillatory(|s: f64| exponent(y + d * s).exp() * d, 0.0, 1.0, omega, &self.cfg.quadrature)?;
        let profile = DecayProfile::new(move |t: f64| exponent(p + t).re, 2.0 * g.im, Direction::Positive);
        let ray = integrate_semiinfinite(|t: f64| exponent(p + t).exp(), 0.0, &profile, &self.cfg.quadrature)?;
        Ok(seg.value + ray.value)
    }

    /// The branch eigenfunction `f+-_gamma(x)` on `R`.
    pub fn scalar(&self, x: f64) -> Result<C> {
        if self.variant == Variant::Full {
            return Err(Error::Domain { what: "scalar eigenfunction of the full generator", value: x });
        }
        if x <= 0.0 {
            Ok((self.gamma * x).exp())
        } else {
            Ok(self.variant.sign() * self.tail(Side::Plus, x)?)
        }
    }

    /// `<f, F conj f>` in `L^2(mu)` for the full variant, and
    /// `<f, J conj f>` in `L^2(nu)` for the branch variants.
    pub fn flip_norm(&self) -> Result<C> {
        let cfg = self.bilinear_config()?;
        match self.variant {
            Variant::Full => flip_form(self, self, &self.model, &cfg).map(|e| e.value),
            _ => self.line_integral(&cfg, |f, x| Ok(f.scalar(x)? * f.scalar(-x)?)),
        }
    }

    /// `<f, conj f>` in `L^2(mu)` for the full variant, in `L^2(nu)` otherwise.
    pub fn square_norm(&self) -> Result<C> {
        let cfg = self.bilinear_config()?;
        match self.variant {
            Variant::Full => self.line_integral(&cfg, |f, x| {
                let [a, b] = f.eval(x)?;
                Ok(a * a + b * b)
            }),
            _ => self.line_integral(&cfg, |f, x| {
                let v = f.scalar(x)?;
                Ok(v * v)
            }),
        }
    }

    /// `||f||^2` (in the space of [`Self::square_norm`]), to about six digits.
    pub fn magnitude(&self) -> Result<f64> {
        if let Some(m) = self.magnitude.get() {
            return Ok(*m);
        }
        let loose = QuadratureConfig::with_tolerances(1e-6, f64::MIN_POSITIVE);
        let m = match self.variant {
            Variant::Full => self.line_integral(&loose, |f, x| {
                let [a, b] = f.eval(x)?;
                Ok(C::new(a.norm_sqr() + b.norm_sqr(), 0.0))
            }),
            _ => self.line_integral(&loose, |f, x| Ok(C::new(f.scalar(x)?.norm_sqr(), 0.0))),
        }?
        .re;
        Ok(*self.magnitude.get_or_init(|| m))
    }

    /// `||f||^2 / |<f, F conj f>|`: the factor by which the bilinear forms
    /// cancel, and so the loss of relative accuracy in them.
    pub fn condition(&self) -> Result<f64> {
        Ok(self.magnitude()? / self.flip_norm()?.norm())
    }

    /// Outer tolerance for the bilinear forms, with the absolute part raised
    /// to the rounding floor set by `||f||^2`.
    fn bilinear_config(&self) -> Result<QuadratureConfig> {
        let mut cfg = self.cfg.outer;
        cfg.abs_tol = cfg.abs_tol.max(1e-13 * self.magnitude()?);
        Ok(cfg)
    }

    fn line_integral(&self, cfg: &QuadratureConfig, mut g: impl FnMut(&Self, f64) -> Result<C>) -> Result<C> {
        let est = integrate_line(&self.model, 2.0 * self.growth(), 2.0 * self.frequency(), cfg, |x| g(self, x))?;
        Ok(est.value)
    }
}

impl Evaluable for PiecewiseEigenfunction {
    /// Branch variants are lifted to `E` as `[f(x), +-f(-x)]`, an
    /// eigenfunction of `L` for the same eigenvalue.
    fn eval(&self, x: f64) -> Result<[C; 2]> {
        let g = self.gamma;
        match self.variant {
            Variant::Full => {
                if x < 0.0 {
                    Ok([self.psi_plus * (g * x).exp(), self.psi_plus * self.tail(Side::Minus, -x)?])
                } else {
                    Ok([self.tail(Side::Plus, x)?, (-g * x).exp()])
                }
            }
            v => Ok([self.scalar(x)?, v.sign() * self.scalar(-x)?]),
        }
    }

    fn growth(&self) -> f64 {
        self.gamma.re.abs()
    }

    fn frequency(&self) -> f64 {
        self.gamma.im.abs()
    }
}

/// `int_R g(x) e^{-U(x)} dx` where `|g| = O(e^{growth |x|})`.
fn integrate_line(
    model: &PotentialModel,
    growth: f64,
    omega: f64,
    cfg: &QuadratureConfig,
    mut g: impl FnMut(f64) -> Result<C>,
) -> Result<Estimate<C>> {
    let mut total = Estimate { value: ZERO, error: 0.0, evaluations: 0, exhausted: false };
    for dir in [Direction::Positive, Direction::Negative] {
        let failure = Cell::new(None);
        let profile =
            DecayProfile::new(|x: f64| -model.value(x) + growth * x.abs() + 2.0 * x.abs().ln_1p(), omega, dir);
        let est = integrate_semiinfinite(
            |x: f64| match g(x) {
                Ok(v) => v * (-model.value(x)).exp(),
                Err(e) => {
                    let first = failure.take().unwrap_or(e);
                    failure.set(Some(first));
                    ZERO
                }
            },
            0.0,
            &profile,
            cfg,
        )?;
        if let Some(e) = failure.take() {
            return Err(e);
        }
        total.value += est.value;
        total.error += est.error;
        total.evaluations += est.evaluations;
        total.exhausted |= est.exhausted;
    }
    Ok(total)
}

/// `<f, g> = sum_theta int f(x, theta) conj(g(x, theta)) e^{-U(x)} dx`.
pub fn inner_product_mu(
    f: &impl Evaluable,
    g: &impl Evaluable,
    model: &PotentialModel,
    cfg: &QuadratureConfig,
) -> Result<Estimate<C>> {
    integrate_line(model, f.growth() + g.growth(), f.frequency() + g.frequency(), cfg, |x| {
        let [a, b] = f.eval(x)?;
        let [c, d] = g.eval(x)?;
        Ok(a * c.conj() + b * d.conj())
    })
}

/// `<f, F conj g> = sum_theta int f(x, theta) g(x, -theta) e^{-U(x)} dx`.
pub fn flip_form(
    f: &impl Evaluable,
    g: &impl Evaluable,
    model: &PotentialModel,
    cfg: &QuadratureConfig,
) -> Result<Estimate<C>> {
    integrate_line(model, f.growth() + g.growth(), f.frequency() + g.frequency(), cfg, |x| {
        let [a, b] = f.eval(x)?;
        let [c, d] = g.eval(x)?;
        Ok(a * d + b * c)
    })
}

/// `L f (x, theta)` with the derivative taken by central differences.
pub fn apply_generator(
    model: &PotentialModel,
    spec: &SwitchingRateSpec,
    f: &impl Evaluable,
    x: f64,
    theta: Velocity,
    fd_step: f64,
) -> Result<C> {
    let (own, other) = match theta {
        Velocity::Plus => (0, 1),
        Velocity::Minus => (1, 0),
    };
    let right = f.eval(x + fd_step)?;
    let left = f.eval(x - fd_step)?;
    let here = f.eval(x)?;
    let derivative = (right[own] - left[own]) / (2.0 * fd_step);
    let rate = switching_rate(model, spec, x, theta);
    Ok(theta.sign() * derivative + rate * (here[other] - here[own]))
}

/// Samples of a function on `E` on the symmetric grid `x_i = (i - half) step`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    half: usize,
    step: f64,
    plus: Vec<C>,
    minus: Vec<C>,
}

impl GridFunction {
    /// Radius `R` with `e^{-U(+-R)} < GRID_TAIL`.
    pub fn default_radius(model: &PotentialModel) -> f64 {
        model.radius_above(-GRID_TAIL.ln())
    }

    /// Zero function on the grid of radius `radius` with `2 half` intervals.
    pub fn zeros(radius: f64, half: usize) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::Domain { what: "grid radius", value: radius });
        }
        if half < 4 || !half.is_multiple_of(2) {
            return Err(Error::Domain { what: "grid half size (even, at least 4)", value: half as f64 });
        }
        let n = 2 * half + 1;
        Ok(Self { half, step: radius / half as f64, plus: alloc::vec![ZERO; n], minus: alloc::vec![ZERO; n] })
    }

    /// Zero function on the default grid for `model`.
    pub fn for_potential(model: &PotentialModel) -> Self {
        Self::zeros(Self::default_radius(model), GRID_HALF).expect("default grid is valid")
    }

    /// Same grid as `self`, values from `f`.
    pub fn sample(&self, f: &impl Evaluable) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..self.len() {
            let [a, b] = f.eval(self.x(i))?;
            out.plus[i] = a;
            out.minus[i] = b;
        }
        Ok(out)
    }

    pub fn from_fn(&self, f: impl Fn(f64) -> [C; 2]) -> Self {
        self.sample(&f).expect("infallible closure")
    }

    pub fn len(&self) -> usize {
        self.plus.len()
    }

    pub fn is_empty(&self) -> bool {
        self.plus.is_empty()
    }

    pub fn half(&self) -> usize {
        self.half
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn radius(&self) -> f64 {
        self.step * self.half as f64
    }

    pub fn x(&self, i: usize) -> f64 {
        (i as f64 - self.half as f64) * self.step
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.x(i)).collect()
    }

    pub fn values(&self, theta: Velocity) -> &[C] {
        match theta {
            Velocity::Plus => &self.plus,
            Velocity::Minus => &self.minus,
        }
    }

    pub fn values_mut(&mut self, theta: Velocity) -> &mut [C] {
        match theta {
            Velocity::Plus => &mut self.plus,
            Velocity::Minus => &mut self.minus,
        }
    }

    pub fn at(&self, i: usize) -> [C; 2] {
        [self.plus[i], self.minus[i]]
    }

    pub fn same_grid(&self, other: &Self) -> bool {
        self.half == other.half && self.step == other.step
    }

    pub fn scale(&self, c: C) -> Self {
        let mut out = self.clone();
        out.plus.iter_mut().chain(out.minus.iter_mut()).for_each(|v| *v *= c);
        out
    }

    /// Pointwise `self - other`.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_grid(other)?;
        let mut out = self.clone();
        for i in 0..self.len() {
            out.plus[i] -= other.plus[i];
            out.minus[i] -= other.minus[i];
        }
        Ok(out)
    }

    fn check_grid(&self, other: &Self) -> Result<()> {
        if self.same_grid(other) {
            Ok(())
        } else {
            Err(Error::Domain { what: "grid functions on different grids", value: other.step })
        }
    }

    /// Composite Simpson rule for `int_{-R}^{R} g(x_i) e^{-U(x_i)}`.
    fn simpson(&self, model: &PotentialModel, g: impl Fn(usize) -> C) -> C {
        let n = self.len();
        let mut acc = ZERO;
        for i in 0..n {
            let w = if i == 0 || i == n - 1 {
                1.0
            } else if i % 2 == 1 {
                4.0
            } else {
                2.0
            };
            acc += w * (-model.value(self.x(i))).exp() * g(i);
        }
        acc * (self.step / 3.0)
    }

    /// `<self, other>` in `L^2(mu)` on the grid.
    pub fn inner_product(&self, other: &Self, model: &PotentialModel) -> Result<C> {
        self.check_grid(other)?;
        Ok(self.simpson(model, |i| self.plus[i] * other.plus[i].conj() + self.minus[i] * other.minus[i].conj()))
    }

    /// `<self, F conj other>` in `L^2(mu)` on the grid.
    pub fn flip_form(&self, other: &Self, model: &PotentialModel) -> Result<C> {
        self.check_grid(other)?;
        Ok(self.simpson(model, |i| self.plus[i] * other.minus[i] + self.minus[i] * other.plus[i]))
    }

    /// Norm in `L^2(mu)` on the grid.
    pub fn norm(&self, model: &PotentialModel) -> f64 {
        self.simpson(model, |i| C::new(self.plus[i].norm_sqr() + self.minus[i].norm_sqr(), 0.0)).re.sqrt()
    }
}

/// `int_{x_i}^{x_{i+1}} v` from the four samples around the interval,
/// with one-sided stencils at the ends of `0..n`.
fn interval_rule(v: impl Fn(usize) -> C, i: usize, n: usize, h: f64) -> C {
    let s = if i == 0 {
        9.0 * v(0) + 19.0 * v(1) - 5.0 * v(2) + v(3)
    } else if i + 2 >= n {
        v(n - 4) - 5.0 * v(n - 3) + 19.0 * v(n - 2) + 9.0 * v(n - 1)
    } else {
        -v(i - 1) + 13.0 * v(i) + 13.0 * v(i + 1) - v(i + 2)
    };
    s * (h / 24.0)
}

/// `out_i = int_{x_i}^{x_last} e^{phi_i - phi(xi)} g(xi) dxi`, accumulated
/// from the right so that only ratios of the exponential weight appear.
fn integrate_to_end(phi: &[C], g: &[C], h: f64) -> Vec<C> {
    let n = phi.len();
    let mut out = alloc::vec![ZERO; n];
    for i in (0..n - 1).rev() {
        let local = interval_rule(|j| (phi[i] - phi[j]).exp() * g[j], i, n, h);
        out[i] = (phi[i] - phi[i + 1]).exp() * out[i + 1] + local;
    }
    out
}

/// `out_i = int_{x_0}^{x_i} e^{phi_i - phi(xi)} g(xi) dxi`.
fn integrate_from_start(phi: &[C], g: &[C], h: f64) -> Vec<C> {
    let rev = |v: &[C]| v.iter().rev().copied().collect::<Vec<_>>();
    let mut out = integrate_to_end(&rev(phi), &rev(g), h);
    out.reverse();
    out
}

fn integrate_all(g: &[C], h: f64) -> C {
    let n = g.len();
    (0..n - 1).map(|i| interval_rule(|j| g[j], i, n, h)).sum()
}

/// Resolvent output with the integration constants and the mismatch at
/// `x = 0` between the left formula for `f+` and its tail form.
#[derive(Clone, Debug)]
pub struct ResolventSolution {
    pub f: GridFunction,
    pub k_plus: C,
    pub k_minus: C,
    pub continuity_gap: f64,
}

struct KParts {
    /// `int_x^0 e^{gamma (x - xi)} h+(xi) dxi` on `x <= 0`.
    q_plus: Vec<C>,
    /// `int_0^x e^{-gamma (x - xi)} h-(xi) dxi` on `x >= 0`.
    q_minus: Vec<C>,
    k: (C, C),
}

fn k_parts(model: &PotentialModel, gamma: C, h: &GridFunction, cfg: &OperatorConfig) -> Result<KParts> {
    let handle = CharFunctionHandle::new(model.clone(), Branch::Full, cfg.quadrature)?;
    let (p, m) = handle.psi_pair(gamma)?;
    let z = 1.0 - p.value * m.value;
    if z.norm() <= cfg.root_tol {
        return Err(Error::ResolventAtEigenvalue { gamma, residual: z.norm() });
    }
    let c = h.half;
    let step = h.step;
    let xs = h.points();
    let (neg, pos) = (&xs[..=c], &xs[c..]);

    let phi: Vec<C> = neg.iter().map(|&x| gamma * x).collect();
    let q_plus = integrate_to_end(&phi, &h.plus[..=c], step);
    let phi: Vec<C> = pos.iter().map(|&x| -gamma * x).collect();
    let q_minus = integrate_from_start(&phi, &h.minus[c..], step);

    let g: Vec<C> = pos
        .iter()
        .enumerate()
        .map(|(j, &x)| (-gamma * x - model.value(x)).exp() * (h.plus[c + j] + model.slope(x) * q_minus[j]))
        .collect();
    let k1 = integrate_all(&g, step);
    let g: Vec<C> = neg
        .iter()
        .enumerate()
        .map(|(j, &x)| (gamma * x - model.value(x)).exp() * (h.minus[j] - model.slope(x) * q_plus[j]))
        .collect();
    let k2 = integrate_all(&g, step);

    let k = ((k1 + p.value * k2) / z, (m.value * k1 + k2) / z);
    Ok(KParts { q_plus, q_minus, k })
}

/// `(k+, k-) = Z^{-1} [[1, psi+], [psi-, 1]] K(gamma) h`, with `K(gamma) h`
/// integrated on the grid of `h`.
pub fn k_coefficients(model: &PotentialModel, gamma: C, h: &GridFunction, cfg: &OperatorConfig) -> Result<(C, C)> {
    Ok(k_parts(model, gamma, h, cfg)?.k)
}

/// `(gamma - L)^{-1} h` on the grid of `h`.
pub fn resolvent_solution(
    model: &PotentialModel,
    gamma: C,
    h: &GridFunction,
    cfg: &OperatorConfig,
) -> Result<ResolventSolution> {
    let parts = k_parts(model, gamma, h, cfg)?;
    let (k_plus, k_minus) = parts.k;
    let c = h.half;
    let step = h.step;
    let xs = h.points();
    let mut f = h.scale(ZERO);

    for (j, &x) in xs[..=c].iter().enumerate() {
        f.plus[j] = (gamma * x).exp() * k_plus + parts.q_plus[j];
    }
    for (j, &x) in xs[c..].iter().enumerate() {
        f.minus[c + j] = (-gamma * x).exp() * k_minus + parts.q_minus[j];
    }

    // Growing sides in tail form: f+ on x >= 0, f- on x <= 0.
    let pos = &xs[c..];
    let phi: Vec<C> = pos.iter().map(|&x| gamma * x + model.value(x)).collect();
    let g: Vec<C> = pos.iter().enumerate().map(|(j, &x)| h.plus[c + j] + model.slope(x) * f.minus[c + j]).collect();
    let tail_plus = integrate_to_end(&phi, &g, step);
    let neg = &xs[..=c];
    let phi: Vec<C> = neg.iter().map(|&x| -gamma * x + model.value(x)).collect();
    let g: Vec<C> = neg.iter().enumerate().map(|(j, &x)| h.minus[j] - model.slope(x) * f.plus[j]).collect();
    let tail_minus = integrate_from_start(&phi, &g, step);

    let continuity_gap = (tail_plus[0] - k_plus).norm().max((tail_minus[c] - k_minus).norm());
    f.plus[c + 1..].copy_from_slice(&tail_plus[1..]);
    f.minus[..c].copy_from_slice(&tail_minus[..c]);
    Ok(ResolventSolution { f, k_plus, k_minus, continuity_gap })
}

pub fn apply_resolvent(
    model: &PotentialModel,
    gamma: C,
    h: &GridFunction,
    cfg: &OperatorConfig,
) -> Result<GridFunction> {
    resolvent_solution(model, gamma, h, cfg).map(|s| s.f)
}

/// `||(gamma - L) f - h|| / ||h||` on the grid, with the derivative from
/// fourth-order central differences. Points within `exclude` of `0` or of an
/// edge of the support of `h` are skipped.
pub fn resolvent_defect(
    model: &PotentialModel,
    gamma: C,
    h: &GridFunction,
    f: &GridFunction,
    exclude: f64,
) -> Result<f64> {
    h.check_grid(f)?;
    let n = h.len();
    let step = h.step;
    let mut edges = alloc::vec![0.0];
    for i in 1..n {
        for v in [&h.plus, &h.minus] {
            if (v[i] == ZERO) != (v[i - 1] == ZERO) {
                edges.push(0.5 * (h.x(i) + h.x(i - 1)));
            }
        }
    }
    let exclude = exclude.max(2.5 * step);
    let d = |v: &[C], i: usize| (v[i - 2] - 8.0 * v[i - 1] + 8.0 * v[i + 1] - v[i + 2]) / (12.0 * step);
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..n {
        let x = h.x(i);
        let w = (-model.value(x)).exp();
        den += w * (h.plus[i].norm_sqr() + h.minus[i].norm_sqr());
        if i < 2 || i + 2 >= n || edges.iter().any(|e| (x - e).abs() < exclude) {
            continue;
        }
        let du = model.slope(x);
        let (lp, lm) = (du.max(0.0), (-du).max(0.0));
        let rp = gamma * f.plus[i] - d(&f.plus, i) - lp * (f.minus[i] - f.plus[i]) - h.plus[i];
        let rm = gamma * f.minus[i] + d(&f.minus, i) - lm * (f.plus[i] - f.minus[i]) - h.minus[i];
        num += w * (rp.norm_sqr() + rm.norm_sqr());
    }
    if den == 0.0 {
        return Err(Error::Domain { what: "resolvent defect of a zero input", value: 0.0 });
    }
    Ok((num / den).sqrt())
}

/// Rank-one projection onto the eigenspace of a simple eigenvalue, using
/// the eigenfunction sampled on a fixed grid.
#[derive(Clone, Debug)]
pub struct SpectralProjector {
    eigenfunction: PiecewiseEigenfunction,
    sampled: GridFunction,
    normalization: C,
}

impl SpectralProjector {
    pub fn new(
        model: &PotentialModel,
        gamma: C,
        variant: Variant,
        grid: &GridFunction,
        cfg: &OperatorConfig,
    ) -> Result<Self> {
        let handle = CharFunctionHandle::new(model.clone(), variant.branch(), cfg.quadrature)?;
        let derivative = handle.z_derivative(gamma)?.norm();
        if derivative <= cfg.simple_tol {
            return Err(Error::NonSimpleEigenvalue { gamma, derivative });
        }
        let eigenfunction = eigenfunction(model, gamma, variant, cfg)?;
        let sampled = grid.sample(&eigenfunction)?;
        let normalization = sampled.flip_form(&sampled, model)?;
        Ok(Self { eigenfunction, sampled, normalization })
    }

    pub fn eigenfunction(&self) -> &PiecewiseEigenfunction {
        &self.eigenfunction
    }

    pub fn sampled(&self) -> &GridFunction {
        &self.sampled
    }

    /// `<h, F conj f> / <f, F conj f>`.
    pub fn coefficient(&self, h: &GridFunction) -> Result<C> {
        Ok(h.flip_form(&self.sampled, self.eigenfunction.model())? / self.normalization)
    }

    /// `P h` on the grid.
    pub fn apply(&self, h: &GridFunction) -> Result<GridFunction> {
        Ok(self.sampled.scale(self.coefficient(h)?))
    }
}

/// Coefficient of `P_gamma h` along `f_gamma`, and `f_gamma`.
pub fn spectral_projection(
    model: &PotentialModel,
    gamma: C,
    h: &GridFunction,
    cfg: &OperatorConfig,
) -> Result<(C, PiecewiseEigenfunction)> {
    let projector = SpectralProjector::new(model, gamma, Variant::Full, h, cfg)?;
    let c = projector.coefficient(h)?;
    Ok((c, projector.eigenfunction))
}

/// `Z'(gamma)` from the characteristic function, and the same quantity as
/// `psi-(gamma) <f, F conj f>` (full) or `<f+-, J conj f+->` (branches).
pub fn z_prime_consistency(model: &PotentialModel, gamma: C, variant: Variant, cfg: &OperatorConfig) -> Result<(C, C)> {
    let handle = CharFunctionHandle::new(model.clone(), variant.branch(), cfg.quadrature)?;
    let lhs = handle.z_derivative(gamma)?;
    let f = eigenfunction(model, gamma, variant, cfg)?;
    let pairing = f.flip_norm()?;
    let rhs = match variant {
        Variant::Full => f.psi_minus() * pairing,
        _ => pairing,
    };
    Ok((lhs, rhs))
}
