//! Globally adaptive Gauss-Kronrod (7, 15) quadrature for real, complex and
//! vector-valued integrands on finite and semi-infinite intervals.

use alloc::boxed::Box;
use alloc::collections::BinaryHeap;
use alloc::vec::Vec;
use core::cmp::Ordering;
use core::f64::consts::PI;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::potential::{Direction, PotentialModel};

const XGK: [f64; 8] = [
    0.991455371120812639206854697526329,
    0.949107912342758524526189684047851,
    0.864864423359769072789712788640926,
    0.741531185599394439863864773280788,
    0.586087235467691130294144845693013,
    0.405845151377397166906606412076961,
    0.207784955007898467600689403773245,
    0.0,
];

const WGK: [f64; 8] = [
    0.022935322010529224963732008058970,
    0.063092092629978553290700663189204,
    0.104790010322250183839876322541518,
    0.140653259715525918745189590510238,
    0.169004726639267902826583426598550,
    0.190350578064785409913256402421014,
    0.204432940075298892414161999234649,
    0.209482141084727828012999174891714,
];

// Gauss weights for XGK[1], XGK[3], XGK[5] and the centre.
const WG: [f64; 4] = [
    0.129484966168869693270611432679082,
    0.279705391489276667901467771423780,
    0.381830050505118944950369775488975,
    0.417959183673469387755102040816327,
];

/// Hard cap on panel count, independent of `max_depth`.
const MAX_PANELS: usize = 20_000;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct QuadratureConfig {
    pub rel_tol: f64,
    pub abs_tol: f64,
    pub max_depth: u32,
    /// Natural-log margin below the integrand's peak used for truncation.
    pub truncation_margin: f64,
}

impl Default for QuadratureConfig {
    fn default() -> Self {
        Self { rel_tol: 1e-10, abs_tol: 1e-12, max_depth: 60, truncation_margin: 40.0 }
    }
}

impl QuadratureConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rel_tol > 0.0) {
            return Err(Error::Domain { what: "relative tolerance", value: self.rel_tol });
        }
        if !(self.abs_tol > 0.0) {
            return Err(Error::Domain { what: "absolute tolerance", value: self.abs_tol });
        }
        if self.max_depth < 1 {
            return Err(Error::Domain { what: "maximum depth", value: 0.0 });
        }
        Ok(())
    }

    pub fn with_tolerances(rel_tol: f64, abs_tol: f64) -> Self {
        Self { rel_tol, abs_tol, ..Self::default() }
    }
}

/// Values that can be integrated: a real vector space with a norm.
pub trait QuadValue: Copy {
    fn zero() -> Self;
    /// `self += w * x`.
    fn axpy(&mut self, w: f64, x: &Self);
    fn norm(&self) -> f64;
    fn is_finite(&self) -> bool;

    fn distance(&self, other: &Self) -> f64 {
        let mut d = *self;
        d.axpy(-1.0, other);
        d.norm()
    }
}

impl QuadValue for f64 {
    fn zero() -> Self {
        0.0
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        *self += w * x;
    }
    fn norm(&self) -> f64 {
        self.abs()
    }
    fn is_finite(&self) -> bool {
        f64::is_finite(*self)
    }
}

impl QuadValue for Complex64 {
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        self.re += w * x.re;
        self.im += w * x.im;
    }
    fn norm(&self) -> f64 {
        self.re.hypot(self.im)
    }
    fn is_finite(&self) -> bool {
        self.re.is_finite() && self.im.is_finite()
    }
}

impl<T: QuadValue, const N: usize> QuadValue for [T; N] {
    fn zero() -> Self {
        [T::zero(); N]
    }
    fn axpy(&mut self, w: f64, x: &Self) {
        for (a, b) in self.iter_mut().zip(x) {
            a.axpy(w, b);
        }
    }
    fn norm(&self) -> f64 {
        self.iter().fold(0.0, |m, v| m.max(v.norm()))
    }
    fn is_finite(&self) -> bool {
        self.iter().all(|v| v.is_finite())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate<T> {
    pub value: T,
    pub error: f64,
    pub evaluations: usize,
    /// Some panel reached `max_depth` (or the panel cap) unresolved.
    pub exhausted: bool,
}

struct Panel<T> {
    a: f64,
    b: f64,
    value: T,
    error: f64,
    depth: u32,
}

impl<T> PartialEq for Panel<T> {
    fn eq(&self, other: &Self) -> bool {
        self.error.total_cmp(&other.error) == Ordering::Equal
    }
}
impl<T> Eq for Panel<T> {}
impl<T> PartialOrd for Panel<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl<T> Ord for Panel<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.error.total_cmp(&other.error)
    }
}

fn gk15<T: QuadValue, F: FnMut(f64) -> T>(f: &mut F, a: f64, b: f64) -> Result<(T, f64)> {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let mut kron = T::zero();
    let mut gauss = T::zero();
    let mut sample = |x: f64| -> Result<T> {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(Error::NonFiniteIntegrand { at: x })
        }
    };
    let fc = sample(c)?;
    kron.axpy(WGK[7], &fc);
    gauss.axpy(WG[3], &fc);
    for i in 0..7 {
        let dx = h * XGK[i];
        let f1 = sample(c - dx)?;
        let f2 = sample(c + dx)?;
        kron.axpy(WGK[i], &f1);
        kron.axpy(WGK[i], &f2);
        if i % 2 == 1 {
            gauss.axpy(WG[i / 2], &f1);
            gauss.axpy(WG[i / 2], &f2);
        }
    }
    let mut value = T::zero();
    value.axpy(h, &kron);
    let mut g = T::zero();
    g.axpy(h, &gauss);
    let err = value.distance(&g);
    Ok((value, err))
}

/// `int f` over `[breaks[0], breaks[last]]`, starting from the given panels.
fn adaptive<T: QuadValue, F: FnMut(f64) -> T>(mut f: F, breaks: &[f64], cfg: &QuadratureConfig) -> Result<Estimate<T>> {
    cfg.validate()?;
    let mut heap = BinaryHeap::new();
    let mut evaluations = 0;
    let mut total = T::zero();
    let mut total_err = 0.0;
    for w in breaks.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let (value, error) = gk15(&mut f, a, b)?;
        evaluations += 15;
        total.axpy(1.0, &value);
        total_err += error;
        heap.push(Panel { a, b, value, error, depth: 0 });
    }
    let mut frozen: Vec<Panel<T>> = Vec::new();
    let mut exhausted = false;
    loop {
        let tol = cfg.abs_tol.max(cfg.rel_tol * total.norm());
        if total_err <= tol {
            break;
        }
        let Some(worst) = heap.pop() else { break };
        let mid = 0.5 * (worst.a + worst.b);
        if worst.depth >= cfg.max_depth || heap.len() + frozen.len() >= MAX_PANELS || !(worst.a < mid && mid < worst.b)
        {
            exhausted = true;
            frozen.push(worst);
            continue;
        }
        let (v1, e1) = gk15(&mut f, worst.a, mid)?;
        let (v2, e2) = gk15(&mut f, mid, worst.b)?;
        evaluations += 30;
        total.axpy(-1.0, &worst.value);
        total.axpy(1.0, &v1);
        total.axpy(1.0, &v2);
        total_err += e1 + e2 - worst.error;
        let depth = worst.depth + 1;
        heap.push(Panel { a: worst.a, b: mid, value: v1, error: e1, depth });
        heap.push(Panel { a: mid, b: worst.b, value: v2, error: e2, depth });
    }
    // Re-sum to shed accumulated rounding from the running updates.
    let mut value = T::zero();
    let mut error = 0.0;
    for p in heap.iter().chain(frozen.iter()) {
        value.axpy(1.0, &p.value);
        error += p.error;
    }
    Ok(Estimate { value, error, evaluations, exhausted })
}

fn oscillation_panels(len: f64, omega: f64) -> usize {
    if omega > 0.0 {
        ((len * omega / (2.0 * PI)).ceil() as usize).clamp(1, MAX_PANELS / 4)
    } else {
        1
    }
}

fn uniform_breaks(a: f64, b: f64, n: usize) -> Vec<f64> {
    (0..=n).map(|i| if i == n { b } else { a + (b - a) * i as f64 / n as f64 }).collect()
}

/// `int_a^b f(x) dx`.
pub fn integrate_finite<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate<T>> {
    integrate_oscillatory(f, a, b, 0.0, cfg)
}

/// `int f` over `[breaks[0], breaks[last]]` with the given initial panels.
pub fn integrate_panels<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    breaks: &[f64],
    cfg: &QuadratureConfig,
) -> Result<Estimate<T>> {
    if breaks.iter().any(|b| !b.is_finite()) || breaks.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Domain { what: "panel breakpoints", value: f64::NAN });
    }
    adaptive(f, breaks, cfg)
}

/// As [`integrate_finite`] for integrands oscillating with angular
/// frequency up to `omega`: no initial panel is longer than one period.
pub fn integrate_oscillatory<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    a: f64,
    b: f64,
    omega: f64,
    cfg: &QuadratureConfig,
) -> Result<Estimate<T>> {
    if !(a.is_finite() && b.is_finite()) || a > b {
        return Err(Error::Domain { what: "integration interval", value: if a.is_finite() { b } else { a } });
    }
    if a == b {
        return Ok(Estimate { value: T::zero(), error: 0.0, evaluations: 0, exhausted: false });
    }
    let n = oscillation_panels(b - a, omega.abs());
    adaptive(f, &uniform_breaks(a, b, n), cfg)
}

/// Upper envelope of `ln |f|` for a semi-infinite integrand, plus its
/// oscillation frequency and direction.
pub struct DecayProfile<'a> {
    log_envelope: Box<dyn Fn(f64) -> f64 + 'a>,
    omega: f64,
    direction: Direction,
}

impl<'a> DecayProfile<'a> {
    pub fn new(log_envelope: impl Fn(f64) -> f64 + 'a, omega: f64, direction: Direction) -> Self {
        Self { log_envelope: Box::new(log_envelope), omega: omega.abs(), direction }
    }

    /// Envelope of `p(x) U'(x)^j e^{alpha x - U(x)}`-type integrands:
    /// `-U(x) + |alpha| |x|` plus logarithmic slack for polynomial factors.
    pub fn potential(model: &'a PotentialModel, alpha: f64, direction: Direction) -> Self {
        let a = alpha.abs();
        Self::new(
            move |x: f64| -model.value(x) + a * x.abs() + 2.0 * x.abs().ln_1p() + model.slope(x).abs().ln_1p(),
            0.0,
            direction,
        )
    }

    pub fn with_omega(mut self, omega: f64) -> Self {
        self.omega = omega.abs();
        self
    }

    pub fn direction(&self) -> Direction {
        self.direction
    }

    pub fn log_envelope(&self, x: f64) -> f64 {
        (self.log_envelope)(x)
    }

    /// Truncation point `R` past which the envelope is below both
    /// `ln abs_tol` and `peak - truncation_margin` and still decreasing,
    /// together with a bound on the discarded tail.
    pub fn truncation(&self, origin: f64, cfg: &QuadratureConfig) -> Result<(f64, f64)> {
        const MAX_DISTANCE: f64 = 1e6;
        let s = self.direction.sign();
        let env = |d: f64| (self.log_envelope)(origin + s * d);
        let mut prev_d = 0.0;
        let mut prev = env(0.0);
        let mut peak = if prev.is_finite() { prev } else { f64::NEG_INFINITY };
        let mut d = 0.0625;
        while d <= MAX_DISTANCE {
            let cur = env(d);
            if cur.is_nan() {
                return Err(Error::NonFiniteIntegrand { at: origin + s * d });
            }
            peak = peak.max(cur);
            let threshold = cfg.abs_tol.ln().min(peak - cfg.truncation_margin);
            if cur < threshold && cur < prev {
                let slope = (cur - prev) / (d - prev_d);
                let tail = if cur == f64::NEG_INFINITY { 0.0 } else { cur.exp() / slope.abs() };
                return Ok((origin + s * d, tail));
            }
            prev = cur;
            prev_d = d;
            d += (0.05 * d).max(0.0625);
        }
        Err(Error::Truncation { origin, reached: origin + s * MAX_DISTANCE })
    }
}

/// `int_origin^{+inf} f` or `int_{-inf}^origin f`, depending on the
/// profile's direction. The tail bound is included in the error.
pub fn integrate_semiinfinite<T: QuadValue, F: FnMut(f64) -> T>(
    f: F,
    origin: f64,
    profile: &DecayProfile<'_>,
    cfg: &QuadratureConfig,
) -> Result<Estimate<T>> {
    let (r, tail) = profile.truncation(origin, cfg)?;
    let (a, b) = if r > origin { (origin, r) } else { (r, origin) };
    let n = oscillation_panels(b - a, profile.omega).max(4);
    let mut est = adaptive(f, &uniform_breaks(a, b, n), cfg)?;
    est.error += tail;
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn finite_examples() {
        let cfg = QuadratureConfig::default();
        let one = integrate_finite(|_| c(1.0, 0.0), 0.0, 1.0, &cfg).unwrap();
        assert!((one.value - 1.0).norm() < 1e-15);
        let osc = integrate_finite(|x| c(0.0, x).exp(), 0.0, PI, &cfg).unwrap();
        assert!((osc.value - c(0.0, 2.0)).norm() < 1e-13);
        let g = integrate_finite(|x: f64| x * (-0.5 * x * x).exp(), 0.0, 5.0, &cfg).unwrap();
        assert!((g.value - (1.0 - (-12.5f64).exp())).abs() < 1e-14);
    }

    #[test]
    fn semiinfinite_examples() {
        let cfg = QuadratureConfig::default();
        let exp = DecayProfile::new(|x| -x, 0.0, Direction::Positive);
        let v = integrate_semiinfinite(|x: f64| (-x).exp(), 0.0, &exp, &cfg).unwrap();
        assert!((v.value - 1.0).abs() < 1e-11);

        let gauss = PotentialModel::gaussian(1.0).unwrap();
        let prof = DecayProfile::potential(&gauss, 0.0, Direction::Positive);
        let v = integrate_semiinfinite(|x: f64| (-0.5 * x * x).exp(), 0.0, &prof, &cfg).unwrap();
        // oracle: trapezoid with step 1e-3 is spectrally accurate for this integrand
        let h = 1e-3;
        let trap: f64 = 0.5 + (1..40_000).map(|i| (-0.5 * (i as f64 * h).powi(2)).exp()).sum::<f64>();
        assert!((v.value - trap * h).abs() < 1e-10);
        assert!((v.value - 1.2533141373155003).abs() < 1e-10);

        let v = integrate_semiinfinite(|x: f64| x * (-0.5 * x * x).exp(), 0.0, &prof, &cfg).unwrap();
        assert!((v.value - 1.0).abs() < 1e-10);

        let neg = DecayProfile::potential(&gauss, 0.0, Direction::Negative);
        let v = integrate_semiinfinite(|x: f64| x * (-0.5 * x * x).exp(), 0.0, &neg, &cfg).unwrap();
        assert!((v.value + 1.0).abs() < 1e-10);
    }

    #[test]
    fn truncation_meets_profile_bound() {
        let cfg = QuadratureConfig::default();
        let gauss = PotentialModel::gaussian(1.0).unwrap();
        for alpha in [0.0, 1.0, 4.0] {
            let prof = DecayProfile::potential(&gauss, alpha, Direction::Positive);
            let (r, _) = prof.truncation(0.0, &cfg).unwrap();
            assert!((-gauss.value(r) + alpha * r).exp() < cfg.abs_tol);
        }
    }

    #[test]
    fn non_finite_sample_is_located() {
        let cfg = QuadratureConfig::default();
        let err = integrate_finite(|x: f64| 1.0 / (x - 0.5), 0.0, 1.0, &cfg).unwrap_err();
        assert_eq!(err, Error::NonFiniteIntegrand { at: 0.5 });
    }

    #[test]
    fn truncation_failure() {
        let cfg = QuadratureConfig::default();
        let flat = DecayProfile::new(|_| 0.0, 0.0, Direction::Positive);
        assert!(matches!(integrate_semiinfinite(|_| 1.0, 0.0, &flat, &cfg), Err(Error::Truncation { .. })));
    }

    #[test]
    fn depth_exhaustion_is_flagged() {
        let cfg = QuadratureConfig { max_depth: 2, ..QuadratureConfig::default() };
        let est = integrate_finite(|x: f64| x.abs().sqrt(), -1.0, 1.0, &cfg).unwrap();
        assert!(est.exhausted);
    }

    #[test]
    fn error_estimates_bound_true_error() {
        let cfg = QuadratureConfig::with_tolerances(1e-6, 1e-9);
        type Case = (fn(f64) -> f64, f64, f64, f64);
        let cases: [Case; 4] = [
            (|x| x.sqrt(), 0.0, 1.0, 2.0 / 3.0),
            (|x| (10.0 * x).cos(), 0.0, 3.0, (30.0f64).sin() / 10.0),
            (|x| 1.0 / (1.0 + 100.0 * x * x), -1.0, 1.0, 0.2 * (10.0f64).atan()),
            (|x| x.ln().abs(), 0.0, 1.0, 1.0),
        ];
        for (f, a, b, exact) in cases {
            let est = integrate_finite(f, a, b, &cfg).unwrap();
            assert!((est.value - exact).abs() <= est.error.max(1e-15), "{exact} {est:?}");
        }
    }

    #[test]
    fn vector_integrand() {
        let cfg = QuadratureConfig::default();
        let v = integrate_finite(|x: f64| [c(x, 0.0), c(0.0, x * x)], 0.0, 1.0, &cfg).unwrap();
        assert!((v.value[0] - 0.5).norm() < 1e-15);
        assert!((v.value[1] - c(0.0, 1.0 / 3.0)).norm() < 1e-15);
    }

    #[test]
    fn oscillation_guard_resolves_high_frequency() {
        let cfg = QuadratureConfig::default();
        let w = 400.0;
        let v = integrate_oscillatory(|x: f64| c(0.0, w * x).exp(), 0.0, 1.0, w, &cfg).unwrap();
        let exact = (c(0.0, w).exp() - 1.0) / c(0.0, w);
        assert!((v.value - exact).norm() < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn linearity(a in -3.0f64..3.0, b in -3.0f64..3.0, p in 0.1f64..4.0, q in -2.0f64..2.0) {
            let cfg = QuadratureConfig::default();
            let f = |x: f64| c((p * x).sin(), x * x);
            let g = |x: f64| c((q * x).exp(), (p * x).cos());
            let lhs = integrate_finite(|x| f(x) * a + g(x) * b, -1.0, 2.0, &cfg).unwrap().value;
            let rf = integrate_finite(f, -1.0, 2.0, &cfg).unwrap().value;
            let rg = integrate_finite(g, -1.0, 2.0, &cfg).unwrap().value;
            let rhs = rf * a + rg * b;
            prop_assert!((lhs - rhs).norm() <= 10.0 * cfg.rel_tol * rhs.norm().max(1.0));
        }

        #[test]
        fn additivity(lo in -3.0f64..0.0, mid in 0.0f64..1.0, hi in 1.0f64..4.0, k in 0.5f64..6.0) {
            let cfg = QuadratureConfig::default();
            let f = |x: f64| c((k * x).cos() * (-0.3 * x * x).exp(), x.sin());
            let whole = integrate_finite(f, lo, hi, &cfg).unwrap().value;
            let left = integrate_finite(f, lo, mid, &cfg).unwrap().value;
            let right = integrate_finite(f, mid, hi, &cfg).unwrap().value;
            prop_assert!((whole - left - right).norm() <= 10.0 * cfg.rel_tol * whole.norm().max(1.0));
        }
    }
}
