//! Zeros of holomorphic functions in a rectangle by the argument principle.
//!
//! Each edge contributes `(1/2 pi i) int zeta^k f'/f d zeta` for small `k`,
//! computed by adaptive quadrature and cross-checked against the phase
//! change of `f` sampled densely enough that consecutive arguments differ by
//! less than `pi/2`. Rectangles are bisected along their longer side until
//! each holds a single zero (or a tight cluster, reported as one multiple
//! zero), which is located from the first moment and polished by Newton.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;
use core::cell::RefCell;
use core::f64::consts::PI;
use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::charfn::CharFunctionHandle;
use crate::error::{Error, Result};
use crate::quadrature::{integrate_panels, QuadratureConfig};

/// Number of moments `zeta^0 .. zeta^{MOMENTS-1}` carried per edge.
const MOMENTS: usize = 7;

const SPLIT_FRACTIONS: [f64; 7] = [0.5, 0.47, 0.53, 0.44, 0.56, 0.41, 0.59];

/// A function holomorphic on the search region, returning `(f(z), f'(z))`.
pub trait Holomorphic {
    fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)>;
}

impl<F: Fn(Complex64) -> Result<(Complex64, Complex64)>> Holomorphic for F {
    fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        self(z)
    }
}

impl Holomorphic for CharFunctionHandle {
    fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        let e = CharFunctionHandle::eval(self, z)?;
        Ok((e.value, e.derivative))
    }
}

/// Monic polynomial given by its roots.
#[derive(Clone, Debug, PartialEq)]
pub struct RootedPolynomial {
    pub roots: Vec<Complex64>,
}

impl Holomorphic for RootedPolynomial {
    fn eval(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        // product rule accumulated left to right
        let mut v = Complex64::new(1.0, 0.0);
        let mut d = Complex64::new(0.0, 0.0);
        for r in &self.roots {
            d = d * (z - r) + v;
            v *= z - r;
        }
        Ok((v, d))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum EdgeSide {
    Bottom,
    Right,
    Top,
    Left,
}

const SIDES: [EdgeSide; 4] = [EdgeSide::Bottom, EdgeSide::Right, EdgeSide::Top, EdgeSide::Left];

/// Axis-aligned rectangle `[re_min, re_max] x [im_min, im_max]`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ComplexRegion {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
    /// Initial phase samples per unit edge length.
    pub density: f64,
}

impl ComplexRegion {
    pub fn new(re_min: f64, re_max: f64, im_min: f64, im_max: f64) -> Result<Self> {
        let ok = |v: f64| v.is_finite();
        if !(ok(re_min) && ok(re_max) && ok(im_min) && ok(im_max)) {
            return Err(Error::Domain { what: "region bound", value: f64::NAN });
        }
        if !(re_min < re_max) {
            return Err(Error::Domain { what: "region real extent", value: re_max - re_min });
        }
        if !(im_min < im_max) {
            return Err(Error::Domain { what: "region imaginary extent", value: im_max - im_min });
        }
        Ok(Self { re_min, re_max, im_min, im_max, density: 4.0 })
    }

    pub fn with_density(mut self, density: f64) -> Self {
        self.density = density.max(0.5);
        self
    }

    pub fn width(&self) -> f64 {
        self.re_max - self.re_min
    }

    pub fn height(&self) -> f64 {
        self.im_max - self.im_min
    }

    pub fn center(&self) -> Complex64 {
        Complex64::new(0.5 * (self.re_min + self.re_max), 0.5 * (self.im_min + self.im_max))
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.re >= self.re_min && z.re <= self.re_max && z.im >= self.im_min && z.im <= self.im_max
    }

    fn contains_with(&self, z: Complex64, slack: f64) -> bool {
        z.re >= self.re_min - slack
            && z.re <= self.re_max + slack
            && z.im >= self.im_min - slack
            && z.im <= self.im_max + slack
    }

    fn corners(&self) -> [Complex64; 4] {
        [
            Complex64::new(self.re_min, self.im_min),
            Complex64::new(self.re_max, self.im_min),
            Complex64::new(self.re_max, self.im_max),
            Complex64::new(self.re_min, self.im_max),
        ]
    }

    /// Moves one side outward by `amount`.
    pub fn enlarge(&self, side: EdgeSide, amount: f64) -> Self {
        let mut r = *self;
        match side {
            EdgeSide::Bottom => r.im_min -= amount,
            EdgeSide::Right => r.re_max += amount,
            EdgeSide::Top => r.im_max += amount,
            EdgeSide::Left => r.re_min -= amount,
        }
        r
    }

    fn split(&self, fraction: f64) -> (Self, Self) {
        let (mut a, mut b) = (*self, *self);
        if self.width() >= self.height() {
            let cut = self.re_min + fraction * self.width();
            a.re_max = cut;
            b.re_min = cut;
        } else {
            let cut = self.im_min + fraction * self.height();
            a.im_max = cut;
            b.im_min = cut;
        }
        (a, b)
    }
}

impl fmt::Display for ComplexRegion {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}] x [{}, {}]", self.re_min, self.re_max, self.im_min, self.im_max)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RootConfig {
    /// Largest accepted residual `|f|` at a reported root.
    pub root_tol: f64,
    /// Newton stops once a step is below this, relative to `max(1, |z|)`.
    pub step_tol: f64,
    /// Edge samples with `|f|` below this count as hitting the boundary.
    pub boundary_tol: f64,
    pub min_box_size: f64,
    /// Spread below which `m >= 2` zeros in a box are one multiple zero.
    pub cluster_tol: f64,
    pub max_refinements: u32,
    pub max_newton: usize,
    pub max_jitter: u32,
    pub edge_quadrature: QuadratureConfig,
}

impl Default for RootConfig {
    fn default() -> Self {
        Self {
            root_tol: 1e-8,
            step_tol: 1e-14,
            boundary_tol: 1e-8,
            min_box_size: 1e-8,
            cluster_tol: 1e-3,
            max_refinements: 4,
            max_newton: 50,
            max_jitter: 8,
            edge_quadrature: QuadratureConfig::with_tolerances(1e-11, 1e-11),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Root {
    pub location: Complex64,
    pub multiplicity: u32,
    pub residual: f64,
    /// Newton converged inside the box that isolated this zero.
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RootSet {
    /// Sorted by real then imaginary part.
    pub roots: Vec<Root>,
    /// The searched region, after any boundary jitter.
    pub region: ComplexRegion,
    pub winding: i64,
    /// Subdivisions at which parent and child windings were compared.
    pub splits_checked: usize,
    pub evaluations: usize,
}

impl RootSet {
    pub fn multiplicity_total(&self) -> i64 {
        self.roots.iter().map(|r| r.multiplicity as i64).sum()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Polished {
    pub root: Complex64,
    pub residual: f64,
    pub iterations: usize,
}

/// Newton iteration `z <- z - f/f'` (`z <- z - m f/f'` for a zero of
/// multiplicity `m`).
pub fn newton_polish<F: Holomorphic + ?Sized>(f: &F, guess: Complex64, cfg: &RootConfig) -> Result<Polished> {
    newton_polish_multiple(f, guess, 1, cfg)
}

pub fn newton_polish_multiple<F: Holomorphic + ?Sized>(
    f: &F,
    guess: Complex64,
    multiplicity: u32,
    cfg: &RootConfig,
) -> Result<Polished> {
    let m = multiplicity.max(1) as f64;
    let mut z = guess;
    let mut prev_step = f64::INFINITY;
    let mut growth = 0;
    let mut iterations = 0;
    let (mut v, mut d) = f.eval(z)?;
    while iterations < cfg.max_newton {
        if v.norm() == 0.0 {
            break;
        }
        if d.norm() == 0.0 {
            return Err(Error::PolishFailure { last: z });
        }
        let step = m * v / d;
        let size = step.norm();
        if !size.is_finite() {
            return Err(Error::PolishFailure { last: z });
        }
        let scale = z.norm().max(1.0);
        if size > prev_step && size > 1e3 * cfg.step_tol * scale {
            growth += 1;
            if growth >= 5 {
                return Err(Error::PolishFailure { last: z });
            }
        } else {
            growth = 0;
        }
        let next = z - step;
        let (nv, nd) = f.eval(next)?;
        iterations += 1;
        // Near machine precision the residual stops decreasing; keep the better point.
        if size <= 1e3 * cfg.step_tol * scale && nv.norm() > v.norm() {
            break;
        }
        z = next;
        v = nv;
        d = nd;
        prev_step = size;
        if size <= cfg.step_tol * scale {
            break;
        }
    }
    Ok(Polished { root: z, residual: v.norm(), iterations })
}

/// Winding number of `f` around the region, enlarging the region by `1e-4`
/// when a zero lies on its boundary.
pub fn count_zeros<F: Holomorphic + ?Sized>(f: &F, region: ComplexRegion, cfg: &RootConfig) -> Result<i64> {
    let mut solver = Solver::new(f, cfg, region.center());
    let (_, n, _) = solver.top_level(region)?;
    Ok(n)
}

/// All zeros of `f` inside the region with multiplicities.
pub fn locate_zeros<F: Holomorphic + ?Sized>(f: &F, region: ComplexRegion, cfg: &RootConfig) -> Result<RootSet> {
    let mut solver = Solver::new(f, cfg, region.center());
    let (region, winding, moments) = solver.top_level(region)?;
    let mut roots = Vec::new();
    let mut stack = alloc::vec![(region, winding, moments)];
    while let Some((rect, n, s)) = stack.pop() {
        if n == 0 {
            continue;
        }
        if n < 0 {
            return Err(Error::UnresolvedCluster { region: rect, count: n });
        }
        if let Some(root) = solver.try_leaf(&rect, n, &s)? {
            roots.push(root);
            continue;
        }
        if rect.width().max(rect.height()) < cfg.min_box_size {
            return Err(Error::UnresolvedCluster { region: rect, count: n });
        }
        let (a, b) = solver.split(&rect, n)?;
        stack.push(b);
        stack.push(a);
    }
    for r in &mut roots {
        if r.location.im.abs() < 1e-10 {
            r.location.im = 0.0;
        }
    }
    roots.sort_by(|a, b| a.location.re.total_cmp(&b.location.re).then(a.location.im.total_cmp(&b.location.im)));
    let evaluations = solver.evaluations.into_inner();
    Ok(RootSet { roots, region, winding, splits_checked: solver.splits, evaluations })
}

type Moments = [Complex64; MOMENTS];
/// A sub-rectangle with its winding count and contour moments.
type Piece = (ComplexRegion, i64, Moments);

#[derive(Clone, Copy, Debug)]
struct EdgeData {
    /// `int (zeta - c0)^k f'/f d zeta`.
    moments: Moments,
    /// Total change of `arg f` along the edge.
    phase: f64,
    level: u32,
}

impl EdgeData {
    fn reversed(mut self) -> Self {
        for m in &mut self.moments {
            *m = -*m;
        }
        self.phase = -self.phase;
        self
    }
}

enum Failure {
    Boundary(EdgeSide),
    Fatal(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Fatal(e)
    }
}

type EdgeKey = [u64; 4];

struct Solver<'a, F: ?Sized> {
    f: &'a F,
    cfg: &'a RootConfig,
    c0: Complex64,
    cache: BTreeMap<EdgeKey, EdgeData>,
    evaluations: RefCell<usize>,
    splits: usize,
}

fn key(a: Complex64, b: Complex64) -> (EdgeKey, bool) {
    let ka = (a.re, a.im);
    let kb = (b.re, b.im);
    let forward = ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1)).is_lt();
    let (p, q) = if forward { (a, b) } else { (b, a) };
    ([p.re.to_bits(), p.im.to_bits(), q.re.to_bits(), q.im.to_bits()], forward)
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

/// Power sums about `c` from power sums about `c0`.
fn shift(s: &Moments, c0: Complex64, c: Complex64) -> Moments {
    let d = c0 - c;
    let mut out = [Complex64::new(0.0, 0.0); MOMENTS];
    for (k, o) in out.iter_mut().enumerate() {
        for (j, sj) in s.iter().enumerate().take(k + 1) {
            *o += binomial(k, j) * d.powu((k - j) as u32) * sj;
        }
    }
    out
}

impl<'a, F: Holomorphic + ?Sized> Solver<'a, F> {
    fn new(f: &'a F, cfg: &'a RootConfig, c0: Complex64) -> Self {
        Self { f, cfg, c0, cache: BTreeMap::new(), evaluations: RefCell::new(0), splits: 0 }
    }

    fn value(&self, z: Complex64) -> Result<(Complex64, Complex64)> {
        *self.evaluations.borrow_mut() += 1;
        self.f.eval(z)
    }

    fn top_level(&mut self, region: ComplexRegion) -> Result<(ComplexRegion, i64, Moments)> {
        let mut rect = region;
        for _ in 0..=self.cfg.max_jitter {
            match self.winding(&rect) {
                Ok((n, s)) => return Ok((rect, n, s)),
                Err(Failure::Boundary(side)) => rect = rect.enlarge(side, 1e-4),
                Err(Failure::Fatal(e)) => return Err(e),
            }
        }
        Err(Error::BoundaryProximity { region: rect, edge: EdgeSide::Bottom, winding: f64::NAN })
    }

    /// Splits with the first cut fraction that avoids zeros on the cut and
    /// preserves the winding count.
    fn split(&mut self, rect: &ComplexRegion, n: i64) -> Result<(Piece, Piece)> {
        let mut last_err = None;
        for frac in SPLIT_FRACTIONS {
            let (a, b) = rect.split(frac);
            let ra = self.winding(&a);
            let rb = self.winding(&b);
            match (ra, rb) {
                (Ok((na, sa)), Ok((nb, sb))) => {
                    self.splits += 1;
                    if na + nb == n {
                        return Ok(((a, na, sa), (b, nb, sb)));
                    }
                    last_err = Some(Error::WindingMismatch { region: *rect, parent: n, children: na + nb });
                }
                (Err(Failure::Fatal(e)), _) | (_, Err(Failure::Fatal(e))) => return Err(e),
                (Err(Failure::Boundary(side)), _) | (_, Err(Failure::Boundary(side))) => {
                    last_err = Some(Error::BoundaryProximity { region: *rect, edge: side, winding: n as f64 });
                }
            }
        }
        Err(last_err.unwrap_or(Error::WindingMismatch { region: *rect, parent: n, children: 0 }))
    }

    /// Single zero or tight cluster: moment estimate plus Newton.
    fn try_leaf(&mut self, rect: &ComplexRegion, n: i64, s: &Moments) -> Result<Option<Root>> {
        let c = rect.center();
        let sc = shift(s, self.c0, c);
        let m = n as usize;
        let mean = c + sc[1] / n as f64;
        if n >= 2 {
            if m >= MOMENTS {
                return Ok(None);
            }
            let centered = shift(&sc, c, mean);
            let spread = (2..=m).map(|k| (centered[k].norm() / n as f64).powf(1.0 / k as f64)).fold(0.0, f64::max);
            if !(spread < self.cfg.cluster_tol) {
                return Ok(None);
            }
        }
        let slack = 1e-9 * rect.width().max(rect.height()).max(1.0);
        let polished = match newton_polish_multiple(self.f, mean, m as u32, self.cfg) {
            Ok(p) if rect.contains_with(p.root, slack) => Some(p),
            Ok(_) | Err(Error::PolishFailure { .. }) => None,
            Err(e) => return Err(e),
        };
        let root = match polished {
            Some(p) => Root {
                location: p.root,
                multiplicity: m as u32,
                residual: p.residual,
                converged: p.residual <= self.cfg.root_tol,
            },
            None => {
                let (v, _) = self.value(mean)?;
                Root { location: mean, multiplicity: m as u32, residual: v.norm(), converged: false }
            }
        };
        Ok(Some(root))
    }

    fn winding(&mut self, rect: &ComplexRegion) -> core::result::Result<(i64, Moments), Failure> {
        let corners = rect.corners();
        let mut worst_side = EdgeSide::Bottom;
        for level in 0..=self.cfg.max_refinements {
            let mut total = [Complex64::new(0.0, 0.0); MOMENTS];
            let mut phase = 0.0;
            let mut worst = -1.0;
            for (i, side) in SIDES.iter().enumerate() {
                let e = self.edge(corners[i], corners[(i + 1) % 4], rect.density, level, *side)?;
                for (t, m) in total.iter_mut().zip(e.moments.iter()) {
                    *t += m;
                }
                phase += e.phase;
                let mismatch = (e.moments[0].im - e.phase).abs();
                if mismatch > worst {
                    worst = mismatch;
                    worst_side = *side;
                }
            }
            let norm = Complex64::new(0.0, 2.0 * PI);
            let s: Moments = total.map(|m| m / norm);
            let w = s[0];
            let n_phase = phase / (2.0 * PI);
            let n = n_phase.round();
            if (w - n).norm() < 0.25 && (n_phase - n).abs() < 1e-6 {
                return Ok((n as i64, s));
            }
        }
        // unresolved: a zero is likely too close to `worst_side`
        Err(Failure::Boundary(worst_side))
    }

    fn edge(
        &mut self,
        a: Complex64,
        b: Complex64,
        density: f64,
        level: u32,
        side: EdgeSide,
    ) -> core::result::Result<EdgeData, Failure> {
        let (k, forward) = key(a, b);
        if let Some(e) = self.cache.get(&k) {
            if e.level >= level {
                return Ok(if forward { *e } else { e.reversed() });
            }
        }
        let (p, q) = if forward { (a, b) } else { (b, a) };
        let data = self.compute_edge(p, q, density, level, side)?;
        self.cache.insert(k, data);
        Ok(if forward { data } else { data.reversed() })
    }

    fn compute_edge(
        &self,
        a: Complex64,
        b: Complex64,
        density: f64,
        level: u32,
        side: EdgeSide,
    ) -> core::result::Result<EdgeData, Failure> {
        let len = (b - a).norm();
        let n0 = ((len * density).ceil() as usize).max(8) << level;
        let at = |t: f64| a + (b - a) * t;
        let mut ts = Vec::with_capacity(n0 + 1);
        let mut vs = Vec::with_capacity(n0 + 1);
        for i in 0..=n0 {
            let t = i as f64 / n0 as f64;
            let (v, d) = self.value(at(t))?;
            if v.norm() < self.cfg.boundary_tol {
                return Err(Failure::Boundary(side));
            }
            ts.push(t);
            // |f / f'| bounds the distance to the nearest zero (times its multiplicity)
            vs.push((v, v.norm() / d.norm()));
        }
        // Refine until consecutive phases differ by less than pi/2 and no
        // step is longer than twice the local zero distance bound, which
        // keeps the phase change per step below about 2 even next to a
        // multiple zero.
        let mut phase = 0.0;
        let mut points = alloc::vec![0.0];
        for i in 0..n0 {
            let mut stack = alloc::vec![(ts[i + 1], vs[i + 1], 0u32)];
            let (mut t0, mut v0) = (ts[i], vs[i]);
            while let Some(&(t1, v1, depth)) = stack.last() {
                let d = (v1.0 / v0.0).arg();
                let reach = 2.0 * v0.1.min(v1.1);
                if d.abs() < 0.5 * PI && !((t1 - t0) * len > reach) {
                    phase += d;
                    points.push(t1);
                    t0 = t1;
                    v0 = v1;
                    stack.pop();
                    continue;
                }
                if depth > 40 {
                    return Err(Failure::Boundary(side));
                }
                let tm = 0.5 * (t0 + t1);
                let (vm, dm) = self.value(at(tm))?;
                if vm.norm() < self.cfg.boundary_tol {
                    return Err(Failure::Boundary(side));
                }
                stack.push((tm, (vm, vm.norm() / dm.norm()), depth + 1));
            }
        }
        let breaks: Vec<f64> =
            points.iter().enumerate().filter(|(i, _)| i % 2 == 0 || *i == points.len() - 1).map(|(_, t)| *t).collect();

        let mut qcfg = self.cfg.edge_quadrature;
        qcfg.rel_tol = (qcfg.rel_tol * 0.01f64.powi(level as i32)).max(1e-14);
        qcfg.abs_tol = (qcfg.abs_tol * 0.01f64.powi(level as i32)).max(1e-15);
        let failure: RefCell<Option<Error>> = RefCell::new(None);
        let c0 = self.c0;
        let integrand = |t: f64| -> Moments {
            let z = at(t);
            let mut out = [Complex64::new(f64::NAN, 0.0); MOMENTS];
            match self.value(z) {
                Ok((v, d)) => {
                    let w = d / v * (b - a);
                    let dz = z - c0;
                    let mut p = Complex64::new(1.0, 0.0);
                    for o in out.iter_mut() {
                        *o = w * p;
                        p *= dz;
                    }
                }
                Err(e) => {
                    failure.borrow_mut().get_or_insert(e);
                }
            }
            out
        };
        let est = integrate_panels(integrand, &breaks, &qcfg);
        if let Some(e) = failure.into_inner() {
            return Err(Failure::Fatal(e));
        }
        let est = est.map_err(|e| match e {
            Error::NonFiniteIntegrand { .. } => Failure::Boundary(side),
            e => Failure::Fatal(e),
        })?;
        Ok(EdgeData { moments: est.value, phase, level })
    }
}
