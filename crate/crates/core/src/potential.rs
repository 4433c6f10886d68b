//! Potential functions `U`, switching intensities and grid checks of the
//! standing assumptions on `U`.
//!
//! All potentials are anchored so that `U(0) = 0`. A model carries a scale
//! `sigma` and evaluates `U_sigma(x) = U_1(x / sigma)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::sync::Arc;
use alloc::vec::Vec;
use core::fmt;
use core::str::FromStr;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// A real callable used by custom potentials.
pub type RealFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// Velocity component `theta` of a state `(x, theta)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Velocity {
    Minus,
    Plus,
}

impl Velocity {
    pub const BOTH: [Velocity; 2] = [Velocity::Plus, Velocity::Minus];

    pub fn sign(self) -> f64 {
        match self {
            Velocity::Plus => 1.0,
            Velocity::Minus => -1.0,
        }
    }

    pub fn flip(self) -> Velocity {
        match self {
            Velocity::Plus => Velocity::Minus,
            Velocity::Minus => Velocity::Plus,
        }
    }
}

/// User-supplied potential. `U(0)` is subtracted once at construction.
#[derive(Clone)]
pub struct CustomPotential {
    name: String,
    value: RealFn,
    slope: RealFn,
    curvature: Option<RealFn>,
    offset: f64,
    symmetric: bool,
}

impl CustomPotential {
    pub fn new(name: impl Into<String>, value: RealFn, slope: RealFn) -> Self {
        let offset = value(0.0);
        Self { name: name.into(), value, slope, curvature: None, offset, symmetric: false }
    }

    pub fn with_curvature(mut self, curvature: RealFn) -> Self {
        self.curvature = Some(curvature);
        self
    }

    /// Declares `U(x) = U(-x)`, enabling the two-branch spectral decomposition.
    pub fn symmetric(mut self, symmetric: bool) -> Self {
        self.symmetric = symmetric;
        self
    }
}

impl fmt::Debug for CustomPotential {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CustomPotential")
            .field("name", &self.name)
            .field("has_curvature", &self.curvature.is_some())
            .field("symmetric", &self.symmetric)
            .finish()
    }
}

#[derive(Clone, Debug)]
pub enum Family {
    /// `U_1(x) = x^2 / 2`.
    Gaussian,
    /// `U_1(x) = ((1 + x^2)^(beta/2) - 1) / beta`, `beta > 1`.
    Beta {
        beta: f64,
    },
    Custom(CustomPotential),
}

/// `U`, `U'` and `U''` at a point. `second` is absent for custom potentials
/// without a curvature hook.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Derivatives {
    pub value: f64,
    pub first: f64,
    pub second: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct PotentialModel {
    family: Family,
    sigma: f64,
}

impl PotentialModel {
    pub fn gaussian(sigma: f64) -> Result<Self> {
        check_scale(sigma)?;
        Ok(Self { family: Family::Gaussian, sigma })
    }

    pub fn beta_family(beta: f64) -> Result<Self> {
        if !(beta > 1.0 && beta.is_finite()) {
            return Err(Error::Domain { what: "beta exponent (must exceed 1)", value: beta });
        }
        Ok(Self { family: Family::Beta { beta }, sigma: 1.0 })
    }

    pub fn custom(potential: CustomPotential) -> Self {
        Self { family: Family::Custom(potential), sigma: 1.0 }
    }

    pub fn family(&self) -> &Family {
        &self.family
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Returns the model with `U_s(x) = U(x / s)`.
    pub fn scale(&self, s: f64) -> Result<Self> {
        check_scale(s)?;
        Ok(Self { family: self.family.clone(), sigma: self.sigma * s })
    }

    /// Same family at unit scale.
    pub fn unit_scale(&self) -> Self {
        Self { family: self.family.clone(), sigma: 1.0 }
    }

    pub fn is_gaussian(&self) -> bool {
        matches!(self.family, Family::Gaussian) || matches!(self.family, Family::Beta { beta } if beta == 2.0)
    }

    pub fn is_symmetric(&self) -> bool {
        match &self.family {
            Family::Gaussian | Family::Beta { .. } => true,
            Family::Custom(c) => c.symmetric,
        }
    }

    pub fn has_curvature(&self) -> bool {
        match &self.family {
            Family::Custom(c) => c.curvature.is_some(),
            _ => true,
        }
    }

    /// Canonical descriptor (`gaussian:<sigma>`, `beta:<beta>`, with an
    /// `@<sigma>` suffix for rescaled beta models).
    pub fn descriptor(&self) -> String {
        match &self.family {
            Family::Gaussian => format!("gaussian:{}", self.sigma),
            Family::Beta { beta } if self.sigma == 1.0 => format!("beta:{beta}"),
            Family::Beta { beta } => format!("beta:{beta}@{}", self.sigma),
            Family::Custom(c) => format!("custom:{}", c.name),
        }
    }

    pub fn evaluate(&self, x: f64) -> Result<Derivatives> {
        if !x.is_finite() {
            return Err(Error::Domain { what: "potential argument", value: x });
        }
        Ok(Derivatives { value: self.value(x), first: self.slope(x), second: self.curvature(x) })
    }

    /// `U(x)`.
    pub fn value(&self, x: f64) -> f64 {
        let y = x / self.sigma;
        match &self.family {
            Family::Gaussian => 0.5 * y * y,
            Family::Beta { beta } => (0.5 * beta * (y * y).ln_1p()).exp_m1() / beta,
            Family::Custom(c) => (c.value)(y) - c.offset,
        }
    }

    /// `U'(x)`.
    pub fn slope(&self, x: f64) -> f64 {
        let y = x / self.sigma;
        let unit = match &self.family {
            Family::Gaussian => y,
            Family::Beta { beta } => y * ((0.5 * beta - 1.0) * (y * y).ln_1p()).exp(),
            Family::Custom(c) => (c.slope)(y),
        };
        unit / self.sigma
    }

    /// `U''(x)`, when known.
    pub fn curvature(&self, x: f64) -> Option<f64> {
        let y = x / self.sigma;
        let unit = match &self.family {
            Family::Gaussian => 1.0,
            Family::Beta { beta } => {
                let t = y * y;
                ((0.5 * beta - 2.0) * t.ln_1p()).exp() * (1.0 + (beta - 1.0) * t)
            }
            Family::Custom(c) => (c.curvature.as_ref()?)(y),
        };
        Some(unit / (self.sigma * self.sigma))
    }

    /// Whether `U` has a holomorphic extension into the right half-plane
    /// that this model can evaluate.
    pub fn is_analytic(&self) -> bool {
        !matches!(self.family, Family::Custom(_))
    }

    /// `U(z)` for complex `z` with `Re z >= 0` (builtin families only).
    pub fn value_complex(&self, z: Complex64) -> Option<Complex64> {
        let y = z / self.sigma;
        match &self.family {
            Family::Gaussian => Some(0.5 * y * y),
            Family::Beta { beta } => {
                let w = (Complex64::new(1.0, 0.0) + y * y).ln() * (0.5 * beta);
                Some((w.exp() - 1.0) / beta)
            }
            Family::Custom(_) => None,
        }
    }

    /// `U'(z)` for complex `z` with `Re z >= 0` (builtin families only).
    pub fn slope_complex(&self, z: Complex64) -> Option<Complex64> {
        let y = z / self.sigma;
        let unit = match &self.family {
            Family::Gaussian => y,
            Family::Beta { beta } => y * ((Complex64::new(1.0, 0.0) + y * y).ln() * (0.5 * beta - 1.0)).exp(),
            Family::Custom(_) => return None,
        };
        Some(unit / self.sigma)
    }

    /// `U''(z)` for complex `z` with `Re z >= 0` (builtin families only).
    pub fn curvature_complex(&self, z: Complex64) -> Option<Complex64> {
        let y = z / self.sigma;
        let unit = match &self.family {
            Family::Gaussian => Complex64::new(1.0, 0.0),
            Family::Beta { beta } => {
                let t = y * y;
                ((Complex64::new(1.0, 0.0) + t).ln() * (0.5 * beta - 2.0)).exp() * (1.0 + (beta - 1.0) * t)
            }
            Family::Custom(_) => return None,
        };
        Some(unit / (self.sigma * self.sigma))
    }

    /// `int_R e^{-U}`, computed by quadrature.
    pub fn normalizer(&self) -> Result<f64> {
        let cfg = crate::quadrature::QuadratureConfig::default();
        let mut total = 0.0;
        for dir in [Direction::Positive, Direction::Negative] {
            let profile = crate::quadrature::DecayProfile::potential(self, 0.0, dir);
            let est = crate::quadrature::integrate_semiinfinite(
                |x| Complex64::new((-self.value(x)).exp(), 0.0),
                0.0,
                &profile,
                &cfg,
            )?;
            total += est.value.re;
        }
        Ok(total)
    }

    /// Radius `R` with `U(+-R) > level`, found by doubling.
    pub fn radius_above(&self, level: f64) -> f64 {
        let mut r = self.sigma.max(1e-3);
        while r < 1e8 && (self.value(r) <= level || self.value(-r) <= level) {
            r *= 1.25;
        }
        r
    }
}

/// Direction of a tail `[origin, +inf)` or `(-inf, origin]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Direction {
    Positive,
    Negative,
}

impl Direction {
    pub fn sign(self) -> f64 {
        match self {
            Direction::Positive => 1.0,
            Direction::Negative => -1.0,
        }
    }
}

fn check_scale(sigma: f64) -> Result<()> {
    if sigma > 0.0 && sigma.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "scale sigma (must be positive)", value: sigma })
    }
}

impl FromStr for PotentialModel {
    type Err = Error;

    /// Parses `gaussian:<sigma>`, `beta:<beta>` and `beta:<beta>@<sigma>`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let (kind, rest) =
            s.split_once(':').ok_or_else(|| Error::Parse(format!("expected <family>:<parameter>, got `{s}`")))?;
        let num = |t: &str| t.trim().parse::<f64>().map_err(|_| Error::Parse(format!("invalid number `{t}` in `{s}`")));
        match kind.trim().to_ascii_lowercase().as_str() {
            "gaussian" | "normal" => PotentialModel::gaussian(num(rest)?),
            "beta" => match rest.split_once('@') {
                Some((b, sigma)) => PotentialModel::beta_family(num(b)?)?.scale(num(sigma)?),
                None => PotentialModel::beta_family(num(rest)?),
            },
            other => Err(Error::Parse(format!("unknown potential family `{other}`"))),
        }
    }
}

impl fmt::Display for PotentialModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.descriptor())
    }
}

/// Switching intensity `lambda(x, theta) = max(theta U'(x), 0) + refreshment`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SwitchingRateSpec {
    pub refreshment: f64,
}

impl SwitchingRateSpec {
    pub fn canonical() -> Self {
        Self { refreshment: 0.0 }
    }

    pub fn with_refreshment(refreshment: f64) -> Result<Self> {
        if refreshment >= 0.0 && refreshment.is_finite() {
            Ok(Self { refreshment })
        } else {
            Err(Error::Domain { what: "refreshment rate", value: refreshment })
        }
    }

    pub fn is_canonical(&self) -> bool {
        self.refreshment == 0.0
    }
}

pub fn switching_rate(model: &PotentialModel, spec: &SwitchingRateSpec, x: f64, theta: Velocity) -> f64 {
    (theta.sign() * model.slope(x)).max(0.0) + spec.refreshment
}

/// Symmetric evaluation grid `[-half_width, half_width]` with spacing `step`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GridSpec {
    pub half_width: f64,
    pub step: f64,
}

impl GridSpec {
    pub fn new(half_width: f64, step: f64) -> Result<Self> {
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(Error::Domain { what: "grid half width", value: half_width });
        }
        if !(step > 0.0 && step < half_width) {
            return Err(Error::Domain { what: "grid step", value: step });
        }
        Ok(Self { half_width, step })
    }

    /// Nonnegative grid points `0, step, ..., half_width`.
    pub fn nonnegative(&self) -> Vec<f64> {
        let n = (self.half_width / self.step).round() as usize;
        (0..=n).map(|i| i as f64 * self.half_width / n as f64).collect()
    }

    pub fn points(&self) -> Vec<f64> {
        let pos = self.nonnegative();
        let mut pts: Vec<f64> = pos.iter().rev().map(|x| -x).collect();
        pts.pop();
        pts.extend(pos);
        pts
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum Assumption {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    A7,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum AssumptionStatus {
    VerifiedOnGrid,
    ViolatedAt { x: f64 },
    NotChecked,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionEntry {
    pub assumption: Assumption,
    pub status: AssumptionStatus,
    /// Check-specific figure of merit: smallest feasible `M` for A1, `|U'|`
    /// at the edge for A2, `min U''` for A6, `max |U(x) - U(-x)|` for A7.
    pub worst: Option<f64>,
    pub note: String,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AssumptionReport {
    pub grid: GridSpec,
    pub entries: Vec<AssumptionEntry>,
}

impl AssumptionReport {
    pub fn get(&self, a: Assumption) -> &AssumptionEntry {
        self.entries.iter().find(|e| e.assumption == a).expect("every assumption is reported")
    }

    pub fn all_verified(&self) -> bool {
        self.entries.iter().all(|e| e.status == AssumptionStatus::VerifiedOnGrid)
    }
}

/// Grid checks of A1-A7 under canonical switching rates.
pub fn check_assumptions(model: &PotentialModel, grid: GridSpec) -> AssumptionReport {
    check_assumptions_with_rates(model, &SwitchingRateSpec::canonical(), grid)
}

pub fn check_assumptions_with_rates(
    model: &PotentialModel,
    rates: &SwitchingRateSpec,
    grid: GridSpec,
) -> AssumptionReport {
    let xs = grid.points();
    let entries = alloc::vec![
        check_a1(model, &xs),
        check_a2(model, &grid),
        check_a3(model, &xs),
        entry(
            Assumption::A4,
            if rates.is_canonical() {
                AssumptionStatus::VerifiedOnGrid
            } else {
                AssumptionStatus::ViolatedAt { x: 0.0 }
            },
            Some(rates.refreshment),
            "refreshment rate",
        ),
        check_a5(model, &grid),
        check_a6(model, &grid),
        check_a7(model, &grid),
    ];
    AssumptionReport { grid, entries }
}

fn entry(a: Assumption, status: AssumptionStatus, worst: Option<f64>, note: &str) -> AssumptionEntry {
    AssumptionEntry { assumption: a, status, worst, note: note.to_string() }
}

fn check_a1(model: &PotentialModel, xs: &[f64]) -> AssumptionEntry {
    if !model.has_curvature() {
        return entry(Assumption::A1, AssumptionStatus::NotChecked, None, "no U'' hook");
    }
    let n = xs.len();
    let inner = |i: usize| (i as f64 - (n - 1) as f64 / 2.0).abs() <= 0.45 * (n - 1) as f64;
    let mut best: Option<(f64, f64)> = None;
    let mut witness = xs[n - 1];
    for k in 1..=9 {
        let delta = k as f64 / 10.0;
        let excess: Vec<f64> =
            xs.iter().map(|&x| model.curvature(x).unwrap_or(0.0) - delta * model.slope(x).powi(2)).collect();
        let inner_max =
            excess.iter().enumerate().filter(|(i, _)| inner(*i)).fold(f64::NEG_INFINITY, |m, (_, v)| m.max(*v));
        let edge_max = excess[0].max(excess[n - 1]);
        // growth of U'' - delta U'^2 toward the edges means no finite M works
        let growing = edge_max > inner_max + 1e-9 * inner_max.abs().max(1.0);
        if growing {
            witness = if excess[0] > excess[n - 1] { xs[0] } else { xs[n - 1] };
            continue;
        }
        let m = excess.iter().fold(0.0_f64, |m, v| m.max(*v)).max(f64::MIN_POSITIVE);
        if best.is_none_or(|(_, bm)| m < bm) {
            best = Some((delta, m));
        }
    }
    match best {
        Some((delta, m)) => AssumptionEntry {
            assumption: Assumption::A1,
            status: AssumptionStatus::VerifiedOnGrid,
            worst: Some(m),
            note: format!("delta = {delta}, M = {m:e}"),
        },
        None => entry(
            Assumption::A1,
            AssumptionStatus::ViolatedAt { x: witness },
            None,
            "U'' - delta U'^2 grows at the grid edge for every delta",
        ),
    }
}

fn check_a2(model: &PotentialModel, grid: &GridSpec) -> AssumptionEntry {
    let pos = grid.nonnegative();
    let n = pos.len();
    let start = (3 * n) / 4;
    for sign in [1.0, -1.0] {
        let mut prev = model.slope(sign * pos[start]).abs();
        for &x in &pos[start + 1..] {
            let cur = model.slope(sign * x).abs();
            if cur < prev || !cur.is_finite() {
                return entry(
                    Assumption::A2,
                    AssumptionStatus::ViolatedAt { x: sign * x },
                    Some(cur),
                    "|U'| decreases near the grid edge",
                );
            }
            prev = cur;
        }
        let base = model.slope(sign * pos[start]).abs();
        if prev <= base {
            return entry(
                Assumption::A2,
                AssumptionStatus::ViolatedAt { x: sign * grid.half_width },
                Some(prev),
                "|U'| does not grow near the grid edge",
            );
        }
    }
    let edge = model.slope(grid.half_width).abs().min(model.slope(-grid.half_width).abs());
    entry(Assumption::A2, AssumptionStatus::VerifiedOnGrid, Some(edge), "|U'| increasing at both edges")
}

fn check_a3(model: &PotentialModel, xs: &[f64]) -> AssumptionEntry {
    if model.value(0.0).abs() > 1e-12 {
        return entry(Assumption::A3, AssumptionStatus::ViolatedAt { x: 0.0 }, None, "U(0) != 0");
    }
    for &x in xs {
        let s = model.slope(x);
        if (x > 0.0 && s < 0.0) || (x < 0.0 && s > 0.0) {
            return entry(Assumption::A3, AssumptionStatus::ViolatedAt { x }, Some(s), "U' has the wrong sign");
        }
    }
    entry(Assumption::A3, AssumptionStatus::VerifiedOnGrid, None, "unimodal on grid")
}

/// Tries `U(y) >= U(x) + m |y - x|^p` with `C = 0` on the outer half of the
/// grid for a few exponents `p`.
fn check_a5(model: &PotentialModel, grid: &GridSpec) -> AssumptionEntry {
    let pos = grid.nonnegative();
    let start = pos.len() / 2;
    let tail = &pos[start..];
    let stride = (tail.len() / 200).max(1);
    let sample: Vec<f64> = tail.iter().step_by(stride).copied().collect();
    for p in [2.0, 1.75, 1.5, 1.25, 1.1] {
        let mut m_min = f64::INFINITY;
        for sign in [1.0, -1.0] {
            for (i, &x) in sample.iter().enumerate() {
                for &y in &sample[i + 1..] {
                    let ratio = (model.value(sign * y) - model.value(sign * x)) / (y - x).powf(p);
                    m_min = m_min.min(ratio);
                }
            }
        }
        if m_min > 1e-12 {
            return AssumptionEntry {
                assumption: Assumption::A5,
                status: AssumptionStatus::VerifiedOnGrid,
                worst: Some(m_min),
                note: format!("p = {p}, m = {m_min:e}, M = {}", pos[start]),
            };
        }
    }
    entry(
        Assumption::A5,
        AssumptionStatus::ViolatedAt { x: grid.half_width },
        None,
        "no polynomial growth exponent p > 1 found",
    )
}

/// `U'' >= m > 0` outside `[-M, M]` with `M` half the grid width; a
/// power-law decay of `U''` toward the edges is reported as a violation.
fn check_a6(model: &PotentialModel, grid: &GridSpec) -> AssumptionEntry {
    if !model.has_curvature() {
        return entry(Assumption::A6, AssumptionStatus::NotChecked, None, "no U'' hook");
    }
    let r = grid.half_width;
    let pos = grid.nonnegative();
    let mut min_curv = f64::INFINITY;
    let mut argmin = r;
    for sign in [1.0, -1.0] {
        for &x in pos.iter().filter(|&&x| x >= 0.5 * r) {
            let c = model.curvature(sign * x).unwrap_or(f64::NAN);
            if !(c > 0.0) {
                return entry(
                    Assumption::A6,
                    AssumptionStatus::ViolatedAt { x: sign * x },
                    Some(c),
                    "U'' not positive outside [-M, M]",
                );
            }
            if c < min_curv {
                min_curv = c;
                argmin = sign * x;
            }
        }
        let inner = model.curvature(sign * 0.5 * r).unwrap_or(f64::NAN);
        let outer = model.curvature(sign * r).unwrap_or(f64::NAN);
        let exponent = (outer / inner).ln() / 2.0_f64.ln();
        if exponent < -0.01 {
            return AssumptionEntry {
                assumption: Assumption::A6,
                status: AssumptionStatus::ViolatedAt { x: sign * r },
                worst: Some(outer),
                note: format!("U'' decays like |x|^{exponent:.3} toward the edge"),
            };
        }
    }
    AssumptionEntry {
        assumption: Assumption::A6,
        status: AssumptionStatus::VerifiedOnGrid,
        worst: Some(min_curv),
        note: format!("min U'' = {min_curv} at {argmin}, M = {}", 0.5 * r),
    }
}

fn check_a7(model: &PotentialModel, grid: &GridSpec) -> AssumptionEntry {
    let mut worst = 0.0_f64;
    for x in grid.nonnegative() {
        let a = model.value(x);
        let b = model.value(-x);
        let d = (a - b).abs();
        if d > 1e-10 * a.abs().max(1.0) {
            return entry(Assumption::A7, AssumptionStatus::ViolatedAt { x }, Some(d), "U(x) != U(-x)");
        }
        worst = worst.max(d);
    }
    entry(Assumption::A7, AssumptionStatus::VerifiedOnGrid, Some(worst), "symmetric on grid")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * b.abs().max(1.0)
    }

    #[test]
    fn gaussian_values() {
        let g = PotentialModel::gaussian(1.0).unwrap();
        let d = g.evaluate(0.0).unwrap();
        assert_eq!((d.value, d.first, d.second), (0.0, 0.0, Some(1.0)));
        let d = g.evaluate(1.5).unwrap();
        assert_eq!((d.value, d.first, d.second), (1.125, 1.5, Some(1.0)));
        let g2 = PotentialModel::gaussian(2.0).unwrap();
        let d = g2.evaluate(2.0).unwrap();
        assert!(close(d.value, 0.5, 1e-15) && close(d.first, 0.5, 1e-15));
        assert!(close(d.second.unwrap(), 0.25, 1e-15));
    }

    #[test]
    fn beta_family_at_one() {
        let b = PotentialModel::beta_family(2.0).unwrap();
        let d = b.evaluate(1.0).unwrap();
        assert!(close(d.value, 0.5, 1e-15));
        assert!(close(d.first, 1.0, 1e-15));
        assert!(close(d.second.unwrap(), 1.0, 1e-15));
    }

    #[test]
    fn non_finite_argument_is_rejected() {
        let g = PotentialModel::gaussian(1.0).unwrap();
        assert!(matches!(g.evaluate(f64::NAN), Err(Error::Domain { .. })));
        assert!(g.evaluate(f64::INFINITY).is_err());
    }

    #[test]
    fn invalid_parameters() {
        assert!(PotentialModel::beta_family(1.0).is_err());
        assert!(PotentialModel::gaussian(0.0).is_err());
        assert!(PotentialModel::gaussian(1.0).unwrap().scale(-2.0).is_err());
    }

    #[test]
    fn switching_rate_examples() {
        let g = PotentialModel::gaussian(1.0).unwrap();
        let canon = SwitchingRateSpec::canonical();
        assert_eq!(switching_rate(&g, &canon, -1.0, Velocity::Plus), 0.0);
        assert_eq!(switching_rate(&g, &canon, -1.0, Velocity::Minus), 1.0);
        let refr = SwitchingRateSpec::with_refreshment(0.3).unwrap();
        assert_eq!(switching_rate(&g, &refr, 0.0, Velocity::Plus), 0.3);
    }

    #[test]
    fn rate_difference_is_slope() {
        let refr = SwitchingRateSpec::with_refreshment(0.7).unwrap();
        for m in [
            PotentialModel::gaussian(1.3).unwrap(),
            PotentialModel::beta_family(1.75).unwrap(),
            PotentialModel::beta_family(3.0).unwrap(),
        ] {
            for i in -40..=40 {
                let x = i as f64 * 0.25;
                let d = switching_rate(&m, &refr, x, Velocity::Plus) - switching_rate(&m, &refr, x, Velocity::Minus);
                assert!((d - m.slope(x)).abs() <= 1e-12 * m.slope(x).abs().max(1.0));
            }
        }
    }

    #[test]
    fn beta_derivatives_match_finite_differences() {
        let h = 1e-4;
        for beta in [1.25, 1.75, 2.5, 4.0] {
            let m = PotentialModel::beta_family(beta).unwrap();
            for i in -100..=100 {
                let x = i as f64 * 0.1;
                let fd1 = (m.value(x + h) - m.value(x - h)) / (2.0 * h);
                let fd2 = (m.slope(x + h) - m.slope(x - h)) / (2.0 * h);
                let d1 = m.slope(x);
                let d2 = m.curvature(x).unwrap();
                assert!((fd1 - d1).abs() <= 1e-6 * d1.abs().max(1e-2), "beta {beta} x {x}");
                assert!((fd2 - d2).abs() <= 1e-6 * d2.abs(), "beta {beta} x {x}");
            }
        }
    }

    #[test]
    fn scaling_examples() {
        let g = PotentialModel::gaussian(1.0).unwrap();
        assert!(close(g.scale(2.0).unwrap().value(2.0), 0.5, 1e-15));
        let b = PotentialModel::beta_family(2.0).unwrap();
        let b3 = b.scale(3.0).unwrap();
        assert_eq!(b3.value(3.0), b.value(1.0));
        let b1 = b.scale(1.0).unwrap();
        for x in [-2.0, 0.3, 7.0] {
            assert_eq!(b1.evaluate(x).unwrap(), b.evaluate(x).unwrap());
        }
        for s in [0.5, 2.0, 3.7] {
            let m = PotentialModel::beta_family(2.5).unwrap();
            let ms = m.scale(s).unwrap();
            for x in [-3.0, -0.2, 1.1, 5.0] {
                assert!(close(ms.slope(x), m.slope(x / s) / s, 1e-14));
            }
        }
    }

    #[test]
    fn custom_potential_is_anchored() {
        let c = CustomPotential::new(
            "shifted quartic",
            Arc::new(|x: f64| x.powi(4) / 4.0 + 3.0),
            Arc::new(|x: f64| x.powi(3)),
        );
        let m = PotentialModel::custom(c);
        assert_eq!(m.value(0.0), 0.0);
        assert_eq!(m.value(2.0), 4.0);
        assert_eq!(m.curvature(1.0), None);
        assert!(!m.is_symmetric());
    }

    #[test]
    fn complex_evaluation_agrees_on_real_axis() {
        for m in [PotentialModel::gaussian(1.7).unwrap(), PotentialModel::beta_family(1.75).unwrap()] {
            for x in [0.0, 0.3, 2.0, 11.0] {
                let z = Complex64::new(x, 0.0);
                assert!((m.value_complex(z).unwrap().re - m.value(x)).abs() < 1e-12 * m.value(x).max(1.0));
                assert!((m.slope_complex(z).unwrap().re - m.slope(x)).abs() < 1e-12 * m.slope(x).max(1.0));
                assert!((m.curvature_complex(z).unwrap().re - m.curvature(x).unwrap()).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn descriptors_parse() {
        let g: PotentialModel = "gaussian:2".parse().unwrap();
        assert!(g.is_gaussian() && g.sigma() == 2.0);
        let b: PotentialModel = "beta:2.5".parse().unwrap();
        assert!(matches!(b.family(), Family::Beta { beta } if *beta == 2.5));
        let bs: PotentialModel = "beta:1.75@3".parse().unwrap();
        assert_eq!(bs.sigma(), 3.0);
        assert_eq!(bs.descriptor().parse::<PotentialModel>().unwrap().descriptor(), bs.descriptor());
        assert!("cauchy:1".parse::<PotentialModel>().is_err());
        assert!("gaussian".parse::<PotentialModel>().is_err());
        assert!("beta:x".parse::<PotentialModel>().is_err());
    }

    #[test]
    fn assumptions_gaussian() {
        let g = PotentialModel::gaussian(1.0).unwrap();
        let report = check_assumptions(&g, GridSpec::new(20.0, 0.05).unwrap());
        assert!(report.all_verified(), "{report:?}");
    }

    #[test]
    fn assumptions_beta_family() {
        let grid = GridSpec::new(20.0, 0.05).unwrap();
        let light = check_assumptions(&PotentialModel::beta_family(2.5).unwrap(), grid);
        assert_eq!(light.get(Assumption::A6).status, AssumptionStatus::VerifiedOnGrid);
        let heavy = check_assumptions(&PotentialModel::beta_family(1.75).unwrap(), grid);
        match heavy.get(Assumption::A6).status {
            AssumptionStatus::ViolatedAt { x } => assert!(x.abs() >= 10.0),
            s => panic!("expected violation, got {s:?}"),
        }
        assert_eq!(heavy.get(Assumption::A2).status, AssumptionStatus::VerifiedOnGrid);
        assert_eq!(heavy.get(Assumption::A5).status, AssumptionStatus::VerifiedOnGrid);
        assert_eq!(heavy.get(Assumption::A7).status, AssumptionStatus::VerifiedOnGrid);
    }

    #[test]
    fn assumptions_custom_without_curvature() {
        let c = CustomPotential::new("quartic", Arc::new(|x: f64| x.powi(4)), Arc::new(|x: f64| 4.0 * x.powi(3)));
        let report = check_assumptions(&PotentialModel::custom(c), GridSpec::new(5.0, 0.01).unwrap());
        assert_eq!(report.get(Assumption::A1).status, AssumptionStatus::NotChecked);
        assert_eq!(report.get(Assumption::A6).status, AssumptionStatus::NotChecked);
        assert_eq!(report.get(Assumption::A3).status, AssumptionStatus::VerifiedOnGrid);
    }

    #[test]
    fn violated_entries_carry_witnesses() {
        // not unimodal, not symmetric
        let c = CustomPotential::new(
            "tilted double well",
            Arc::new(|x: f64| (x * x - 1.0).powi(2) + 0.1 * x),
            Arc::new(|x: f64| 4.0 * x * (x * x - 1.0) + 0.1),
        )
        .with_curvature(Arc::new(|x: f64| 12.0 * x * x - 4.0));
        let report = check_assumptions(&PotentialModel::custom(c), GridSpec::new(4.0, 0.01).unwrap());
        assert!(matches!(report.get(Assumption::A3).status, AssumptionStatus::ViolatedAt { .. }));
        assert!(matches!(report.get(Assumption::A7).status, AssumptionStatus::ViolatedAt { .. }));
        let rates = SwitchingRateSpec::with_refreshment(0.5).unwrap();
        let g = PotentialModel::gaussian(1.0).unwrap();
        let r = check_assumptions_with_rates(&g, &rates, GridSpec::new(5.0, 0.1).unwrap());
        assert!(matches!(r.get(Assumption::A4).status, AssumptionStatus::ViolatedAt { .. }));
    }
}
