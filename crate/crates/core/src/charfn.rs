//! The functions `psi_+`, `psi_-` and the characteristic functions
//! `Z = 1 - psi_+ psi_-` and `Z_+- = 1 -+ psi_+` whose zeros are the
//! eigenvalues of the generator.
//!
//! With `u(eta) = U(eta)` on the plus side and `u(eta) = U(-eta)` on the
//! minus side, both reduce to the same one-sided quantities
//!
//! ```text
//! J0 = int_0^inf e^{-2 gamma eta - u(eta)} d eta
//! J1 = int_0^inf eta e^{-2 gamma eta - u(eta)} d eta
//! psi = 1 - 2 gamma J0,     psi' = -2 J0 + 4 gamma J1
//! ```
//!
//! For `Re gamma < 0` the real-axis integrand grows like `e^{2 |Re gamma| eta}`
//! before `e^{-U}` takes over, and the result is far smaller than its peak.
//! Builtin families are holomorphic in the right half-plane, so the contour
//! is moved through the saddle point of the exponent instead.

use core::fmt;

use num_complex::Complex64;
#[allow(unused_imports)] // shadowed by inherent methods when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::potential::{Direction, PotentialModel};
use crate::quadrature::{integrate_oscillatory, integrate_semiinfinite, DecayProfile, QuadratureConfig};
use crate::specialfn::erfcx_complex;

const SQRT_2PI: f64 = 2.5066282746310002;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Sign {
    Plus,
    Minus,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Branch {
    Full,
    Plus,
    Minus,
}

impl Branch {
    pub fn name(self) -> &'static str {
        match self {
            Branch::Full => "full",
            Branch::Plus => "plus",
            Branch::Minus => "minus",
        }
    }
}

impl fmt::Display for Branch {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Backend {
    Quadrature,
    GaussianClosedForm,
}

/// `psi(gamma)`, `psi'(gamma)` and an error estimate for both.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PsiEval {
    pub value: Complex64,
    pub derivative: Complex64,
    pub error: f64,
}

/// `Z(gamma)`, `Z'(gamma)` and an error estimate for the value.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZEval {
    pub value: Complex64,
    pub derivative: Complex64,
    pub error: f64,
}

/// `psi_+` for the unit Gaussian: `1 - sqrt(2 pi) gamma erfcx(sqrt 2 gamma)`.
pub fn gaussian_closed_form_psi(gamma: Complex64) -> Complex64 {
    1.0 - SQRT_2PI * gamma * erfcx_complex(core::f64::consts::SQRT_2 * gamma)
}

/// Derivative of [`gaussian_closed_form_psi`]:
/// `4 gamma - sqrt(2 pi) (1 + 4 gamma^2) erfcx(sqrt 2 gamma)`.
pub fn gaussian_closed_form_psi_derivative(gamma: Complex64) -> Complex64 {
    let e = erfcx_complex(core::f64::consts::SQRT_2 * gamma);
    4.0 * gamma - SQRT_2PI * (1.0 + 4.0 * gamma * gamma) * e
}

fn gaussian_psi(model: &PotentialModel, gamma: Complex64) -> PsiEval {
    let s = model.sigma();
    let g = gamma * s;
    PsiEval { value: gaussian_closed_form_psi(g), derivative: s * gaussian_closed_form_psi_derivative(g), error: 0.0 }
}

/// One-sided integrals `[J0, J1, D]` with `D = int u' e^{...}` (the defining form).
#[derive(Clone, Copy, Debug)]
struct SideIntegrals {
    j: [Complex64; 3],
    error: f64,
}

fn side_potential(model: &PotentialModel, sign: Sign, eta: f64) -> (f64, f64) {
    match sign {
        Sign::Plus => (model.value(eta), model.slope(eta)),
        Sign::Minus => (model.value(-eta), -model.slope(-eta)),
    }
}

fn real_axis(model: &PotentialModel, sign: Sign, gamma: Complex64, cfg: &QuadratureConfig) -> Result<SideIntegrals> {
    let two_g = 2.0 * gamma;
    let integrand = |eta: f64| {
        let (u, du) = side_potential(model, sign, eta);
        let e = (-two_g * eta - u).exp();
        [e, e * eta, e * du]
    };
    let profile = DecayProfile::new(
        |eta: f64| {
            let (u, du) = side_potential(model, sign, eta);
            -two_g.re * eta - u + eta.ln_1p() + du.abs().ln_1p()
        },
        two_g.im,
        Direction::Positive,
    );
    let est = integrate_semiinfinite(integrand, 0.0, &profile, cfg)?;
    Ok(SideIntegrals { j: est.value, error: est.error })
}

/// Saddle point of `-2 gamma xi - U(xi)` in the open right half-plane, or a
/// substitute bend point when there is none.
pub(crate) fn saddle(model: &PotentialModel, gamma: Complex64) -> Option<Complex64> {
    let s = model.sigma();
    let target = -2.0 * gamma;
    if model.is_gaussian() {
        return Some(target * s * s);
    }
    let beta = match model.family() {
        crate::potential::Family::Beta { beta } => *beta,
        _ => return None,
    };
    // U'(xi) ~ (xi/s)^{beta-1} / s for large |xi|
    let mut z = (target * s).powf(1.0 / (beta - 1.0)) * s;
    for _ in 0..60 {
        let f = model.slope_complex(z)? - target;
        let df = model.curvature_complex(z)?;
        let step = f / df;
        let mut next = z - step;
        if next.re <= 0.0 {
            next = Complex64::new(0.5 * z.re, next.im);
        }
        if (next - z).norm() <= 1e-13 * z.norm() {
            z = next;
            break;
        }
        z = next;
    }
    let resid = (model.slope_complex(z)? - target).norm();
    if z.re > 0.0 && z.is_finite() && resid <= 1e-8 * target.norm().max(1.0) {
        return Some(z);
    }
    // The saddle lies left of the imaginary axis (beta < 2, Im gamma large):
    // keep the height of the large-xi guess but stay in the right half-plane,
    // clear of the branch cuts on the imaginary axis.
    let guess = (target * s).powf(1.0 / (beta - 1.0)) * s;
    (guess.is_finite() && guess.re > -guess.im.abs())
        .then(|| Complex64::new(guess.re.max(0.25 * guess.norm()), guess.im))
}

/// Contour `0 -> p -> p + inf` through (or towards) the saddle point.
fn bent_path(model: &PotentialModel, gamma: Complex64, cfg: &QuadratureConfig) -> Option<Result<SideIntegrals>> {
    let p = saddle(model, gamma)?;
    let two_g = 2.0 * gamma;
    let slope = |z: Complex64| model.slope_complex(z).unwrap_or(Complex64::new(f64::NAN, 0.0));
    let value = |z: Complex64| model.value_complex(z).unwrap_or(Complex64::new(f64::NAN, 0.0));
    let point = |z: Complex64, dz: Complex64| {
        let e = (-two_g * z - value(z)).exp() * dz;
        [e, e * z, e * slope(z)]
    };
    let run = || -> Result<SideIntegrals> {
        let omega = (two_g * p).norm() + (p * slope(p)).norm();
        let seg = integrate_oscillatory(|s: f64| point(p * s, p), 0.0, 1.0, omega, cfg)?;
        let profile = DecayProfile::new(
            |t: f64| {
                let z = p + t;
                (-two_g * z - value(z)).re + z.norm().ln_1p() + slope(z).norm().ln_1p()
            },
            two_g.im,
            Direction::Positive,
        );
        let tail = integrate_semiinfinite(|t: f64| point(p + t, Complex64::new(1.0, 0.0)), 0.0, &profile, cfg)?;
        let mut j = seg.value;
        for (a, b) in j.iter_mut().zip(tail.value) {
            *a += b;
        }
        Ok(SideIntegrals { j, error: seg.error + tail.error })
    };
    Some(run())
}

fn side_integrals(
    model: &PotentialModel,
    sign: Sign,
    gamma: Complex64,
    cfg: &QuadratureConfig,
) -> Result<SideIntegrals> {
    // Builtin families are even, so both sides share one contour.
    if gamma.re < 0.0 && model.is_analytic() {
        // a failed contour falls back to the real axis
        if let Some(Ok(r)) = bent_path(model, gamma, cfg) {
            return Ok(r);
        }
    }
    real_axis(model, sign, gamma, cfg)
}

fn psi_from_sides(gamma: Complex64, s: &SideIntegrals) -> PsiEval {
    let [j0, j1, _] = s.j;
    PsiEval {
        value: 1.0 - 2.0 * gamma * j0,
        derivative: -2.0 * j0 + 4.0 * gamma * j1,
        error: 2.0 * gamma.norm().max(1.0) * s.error,
    }
}

/// `psi_+-(gamma)` and its derivative by quadrature of the partially
/// integrated form.
pub fn psi_eval(model: &PotentialModel, sign: Sign, gamma: Complex64, cfg: &QuadratureConfig) -> Result<PsiEval> {
    check_gamma(gamma)?;
    Ok(psi_from_sides(gamma, &side_integrals(model, sign, gamma, cfg)?))
}

pub fn psi(model: &PotentialModel, sign: Sign, gamma: Complex64, cfg: &QuadratureConfig) -> Result<Complex64> {
    psi_eval(model, sign, gamma, cfg).map(|p| p.value)
}

pub fn psi_derivative(
    model: &PotentialModel,
    sign: Sign,
    gamma: Complex64,
    cfg: &QuadratureConfig,
) -> Result<Complex64> {
    psi_eval(model, sign, gamma, cfg).map(|p| p.derivative)
}

/// Evaluates both the defining integral `int u' e^{-2 gamma eta - u}` and the
/// partially integrated form, failing if they disagree beyond their
/// combined error estimates.
pub fn psi_checked(model: &PotentialModel, sign: Sign, gamma: Complex64, cfg: &QuadratureConfig) -> Result<PsiEval> {
    check_gamma(gamma)?;
    let sides = side_integrals(model, sign, gamma, cfg)?;
    let eval = psi_from_sides(gamma, &sides);
    let defining = sides.j[2];
    let tolerance =
        10.0 * (eval.error + sides.error) + 10.0 * cfg.rel_tol * eval.value.norm().max(defining.norm()).max(1.0);
    if (eval.value - defining).norm() > tolerance {
        return Err(Error::Inconsistent {
            what: "psi: defining vs integrated form",
            a: defining,
            b: eval.value,
            tolerance,
        });
    }
    Ok(eval)
}

fn check_gamma(gamma: Complex64) -> Result<()> {
    if gamma.re.is_finite() && gamma.im.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "spectral parameter", value: if gamma.re.is_finite() { gamma.im } else { gamma.re } })
    }
}

/// A characteristic function bound to a potential, a branch and a backend.
#[derive(Clone, Debug)]
pub struct CharFunctionHandle {
    model: PotentialModel,
    branch: Branch,
    backend: Backend,
    cfg: QuadratureConfig,
}

impl CharFunctionHandle {
    /// Uses the closed form for Gaussian potentials, quadrature otherwise.
    pub fn new(model: PotentialModel, branch: Branch, cfg: QuadratureConfig) -> Result<Self> {
        let backend = if model.is_gaussian() { Backend::GaussianClosedForm } else { Backend::Quadrature };
        Self::with_backend(model, branch, backend, cfg)
    }

    pub fn with_backend(
        model: PotentialModel,
        branch: Branch,
        backend: Backend,
        cfg: QuadratureConfig,
    ) -> Result<Self> {
        cfg.validate()?;
        if backend == Backend::GaussianClosedForm && !model.is_gaussian() {
            return Err(Error::Domain { what: "closed-form backend needs a Gaussian potential", value: f64::NAN });
        }
        if branch != Branch::Full && !model.is_symmetric() {
            return Err(Error::Domain { what: "branch decomposition needs a symmetric potential", value: f64::NAN });
        }
        Ok(Self { model, branch, backend, cfg })
    }

    pub fn model(&self) -> &PotentialModel {
        &self.model
    }

    pub fn branch(&self) -> Branch {
        self.branch
    }

    pub fn backend(&self) -> Backend {
        self.backend
    }

    pub fn config(&self) -> &QuadratureConfig {
        &self.cfg
    }

    pub fn with_branch(&self, branch: Branch) -> Result<Self> {
        Self::with_backend(self.model.clone(), branch, self.backend, self.cfg)
    }

    /// `(psi_+, psi_-)` at `gamma`.
    pub fn psi_pair(&self, gamma: Complex64) -> Result<(PsiEval, PsiEval)> {
        check_gamma(gamma)?;
        let plus = match self.backend {
            Backend::GaussianClosedForm => gaussian_psi(&self.model, gamma),
            Backend::Quadrature => psi_eval(&self.model, Sign::Plus, gamma, &self.cfg)?,
        };
        let minus =
            if self.model.is_symmetric() { plus } else { psi_eval(&self.model, Sign::Minus, gamma, &self.cfg)? };
        Ok((plus, minus))
    }

    pub fn eval(&self, gamma: Complex64) -> Result<ZEval> {
        let (p, m) = self.psi_pair(gamma)?;
        Ok(match self.branch {
            Branch::Full => ZEval {
                value: 1.0 - p.value * m.value,
                derivative: -(p.derivative * m.value + p.value * m.derivative),
                error: p.error * m.value.norm() + m.error * p.value.norm(),
            },
            Branch::Plus => ZEval { value: 1.0 - p.value, derivative: -p.derivative, error: p.error },
            Branch::Minus => ZEval { value: 1.0 + p.value, derivative: p.derivative, error: p.error },
        })
    }

    pub fn z_value(&self, gamma: Complex64) -> Result<Complex64> {
        self.eval(gamma).map(|z| z.value)
    }

    pub fn z_derivative(&self, gamma: Complex64) -> Result<Complex64> {
        self.eval(gamma).map(|z| z.derivative)
    }

    /// `Z'(gamma) / Z(gamma)`.
    pub fn z_log_derivative(&self, gamma: Complex64) -> Result<Complex64> {
        let z = self.eval(gamma)?;
        log_derivative(gamma, z.value, z.derivative)
    }
}

pub(crate) fn log_derivative(at: Complex64, value: Complex64, derivative: Complex64) -> Result<Complex64> {
    let modulus = value.norm();
    if modulus < 1e-14 {
        return Err(Error::NearZeroDivision { at, modulus });
    }
    Ok(derivative / value)
}
