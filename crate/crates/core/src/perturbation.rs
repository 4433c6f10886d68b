//! First-order eigenvalue shifts under a small constant refreshment rate
//! `eps`, i.e. the perturbation `L + eps B` with `B = F - I` (and
//! `B+- = +-J - I` on the branches of a symmetric potential).
//!
//! Only the first-order coefficient is computed; the `o(eps)` remainder is
//! not modelled.

use alloc::vec::Vec;

use num_complex::Complex64;

use crate::charfn::{Branch, CharFunctionHandle};
use crate::error::{Error, Result};
use crate::operator::{eigenfunction, OperatorConfig, Variant};
use crate::potential::PotentialModel;
use crate::spectrum::{Eigenvalue, SpectrumResult, ZERO_TOL};

type C = Complex64;

fn check_simple(model: &PotentialModel, gamma: C, branch: Branch, cfg: &OperatorConfig) -> Result<()> {
    let handle = CharFunctionHandle::new(model.clone(), branch, cfg.quadrature)?;
    let derivative = handle.z_derivative(gamma)?.norm();
    if derivative <= cfg.simple_tol {
        return Err(Error::NonSimpleEigenvalue { gamma, derivative });
    }
    Ok(())
}

/// Coefficient and condition number `||f||^2 / |<f, F conj f>|`.
fn coefficient_with_condition(
    model: &PotentialModel,
    gamma: C,
    branch: Branch,
    cfg: &OperatorConfig,
) -> Result<(C, f64)> {
    let sign = match branch {
        Branch::Full | Branch::Plus => 1.0,
        Branch::Minus => -1.0,
    };
    check_simple(model, gamma, branch, cfg)?;
    let f = eigenfunction(model, gamma, Variant::from_branch(branch), cfg)?;
    let pairing = f.flip_norm()?;
    Ok((sign * f.square_norm()? / pairing - 1.0, f.magnitude()? / pairing.norm()))
}

/// `<B f, F conj f> / <f, F conj f> = <f, conj f> / <f, F conj f> - 1`.
pub fn refreshment_coefficient(model: &PotentialModel, gamma: C, cfg: &OperatorConfig) -> Result<C> {
    coefficient_with_condition(model, gamma, Branch::Full, cfg).map(|(c, _)| c)
}

/// `+-<f, conj f> / <f, J conj f> - 1` in `L^2(nu)` for the branch eigenfunction.
pub fn refreshment_coefficient_symmetric(
    model: &PotentialModel,
    gamma: C,
    branch: Branch,
    cfg: &OperatorConfig,
) -> Result<C> {
    if branch == Branch::Full {
        return Err(Error::Domain { what: "symmetric refreshment needs a branch", value: f64::NAN });
    }
    coefficient_with_condition(model, gamma, branch, cfg).map(|(c, _)| c)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PerturbedEigenvalue {
    pub base: Eigenvalue,
    /// First-order coefficient; `None` when it could not be resolved.
    pub coefficient: Option<C>,
    /// `gamma + eps * coefficient`.
    pub shifted: Option<C>,
    /// `||f||^2 / |<f, F conj f>|`; the coefficient loses about
    /// `log10(condition)` digits to cancellation.
    pub condition: Option<f64>,
    pub unresolved: Option<Error>,
}

#[derive(Clone, Debug)]
pub struct PerturbedSpectrum {
    pub base: SpectrumResult,
    pub epsilon: f64,
    pub entries: Vec<PerturbedEigenvalue>,
}

impl PerturbedSpectrum {
    /// Same first-order coefficients, shifts recomputed for another `eps`.
    pub fn with_epsilon(&self, epsilon: f64) -> Result<Self> {
        check_epsilon(epsilon)?;
        let entries = self
            .entries
            .iter()
            .map(|e| PerturbedEigenvalue { shifted: e.coefficient.map(|c| e.base.gamma + epsilon * c), ..e.clone() })
            .collect();
        Ok(Self { base: self.base.clone(), epsilon, entries })
    }

    /// `-max Re` of the shifted nonzero eigenvalues, if all are resolved.
    pub fn gap(&self) -> Option<f64> {
        let mut best: Option<f64> = None;
        for e in self.entries.iter().filter(|e| e.base.gamma.norm() > ZERO_TOL) {
            let re = e.shifted?.re;
            best = Some(best.map_or(re, |b| b.max(re)));
        }
        best.map(|re| -re)
    }

    pub fn unresolved(&self) -> impl Iterator<Item = &PerturbedEigenvalue> {
        self.entries.iter().filter(|e| e.coefficient.is_none())
    }
}

fn check_epsilon(epsilon: f64) -> Result<()> {
    if epsilon >= 0.0 && epsilon.is_finite() {
        Ok(())
    } else {
        Err(Error::Domain { what: "refreshment rate", value: epsilon })
    }
}

fn coefficient_for(model: &PotentialModel, e: &Eigenvalue, cfg: &OperatorConfig) -> Result<(C, f64)> {
    if e.multiplicity > 1 {
        return Err(Error::NonSimpleEigenvalue { gamma: e.gamma, derivative: 0.0 });
    }
    if e.gamma == C::new(0.0, 0.0) {
        // f_0 = 1 and B1 = 0.
        return Ok((C::new(0.0, 0.0), 1.0));
    }
    coefficient_with_condition(model, e.gamma, e.branch, cfg)
}

/// First-order shifts of every eigenvalue of `base`. Eigenvalues that are
/// not simple (or whose coefficient fails) are kept and marked unresolved.
pub fn perturbed_spectrum(base: &SpectrumResult, epsilon: f64, cfg: &OperatorConfig) -> Result<PerturbedSpectrum> {
    check_epsilon(epsilon)?;
    let entries = base
        .eigenvalues
        .iter()
        .map(|e| match coefficient_for(&base.model, e, cfg) {
            Ok((c, k)) => PerturbedEigenvalue {
                base: *e,
                coefficient: Some(c),
                shifted: Some(e.gamma + epsilon * c),
                condition: Some(k),
                unresolved: None,
            },
            Err(err) => PerturbedEigenvalue {
                base: *e,
                coefficient: None,
                shifted: None,
                condition: None,
                unresolved: Some(err),
            },
        })
        .collect();
    Ok(PerturbedSpectrum { base: base.clone(), epsilon, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rootfinder::{newton_polish, ComplexRegion};
    use crate::spectrum::{compute_spectrum, SpectrumConfig};

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn gauss() -> PotentialModel {
        PotentialModel::gaussian(1.0).unwrap()
    }

    fn polished(model: &PotentialModel, branch: Branch, guess: C) -> C {
        let handle = CharFunctionHandle::new(model.clone(), branch, Default::default()).unwrap();
        newton_polish(&handle, guess, &Default::default()).unwrap().root
    }

    #[test]
    fn trivial_coefficient_at_zero() {
        let cfg = OperatorConfig::default();
        assert!(refreshment_coefficient(&gauss(), c(0.0, 0.0), &cfg).unwrap().norm() <= 1e-10);
        let plus = refreshment_coefficient_symmetric(&gauss(), c(0.0, 0.0), Branch::Plus, &cfg).unwrap();
        assert!(plus.norm() <= 1e-10);
        let beta = PotentialModel::beta_family(2.5).unwrap();
        assert!(refreshment_coefficient(&beta, c(0.0, 0.0), &cfg).unwrap().norm() <= 1e-10);
    }

    #[test]
    fn conjugate_pairs_and_sign() {
        let cfg = OperatorConfig::default();
        let model = gauss();
        let gamma = polished(&model, Branch::Minus, c(-0.425665, 1.02295));
        let a = refreshment_coefficient(&model, gamma, &cfg).unwrap();
        let b = refreshment_coefficient(&model, gamma.conj(), &cfg).unwrap();
        assert!((a.conj() - b).norm() <= 1e-8);
        assert!(a.re < 0.0, "{a}");
        let s = refreshment_coefficient_symmetric(&model, gamma, Branch::Minus, &cfg).unwrap();
        assert!((s - a).norm() <= 1e-6 * a.norm(), "{s} {a}");
    }

    #[test]
    fn formulations_agree_on_both_branches() {
        let cfg = OperatorConfig::default();
        for model in [gauss(), PotentialModel::beta_family(2.5).unwrap()] {
            for (guess, branch) in [(c(-0.43, 1.02), Branch::Minus), (c(-0.96, 1.41), Branch::Plus)] {
                let gamma = polished(&model, branch, guess);
                let a = refreshment_coefficient(&model, gamma, &cfg).unwrap();
                let s = refreshment_coefficient_symmetric(&model, gamma, branch, &cfg).unwrap();
                assert!((s - a).norm() <= 1e-6 * a.norm(), "{s} {a}");
            }
        }
    }

    #[test]
    fn full_branch_is_rejected_by_symmetric_form() {
        let cfg = OperatorConfig::default();
        assert!(refreshment_coefficient_symmetric(&gauss(), c(0.0, 0.0), Branch::Full, &cfg).is_err());
    }

    #[test]
    fn perturbed_gaussian_spectrum() {
        let model = gauss();
        let scfg =
            SpectrumConfig { region: Some(ComplexRegion::new(-1.1, 0.1, -1.6, 1.6).unwrap()), ..Default::default() };
        let base = compute_spectrum(&model, &scfg).unwrap();
        let cfg = OperatorConfig::default();
        let p = perturbed_spectrum(&base, 0.1, &cfg).unwrap();
        assert_eq!(p.unresolved().count(), 0);
        let zero = p.entries.iter().find(|e| e.base.gamma.norm() == 0.0).unwrap();
        assert_eq!(zero.shifted, Some(c(0.0, 0.0)));
        assert!(p.gap().unwrap() >= base.gap.unwrap() - 1e-9);
        for e in &p.entries {
            let partner = p.entries.iter().find(|o| o.base.gamma == e.base.gamma.conj()).unwrap();
            assert!((e.coefficient.unwrap().conj() - partner.coefficient.unwrap()).norm() <= 1e-8);
            // Cauchy-Schwarz: |<f, F conj f>| <= ||f||^2
            assert!(e.condition.unwrap() >= 1.0 - 1e-6);
        }
        let p0 = p.with_epsilon(0.0).unwrap();
        for e in &p0.entries {
            assert_eq!(e.shifted, Some(e.base.gamma));
        }
        assert!(perturbed_spectrum(&base, -1.0, &cfg).is_err());
    }

    #[test]
    fn non_simple_entry_is_marked() {
        let model = gauss();
        let mut base = compute_spectrum(
            &model,
            &SpectrumConfig { region: Some(ComplexRegion::new(-0.5, 0.1, -1.2, 1.2).unwrap()), ..Default::default() },
        )
        .unwrap();
        base.eigenvalues[1].multiplicity = 2;
        let p = perturbed_spectrum(&base, 0.1, &OperatorConfig::default()).unwrap();
        assert_eq!(p.unresolved().count(), 1);
        assert!(matches!(p.entries[1].unresolved, Some(Error::NonSimpleEigenvalue { .. })));
        assert!(p.gap().is_none());
    }
}
