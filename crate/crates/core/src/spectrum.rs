//! Spectrum assembly: search region, per-branch root finding, labels and
//! the spectral gap.

use alloc::string::String;
use alloc::vec::Vec;

use num_complex::Complex64;

use crate::charfn::{Backend, Branch, CharFunctionHandle};
use crate::error::{Error, Result};
use crate::potential::PotentialModel;
use crate::quadrature::QuadratureConfig;
use crate::rootfinder::{locate_zeros, ComplexRegion, RootConfig};

/// Eigenvalues closer than this to the origin are the zero eigenvalue.
pub const ZERO_TOL: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectrumConfig {
    /// Search region; derived from the potential when absent.
    pub region: Option<ComplexRegion>,
    /// Left edge of the automatic region; `-4 / sigma` when absent.
    pub re_min: Option<f64>,
    pub re_max: f64,
    /// Imaginary half-height of the automatic region; scanned when absent.
    pub im_max: Option<f64>,
    /// Split symmetric potentials into the plus and minus branches.
    pub use_branches: bool,
    pub backend: Option<Backend>,
    pub quadrature: QuadratureConfig,
    pub roots: RootConfig,
}

impl Default for SpectrumConfig {
    fn default() -> Self {
        Self {
            region: None,
            re_min: None,
            re_max: 0.1,
            im_max: None,
            use_branches: true,
            backend: None,
            quadrature: QuadratureConfig::default(),
            roots: RootConfig::default(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Eigenvalue {
    pub gamma: Complex64,
    pub branch: Branch,
    pub multiplicity: u32,
    /// `|Z(gamma)|` for the branch function.
    pub residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct BranchDiagnostics {
    pub branch: Branch,
    pub region: ComplexRegion,
    pub winding: i64,
    pub splits_checked: usize,
    pub evaluations: usize,
    /// Largest quadrature error estimate of `Z` at a reported root.
    pub error_budget: f64,
}

#[derive(Clone, Debug)]
pub struct SpectrumResult {
    /// Sorted by descending real part, then ascending imaginary part.
    pub eigenvalues: Vec<Eigenvalue>,
    pub gap: Option<f64>,
    pub region: ComplexRegion,
    pub potential: String,
    pub model: PotentialModel,
    pub branches: Vec<BranchDiagnostics>,
}

impl SpectrumResult {
    pub fn from_eigenvalues(
        model: PotentialModel,
        region: ComplexRegion,
        mut eigenvalues: Vec<Eigenvalue>,
        branches: Vec<BranchDiagnostics>,
    ) -> Self {
        for e in &mut eigenvalues {
            // The zero eigenvalue is exact; Newton may leave rounding noise.
            if e.gamma.norm() < 1e-12 {
                e.gamma = Complex64::new(0.0, 0.0);
            }
        }
        symmetrize_pairs(&mut eigenvalues);
        eigenvalues.sort_by(|a, b| {
            b.gamma.re.total_cmp(&a.gamma.re).then(a.gamma.im.total_cmp(&b.gamma.im)).then(a.branch.cmp(&b.branch))
        });
        let gap = gap_of(&eigenvalues);
        Self { eigenvalues, gap, region, potential: model.descriptor(), model, branches }
    }

    pub fn nonzero(&self) -> impl Iterator<Item = &Eigenvalue> {
        self.eigenvalues.iter().filter(|e| e.gamma.norm() > ZERO_TOL)
    }

    pub fn zero(&self) -> Option<&Eigenvalue> {
        self.eigenvalues.iter().find(|e| e.gamma.norm() <= ZERO_TOL)
    }

    /// Every eigenvalue has a partner within `tol` of its conjugate.
    pub fn is_conjugate_closed(&self, tol: f64) -> bool {
        self.eigenvalues.iter().all(|e| {
            self.eigenvalues
                .iter()
                .any(|o| (o.gamma - e.gamma.conj()).norm() <= tol && o.multiplicity == e.multiplicity)
        })
    }

    /// `e^{gamma t}` for every eigenvalue, in result order.
    pub fn exponential_images(&self, t: f64) -> Vec<Complex64> {
        self.eigenvalues.iter().map(|e| (e.gamma * t).exp()).collect()
    }
}

/// Replaces conjugate pairs found in separate boxes by exactly conjugate
/// values, so that ordering by real part does not depend on rounding.
fn symmetrize_pairs(eigenvalues: &mut [Eigenvalue]) {
    let n = eigenvalues.len();
    let mut paired = alloc::vec![false; n];
    for i in 0..n {
        if paired[i] || eigenvalues[i].gamma.im <= 0.0 {
            continue;
        }
        let target = eigenvalues[i].gamma.conj();
        let partner = (0..n)
            .filter(|&j| j != i && !paired[j] && eigenvalues[j].branch == eigenvalues[i].branch)
            .min_by(|&a, &b| (eigenvalues[a].gamma - target).norm().total_cmp(&(eigenvalues[b].gamma - target).norm()));
        if let Some(j) = partner {
            let tol = 1e-8 * target.norm().max(1.0);
            if (eigenvalues[j].gamma - target).norm() <= tol {
                let re = 0.5 * (eigenvalues[i].gamma.re + eigenvalues[j].gamma.re);
                let im = 0.5 * (eigenvalues[i].gamma.im - eigenvalues[j].gamma.im);
                eigenvalues[i].gamma = Complex64::new(re, im);
                eigenvalues[j].gamma = Complex64::new(re, -im);
                paired[i] = true;
                paired[j] = true;
            }
        }
    }
}

fn gap_of(eigenvalues: &[Eigenvalue]) -> Option<f64> {
    eigenvalues
        .iter()
        .filter(|e| e.gamma.norm() > ZERO_TOL)
        .map(|e| e.gamma.re)
        .fold(None, |m: Option<f64>, re| Some(m.map_or(re, |m| m.max(re))))
        .map(|re| -re)
}

/// `kappa = -max Re gamma` over nonzero eigenvalues.
pub fn spectral_gap(result: &SpectrumResult) -> Result<f64> {
    gap_of(&result.eigenvalues).ok_or(Error::GapUndetermined)
}

/// Spectrum of the model rescaled by `sigma`, from a spectrum at the
/// original scale: every eigenvalue is divided by `sigma`.
pub fn rescale_spectrum(result: &SpectrumResult, sigma: f64) -> Result<SpectrumResult> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(Error::Domain { what: "rescaling factor", value: sigma });
    }
    let scale_region = |r: &ComplexRegion| ComplexRegion {
        re_min: r.re_min / sigma,
        re_max: r.re_max / sigma,
        im_min: r.im_min / sigma,
        im_max: r.im_max / sigma,
        density: r.density * sigma,
    };
    let eigenvalues = result.eigenvalues.iter().map(|e| Eigenvalue { gamma: e.gamma / sigma, ..*e }).collect();
    let branches =
        result.branches.iter().map(|b| BranchDiagnostics { region: scale_region(&b.region), ..b.clone() }).collect();
    Ok(SpectrumResult::from_eigenvalues(
        result.model.scale(sigma)?,
        scale_region(&result.region),
        eigenvalues,
        branches,
    ))
}

/// Branches searched for this model under the given configuration.
pub fn branches_for(model: &PotentialModel, cfg: &SpectrumConfig) -> Vec<Branch> {
    if cfg.use_branches && model.is_symmetric() {
        alloc::vec![Branch::Plus, Branch::Minus]
    } else {
        alloc::vec![Branch::Full]
    }
}

pub fn handle_for(model: &PotentialModel, branch: Branch, cfg: &SpectrumConfig) -> Result<CharFunctionHandle> {
    match cfg.backend {
        Some(b) => CharFunctionHandle::with_backend(model.clone(), branch, b, cfg.quadrature),
        None => CharFunctionHandle::new(model.clone(), branch, cfg.quadrature),
    }
}

/// Smallest `B` such that `|psi_+ psi_-| < 1/2` on the sampled lines
/// `Re gamma = alpha` for all sampled `|Im gamma| >= B`, so that
/// `|Z| >= 1/2` there.
pub fn imaginary_bound(model: &PotentialModel, re_min: f64, re_max: f64, cfg: &SpectrumConfig) -> Result<f64> {
    let handle = handle_for(model, Branch::Full, cfg)?;
    let step = 0.25 / model.sigma();
    let alphas: Vec<f64> = (0..=8).map(|i| re_min + (re_max - re_min) * i as f64 / 8.0).collect();
    let mut last_violation = 0.0;
    let mut k = 0usize;
    loop {
        let beta = k as f64 * step;
        let mut worst = 0.0f64;
        for &alpha in &alphas {
            let (p, m) = handle.psi_pair(Complex64::new(alpha, beta))?;
            // psi(conj gamma) = conj psi(gamma), so one half-plane suffices
            worst = worst.max((p.value * m.value).norm());
        }
        if !(worst < 0.5) {
            last_violation = beta;
        }
        // certified over a window as long as the bound itself
        if beta >= 2.0 * last_violation + 4.0 / model.sigma() {
            break;
        }
        if beta > 1e3 {
            return Err(Error::Domain { what: "imaginary bound scan did not terminate", value: beta });
        }
        k += 1;
    }
    Ok(last_violation + 0.5 / model.sigma())
}

/// The search region: explicit, or `[re_min, re_max] x [-B, B]`.
pub fn search_region(model: &PotentialModel, cfg: &SpectrumConfig) -> Result<ComplexRegion> {
    if let Some(r) = cfg.region {
        return Ok(r);
    }
    let re_min = cfg.re_min.unwrap_or(-4.0 / model.sigma());
    let b = match cfg.im_max {
        Some(b) => b,
        None => imaginary_bound(model, re_min, cfg.re_max, cfg)?,
    };
    ComplexRegion::new(re_min, cfg.re_max, -b, b)
}

/// Zeros of one branch function inside `region`.
pub fn search_branch(
    model: &PotentialModel,
    branch: Branch,
    region: ComplexRegion,
    cfg: &SpectrumConfig,
) -> Result<(Vec<Eigenvalue>, BranchDiagnostics)> {
    let handle = handle_for(model, branch, cfg)?;
    let set = locate_zeros(&handle, region, &cfg.roots)?;
    let mut budget = 0.0f64;
    let mut eigenvalues = Vec::with_capacity(set.roots.len());
    for r in &set.roots {
        let z = handle.eval(r.location)?;
        budget = budget.max(z.error);
        eigenvalues.push(Eigenvalue {
            gamma: r.location,
            branch,
            multiplicity: r.multiplicity,
            residual: z.value.norm(),
            converged: r.converged,
        });
    }
    let diag = BranchDiagnostics {
        branch,
        region: set.region,
        winding: set.winding,
        splits_checked: set.splits_checked,
        evaluations: set.evaluations,
        error_budget: budget,
    };
    Ok((eigenvalues, diag))
}

/// Eigenvalues of the generator inside the (possibly automatic) region.
/// Symmetric potentials are searched per branch and labelled; otherwise the
/// full characteristic function is used.
pub fn compute_spectrum(model: &PotentialModel, cfg: &SpectrumConfig) -> Result<SpectrumResult> {
    let region = search_region(model, cfg)?;
    let mut eigenvalues = Vec::new();
    let mut diags = Vec::new();
    for branch in branches_for(model, cfg) {
        let (e, d) = search_branch(model, branch, region, cfg)?;
        eigenvalues.extend(e);
        diags.push(d);
    }
    Ok(SpectrumResult::from_eigenvalues(model.clone(), region, eigenvalues, diags))
}
