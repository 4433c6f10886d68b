//! Thread-level parallelism over independent pieces of work: branches of a
//! spectrum search, eigenvalues of a perturbation and simulation chains.

use std::num::NonZeroUsize;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;
use std::thread;

use zigzag_core::operator::OperatorConfig;
use zigzag_core::perturbation::{perturbed_spectrum, PerturbedSpectrum};
use zigzag_core::potential::PotentialModel;
use zigzag_core::spectrum::{branches_for, search_branch, search_region, SpectrumConfig, SpectrumResult};
use zigzag_core::Result;

pub fn workers() -> usize {
    thread::available_parallelism().map_or(1, NonZeroUsize::get)
}

/// `f(0), ..., f(n - 1)` on up to `workers()` threads, in index order.
pub fn map_indexed<T: Send>(n: usize, f: impl Fn(usize) -> T + Sync) -> Vec<T> {
    let slots: Vec<Mutex<Option<T>>> = (0..n).map(|_| Mutex::new(None)).collect();
    let next = AtomicUsize::new(0);
    thread::scope(|s| {
        for _ in 0..workers().min(n) {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= n {
                    break;
                }
                let v = f(i);
                *slots[i].lock().expect("result slot") = Some(v);
            });
        }
    });
    slots.into_iter().map(|m| m.into_inner().expect("result slot").expect("every index computed")).collect()
}

/// Same result as `compute_spectrum`, with the branches searched concurrently.
pub fn compute_spectrum(model: &PotentialModel, cfg: &SpectrumConfig) -> Result<SpectrumResult> {
    let region = search_region(model, cfg)?;
    let branches = branches_for(model, cfg);
    let found = map_indexed(branches.len(), |i| search_branch(model, branches[i], region, cfg));
    let mut eigenvalues = Vec::new();
    let mut diags = Vec::with_capacity(found.len());
    for r in found {
        let (e, d) = r?;
        eigenvalues.extend(e);
        diags.push(d);
    }
    Ok(SpectrumResult::from_eigenvalues(model.clone(), region, eigenvalues, diags))
}

/// Same result as `perturbed_spectrum`, one eigenvalue per task.
pub fn perturb(base: &SpectrumResult, epsilon: f64, cfg: &OperatorConfig) -> Result<PerturbedSpectrum> {
    let parts = map_indexed(base.eigenvalues.len(), |i| {
        let single = SpectrumResult { eigenvalues: vec![base.eigenvalues[i]], ..base.clone() };
        perturbed_spectrum(&single, epsilon, cfg)
    });
    let mut entries = Vec::with_capacity(parts.len());
    for p in parts {
        entries.extend(p?.entries);
    }
    Ok(PerturbedSpectrum { base: base.clone(), epsilon, entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use zigzag_core::rootfinder::ComplexRegion;
    use zigzag_core::spectrum;

    #[test]
    fn map_keeps_order() {
        let v = map_indexed(37, |i| i * i);
        assert_eq!(v, (0..37).map(|i| i * i).collect::<Vec<_>>());
        assert!(map_indexed(0, |i| i).is_empty());
    }

    #[test]
    fn matches_serial() {
        let model = PotentialModel::gaussian(1.0).unwrap();
        let cfg =
            SpectrumConfig { region: Some(ComplexRegion::new(-1.1, 0.1, -1.6, 1.6).unwrap()), ..Default::default() };
        let a = compute_spectrum(&model, &cfg).unwrap();
        let b = spectrum::compute_spectrum(&model, &cfg).unwrap();
        assert_eq!(a.eigenvalues, b.eigenvalues);
        assert_eq!(a.branches, b.branches);
        let ocfg = OperatorConfig::default();
        let p = perturb(&a, 0.1, &ocfg).unwrap();
        let q = perturbed_spectrum(&a, 0.1, &ocfg).unwrap();
        assert_eq!(p.entries, q.entries);
    }
}
