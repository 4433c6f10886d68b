//! JSON and CSV records shared by the subcommands.

use std::io::Write;

use serde::Serialize;
use zigzag_core::perturbation::PerturbedEigenvalue;
use zigzag_core::rootfinder::ComplexRegion;
use zigzag_core::spectrum::{BranchDiagnostics, Eigenvalue};
use zigzag_core::{Complex64, Error};

use crate::CliError;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ComplexJson {
    pub re: f64,
    pub im: f64,
}

impl From<Complex64> for ComplexJson {
    fn from(z: Complex64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

#[derive(Clone, Copy, Debug, Serialize)]
pub struct RegionJson {
    pub re_min: f64,
    pub re_max: f64,
    pub im_min: f64,
    pub im_max: f64,
}

impl From<&ComplexRegion> for RegionJson {
    fn from(r: &ComplexRegion) -> Self {
        Self { re_min: r.re_min, re_max: r.re_max, im_min: r.im_min, im_max: r.im_max }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ErrorJson {
    pub code: &'static str,
    pub message: String,
}

impl From<&Error> for ErrorJson {
    fn from(e: &Error) -> Self {
        Self { code: e.code(), message: e.to_string() }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct EigenvalueJson {
    pub re: f64,
    pub im: f64,
    pub branch: &'static str,
    pub multiplicity: u32,
    pub residual: f64,
    pub converged: bool,
}

impl From<&Eigenvalue> for EigenvalueJson {
    fn from(e: &Eigenvalue) -> Self {
        Self {
            re: e.gamma.re,
            im: e.gamma.im,
            branch: e.branch.name(),
            multiplicity: e.multiplicity,
            residual: e.residual,
            converged: e.converged,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct BranchJson {
    pub branch: &'static str,
    pub region: RegionJson,
    pub winding: i64,
    pub splits_checked: usize,
    pub evaluations: usize,
    pub error_budget: f64,
}

impl From<&BranchDiagnostics> for BranchJson {
    fn from(d: &BranchDiagnostics) -> Self {
        Self {
            branch: d.branch.name(),
            region: (&d.region).into(),
            winding: d.winding,
            splits_checked: d.splits_checked,
            evaluations: d.evaluations,
            error_budget: d.error_budget,
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ArrowJson {
    pub base: ComplexJson,
    pub branch: &'static str,
    pub coefficient: Option<ComplexJson>,
    pub shifted: Option<ComplexJson>,
    /// `eps * |coefficient|`.
    pub length: Option<f64>,
    pub condition: Option<f64>,
    pub unresolved: Option<ErrorJson>,
}

impl ArrowJson {
    pub fn new(p: &PerturbedEigenvalue, eps: f64) -> Self {
        Self {
            base: p.base.gamma.into(),
            branch: p.base.branch.name(),
            coefficient: p.coefficient.map(Into::into),
            shifted: p.shifted.map(Into::into),
            length: p.coefficient.map(|c| eps * c.norm()),
            condition: p.condition,
            unresolved: p.unresolved.as_ref().map(Into::into),
        }
    }
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    s
}

/// Writes to `path`, or to standard output when absent.
pub fn write_text(path: Option<&str>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("{p}: {e}"))),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(text.as_bytes()).and_then(|_| out.flush()).map_err(|e| CliError::Io(format!("stdout: {e}")))
        }
    }
}

/// CSV text from a header and rows of already formatted fields.
pub fn csv_text<I, R>(header: &[&str], rows: I) -> Result<String, CliError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let io = |e: csv::Error| CliError::Io(format!("csv: {e}"));
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(io)?;
    for row in rows {
        w.write_record(row).map_err(io)?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Io(format!("csv: {e}")))?;
    Ok(String::from_utf8(bytes).expect("csv output is UTF-8"))
}
