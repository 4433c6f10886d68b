use core::fmt;

use alloc::string::String;
use num_complex::Complex64;

use crate::rootfinder::{ComplexRegion, EdgeSide};

/// Errors produced by the numerical routines of this crate.
#[derive(Clone, Debug, PartialEq)]
pub enum Error {
    /// An argument lies outside the domain of an operation.
    Domain { what: &'static str, value: f64 },
    /// A potential descriptor or configuration string could not be parsed.
    Parse(String),
    /// The integrand returned a non-finite sample.
    NonFiniteIntegrand { at: f64 },
    /// No truncation point achieving the tolerance was found for a semi-infinite integral.
    Truncation { origin: f64, reached: f64 },
    /// Two independent evaluations of the same quantity disagree.
    Inconsistent { what: &'static str, a: Complex64, b: Complex64, tolerance: f64 },
    /// A logarithmic derivative was requested where the function vanishes numerically.
    NearZeroDivision { at: Complex64, modulus: f64 },
    /// The winding number along a contour could not be resolved to an integer.
    BoundaryProximity { region: ComplexRegion, edge: EdgeSide, winding: f64 },
    /// Winding counts of a rectangle and its two halves disagree.
    WindingMismatch { region: ComplexRegion, parent: i64, children: i64 },
    /// A box below the minimum size still holds an ambiguous cluster of zeros.
    UnresolvedCluster { region: ComplexRegion, count: i64 },
    /// Newton refinement diverged.
    PolishFailure { last: Complex64 },
    /// The spectrum contains no nonzero eigenvalue, so the gap is undefined.
    GapUndetermined,
    /// The point is not a root of the requested characteristic function.
    NotAnEigenvalue { gamma: Complex64, residual: f64 },
    /// The resolvent was requested at (numerically) an eigenvalue.
    ResolventAtEigenvalue { gamma: Complex64, residual: f64 },
    /// The eigenvalue is not simple, so the rank-one formulas do not apply.
    NonSimpleEigenvalue { gamma: Complex64, derivative: f64 },
    /// A thinning bound for the switching rate was exceeded.
    RateBound { window_start: f64, window_end: f64, bound: f64, rate: f64 },
    /// The path is too short for the requested autocorrelation lags.
    InsufficientHorizon { max_lag: f64, horizon: f64 },
    /// The observable has zero variance along the path.
    DegenerateObservable,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::Domain { what, value } => write!(f, "{what} out of domain: {value}"),
            Error::Parse(msg) => write!(f, "parse error: {msg}"),
            Error::NonFiniteIntegrand { at } => write!(f, "non-finite integrand sample at {at}"),
            Error::Truncation { origin, reached } => {
                write!(f, "no truncation point for the semi-infinite integral from {origin} (scanned to {reached})")
            }
            Error::Inconsistent { what, a, b, tolerance } => {
                write!(f, "{what}: {a} vs {b} (tolerance {tolerance:e})")
            }
            Error::NearZeroDivision { at, modulus } => {
                write!(f, "function nearly vanishes at {at} (|value| = {modulus:e})")
            }
            Error::BoundaryProximity { region, edge, winding } => {
                write!(f, "non-integer winding {winding} on {region}; suspect edge: {edge:?}")
            }
            Error::WindingMismatch { region, parent, children } => {
                write!(f, "winding of {region} is {parent} but its halves sum to {children}")
            }
            Error::UnresolvedCluster { region, count } => {
                write!(f, "unresolved cluster of {count} zeros in {region}")
            }
            Error::PolishFailure { last } => write!(f, "Newton refinement diverged near {last}"),
            Error::GapUndetermined => write!(f, "no nonzero eigenvalue found; spectral gap undetermined"),
            Error::NotAnEigenvalue { gamma, residual } => {
                write!(f, "{gamma} is not an eigenvalue (|Z| = {residual:e})")
            }
            Error::ResolventAtEigenvalue { gamma, residual } => {
                write!(f, "resolvent requested at eigenvalue {gamma} (|Z| = {residual:e})")
            }
            Error::NonSimpleEigenvalue { gamma, derivative } => {
                write!(f, "eigenvalue {gamma} is not simple (|Z'| = {derivative:e})")
            }
            Error::RateBound { window_start, window_end, bound, rate } => write!(
                f,
                "switching rate {rate} exceeds thinning bound {bound} on window [{window_start}, {window_end}]"
            ),
            Error::InsufficientHorizon { max_lag, horizon } => {
                write!(f, "maximum lag {max_lag} exceeds a tenth of the horizon {horizon}")
            }
            Error::DegenerateObservable => write!(f, "observable has zero variance along the path"),
        }
    }
}

impl Error {
    /// Stable snake_case identifier, for machine-readable reports.
    pub fn code(&self) -> &'static str {
        match self {
            Error::Domain { .. } => "domain",
            Error::Parse(_) => "parse",
            Error::NonFiniteIntegrand { .. } => "non_finite_integrand",
            Error::Truncation { .. } => "truncation",
            Error::Inconsistent { .. } => "inconsistent",
            Error::NearZeroDivision { .. } => "near_zero_division",
            Error::BoundaryProximity { .. } => "boundary_proximity",
            Error::WindingMismatch { .. } => "winding_mismatch",
            Error::UnresolvedCluster { .. } => "unresolved_cluster",
            Error::PolishFailure { .. } => "polish_failure",
            Error::GapUndetermined => "gap_undetermined",
            Error::NotAnEigenvalue { .. } => "not_an_eigenvalue",
            Error::ResolventAtEigenvalue { .. } => "resolvent_at_eigenvalue",
            Error::NonSimpleEigenvalue { .. } => "non_simple_eigenvalue",
            Error::RateBound { .. } => "rate_bound",
            Error::InsufficientHorizon { .. } => "insufficient_horizon",
            Error::DegenerateObservable => "degenerate_observable",
        }
    }
}

impl core::error::Error for Error {}

pub type Result<T> = core::result::Result<T, Error>;
