use alloc::string::String;

use crate::exponents::Violation;
use alloc::vec::Vec;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("parameters violate the compatibility conditions: {}", violation_list(.0))]
    NotAdmissible(Vec<Violation>),

    #[error("denominator identity failed: expanded {expanded} vs factored {factored}")]
    DenominatorMismatch { expanded: f64, factored: f64 },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("grid function shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },

    #[error("non-finite value at flat index {index}")]
    NonFinite { index: usize },

    #[error("point lies outside the usable part of the grid: {0}")]
    OutOfDomain(String),

    #[error("region has no grid nodes")]
    EmptyRegion,

    #[error("test function or cutoff rejected: {0}")]
    InvalidTestFunction(String),

    #[error("linear solve diverged at step {step}: relative residual {residual:e} after {iterations} iterations")]
    LinearSolveDiverged {
        step: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("explicit scheme violates the stability limit at step {step}: dt = {dt:e} > {limit:e}")]
    CflViolation { step: usize, dt: f64, limit: f64 },

    #[error("unsupported reference solution: {0}")]
    UnsupportedReference(String),

    #[error("source not admissible in the requested L^{{q,r}} class: {0}")]
    SourceNotIntegrable(String),

    #[error("intrinsic scaling breaks down: sigma*theta = {sigma_theta} < 2")]
    IntrinsicScaling { sigma_theta: f64 },

    #[error("cylinder not resolvable on the grid: {0}")]
    Unresolvable(String),

    #[error("profile cannot be fitted: {usable} usable levels above the noise floor (need 3)")]
    Unfittable { usable: usize },

    #[error("center is in the critical zone (|grad u| = {grad_mag:e}); outside-zone rescaling needs a non-degenerate gradient")]
    CriticalCenter { grad_mag: f64 },

    #[error("outside-zone estimate requires p >= 2, got p = {p}")]
    OutsideZoneNeedsDegenerate { p: f64 },
}

fn violation_list(v: &[Violation]) -> String {
    let mut out = String::new();
    for (i, x) in v.iter().enumerate() {
        if i > 0 {
            out.push_str(", ");
        }
        out.push_str(x.name());
    }
    out
}

pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Error {
    Error::InvalidParameter {
        name,
        reason: reason.into(),
    }
}
