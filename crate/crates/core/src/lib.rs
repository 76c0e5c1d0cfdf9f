//! Numerical laboratory for gradient regularity of p-Laplacian evolution
//! equations
//!
//! ```text
//! u_t - div(|∇u|^{p-2} ∇u) = f,     f ∈ L^{q,r}
//! ```
//!
//! The crate is `no_std` (it needs `alloc`) and is organised bottom-up:
//!
//! * [`exponents`]: closed-form exponent calculus. Compatibility of
//!   `(p, n, q, r)`, the sharp exponent, intrinsic time scaling `θ`, the
//!   normalisation constants and the ε-layer constructions.
//! * [`grid`]: uniform space-time grids, discrete calculus, mixed
//!   `L^{q,r}` norms and oscillation measurements.
//! * [`solver`]: a finite-difference solver with lagged diffusivity, source
//!   construction, reference solutions and weak-form/energy checks.
//! * [`geometry`]: intrinsic and corrected cylinders, the critical zone and
//!   the two rescaling maps.
//! * [`probe`]: λ-adic oscillation profiles, dyadic bound checks, exponent
//!   fits and the p-caloric proximity experiment.
//!
//! File formats, configuration and the command line live in the `plap-lab`
//! companion crate.
#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod error;
mod math;
pub mod exponents;
pub mod extended;
pub mod geometry;
pub mod grid;
pub mod probe;
pub mod solver;

pub use error::{Error, Result};
pub use exponents::{
    check_compatibility, sharp_exponents, CompatibilityReport, ExponentSet, ProblemParams,
    Violation,
};
pub use extended::Extended;
pub use grid::{GridFunction, Point, Region, SpaceTimeGrid, SpaceTimePoint};
