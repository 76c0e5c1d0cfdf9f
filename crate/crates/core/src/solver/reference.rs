//! Closed-form solutions used to validate the solver.

use alloc::format;

use super::face_gradient;
use crate::grid::calculus::{gradient_slice, stride};
use crate::grid::{norm, GridFunction, SpaceTimeGrid};
use crate::math::{exp, powf, sin};
use crate::{Error, Result};
use core::f64::consts::PI;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Reference {
    /// `e^{-nπ²t} Π sin(π x_a)` (heat equation only).
    HeatMode,
    /// Self-similar source-type solution, `p > 2`.
    Barenblatt,
}

/// Fraction of the half-width covered by the Barenblatt support at `t_end`.
pub const BARENBLATT_SUPPORT_FRACTION: f64 = 0.75;

fn lambda(p: f64, n: usize) -> f64 {
    n as f64 * (p - 2.0) + p
}

fn gamma_p(p: f64, n: usize) -> f64 {
    (p - 2.0) / p * powf(lambda(p, n), -1.0 / (p - 1.0))
}

/// `t^{-n/λ} [C - γ (|x| t^{-1/λ})^{p/(p-1)}]_+^{(p-1)/(p-2)}` with
/// `λ = n(p-2) + p`, `γ = ((p-2)/p) λ^{-1/(p-1)}`.
pub fn barenblatt_value(p: f64, n: usize, c: f64, r: f64, t: f64) -> f64 {
    let l = lambda(p, n);
    let z = r * powf(t, -1.0 / l);
    let base = c - gamma_p(p, n) * powf(z, p / (p - 1.0));
    if base <= 0.0 {
        return 0.0;
    }
    powf(t, -(n as f64) / l) * powf(base, (p - 1.0) / (p - 2.0))
}

/// Support radius `t^{1/λ} (C/γ)^{(p-1)/p}`.
pub fn barenblatt_radius(p: f64, n: usize, c: f64, t: f64) -> f64 {
    powf(t, 1.0 / lambda(p, n)) * powf(c / gamma_p(p, n), (p - 1.0) / p)
}

/// The constant `C` whose support has radius `radius` at time `t`.
pub fn barenblatt_constant(p: f64, n: usize, radius: f64, t: f64) -> f64 {
    gamma_p(p, n) * powf(radius * powf(t, -1.0 / lambda(p, n)), p / (p - 1.0))
}

fn check(name: Reference, p: f64, n: usize, grid: &SpaceTimeGrid) -> Result<f64> {
    if n != grid.dim() {
        return Err(Error::UnsupportedReference(format!(
            "dimension {n} does not match the grid dimension {}",
            grid.dim()
        )));
    }
    match name {
        Reference::HeatMode if p != 2.0 => Err(Error::UnsupportedReference(format!(
            "heat mode needs p = 2, got {p}"
        ))),
        Reference::Barenblatt if !(p > 2.0) => Err(Error::UnsupportedReference(format!(
            "Barenblatt profile needs p > 2, got {p}"
        ))),
        Reference::Barenblatt if !(grid.t_start() > 0.0) => Err(Error::UnsupportedReference(
            "Barenblatt profile needs a time range bounded away from 0".into(),
        )),
        Reference::HeatMode => Ok(0.0),
        Reference::Barenblatt => {
            let hw = grid.half_width();
            let l = hw[..n].iter().fold(f64::INFINITY, |m, &v| m.min(v));
            Ok(barenblatt_constant(p, n, BARENBLATT_SUPPORT_FRACTION * l, grid.t_end()))
        }
    }
}

/// Exact field at the nodes of `grid`.
pub fn reference_solutions(name: Reference, p: f64, n: usize, grid: &SpaceTimeGrid) -> Result<GridFunction> {
    let c = check(name, p, n, grid)?;
    match name {
        Reference::HeatMode => GridFunction::from_fn(grid.clone(), |x, t| {
            let mut v = exp(-(n as f64) * PI * PI * t);
            for xa in x.iter().take(n) {
                v *= sin(PI * xa);
            }
            v
        }),
        Reference::Barenblatt => {
            GridFunction::from_fn(grid.clone(), |x, t| barenblatt_value(p, n, c, norm(n, x), t))
        }
    }
}

/// Max-norm residual of the exact field in the discrete operator
/// `(u^{j+1} - u^{j-1})/(2dt) - div_h(|∇_h u|^{p-2} ∇_h u)` at interior
/// nodes and interior time nodes. For the Barenblatt profile only the
/// annulus `R(t)/4 ≤ |x| ≤ 3R(t)/4` is used: the free boundary and the
/// centre (where the profile is only `C^{1,1/2}` for `p = 3`) are excluded.
pub fn reference_residual(name: Reference, p: f64, grid: &SpaceTimeGrid) -> Result<f64> {
    let u = reference_solutions(name, p, grid.dim(), grid)?;
    let c = check(name, p, grid.dim(), grid)?;
    let dim = grid.dim();
    let h = grid.h();
    let cnt = grid.counts();
    let mut worst: f64 = 0.0;
    for j in 1..grid.steps() {
        let t = grid.time(j);
        let v = u.slice(j);
        let grads = gradient_slice(&u, j);
        let (r_in, r_out) = match name {
            Reference::HeatMode => (0.0, f64::INFINITY),
            Reference::Barenblatt => {
                let r = barenblatt_radius(p, dim, c, t);
                (0.25 * r, 0.75 * r)
            }
        };
        let flux = |s: usize, a: usize| -> f64 {
            let st = stride(cnt, a);
            let g = face_gradient(v, &grads, dim, h, s, a, st);
            let m = norm(dim, &g);
            if m == 0.0 {
                0.0
            } else {
                powf(m, p - 2.0) * g[a]
            }
        };
        for s in 0..grid.spatial_len() {
            if grid.is_boundary(s) {
                continue;
            }
            let x = grid.node_point(s);
            let rad = norm(dim, &x);
            if rad < r_in || rad > r_out {
                continue;
            }
            let ut = (u.at(j + 1, s) - u.at(j - 1, s)) / (2.0 * grid.dt());
            let mut div = 0.0;
            for a in 0..dim {
                let st = stride(cnt, a);
                div += (flux(s, a) - flux(s - st, a)) / h;
            }
            worst = worst.max((ut - div).abs());
        }
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn heat_mode_values() {
        let g = SpaceTimeGrid::cube(1, 1.0, 0.25, 0.1, 0.0, 1.0).unwrap();
        let u = reference_solutions(Reference::HeatMode, 2.0, 1, &g).unwrap();
        let s = g.spatial_index([6, 0, 0]);
        assert!((u.at(3, s) - libm::exp(-PI * PI * 0.3) * libm::sin(PI * 0.5)).abs() < 1e-14);
        assert!(reference_solutions(Reference::HeatMode, 3.0, 1, &g).is_err());
    }

    #[test]
    fn barenblatt_support() {
        let g = SpaceTimeGrid::cube(2, 1.0, 1.0 / 32.0, 0.01, 0.1, 0.2).unwrap();
        let u = reference_solutions(Reference::Barenblatt, 3.0, 2, &g).unwrap();
        let c = barenblatt_constant(3.0, 2, 0.75, 0.2);
        for j in 0..g.time_nodes() {
            let r = barenblatt_radius(3.0, 2, c, g.time(j));
            for s in 0..g.spatial_len() {
                if norm(2, &g.node_point(s)) >= r {
                    assert_eq!(u.at(j, s), 0.0);
                }
            }
        }
        assert!((barenblatt_radius(3.0, 2, c, 0.2) - 0.75).abs() < 1e-12);
        assert!(reference_solutions(Reference::Barenblatt, 2.0, 2, &g).is_err());
        let g0 = SpaceTimeGrid::cube(2, 1.0, 1.0 / 32.0, 0.01, 0.0, 0.2).unwrap();
        assert!(reference_solutions(Reference::Barenblatt, 3.0, 2, &g0).is_err());
    }

    #[test]
    fn barenblatt_solves_the_equation() {
        // residual shrinks under refinement away from the centre and rim
        let mut prev = f64::INFINITY;
        for k in [32.0, 64.0, 128.0] {
            let h = 1.0 / k;
            let g = SpaceTimeGrid::cube(1, 1.0, h, h * h, 0.5, 0.5 + 8.0 * h * h).unwrap();
            let r = reference_residual(Reference::Barenblatt, 3.0, &g).unwrap();
            assert!(r < prev);
            prev = r;
        }
    }
}
