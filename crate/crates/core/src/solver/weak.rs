//! Weak-form residual and the local energy (Caccioppoli) inequality.

use alloc::format;
use alloc::vec::Vec;

use super::source::make_source;
use super::{face_gradient, SourceSpec};
use crate::error::invalid;
use crate::grid::calculus::{gradient_slice, stride};
use crate::grid::{distance, norm, GridFunction, Point, Region, Shape, SpaceTimeGrid};
use crate::math::{powf, sqrt};
use crate::{Error, Result};

fn time_span(grid: &SpaceTimeGrid, region: &Region) -> Result<(usize, usize)> {
    let j1 = grid.nearest_time(region.t_lo);
    let j2 = grid.nearest_time(region.t_hi);
    if j2 <= j1 {
        return Err(Error::EmptyRegion);
    }
    Ok((j1, j2))
}

fn trapezoid(j: usize, j1: usize, j2: usize, dt: f64) -> f64 {
    if j == j1 || j == j2 {
        0.5 * dt
    } else {
        dt
    }
}

fn cell_volume(grid: &SpaceTimeGrid) -> f64 {
    powf(grid.h(), grid.dim() as f64)
}

/// Rejects test functions that do not vanish outside the spatial shape of
/// `region` or on the grid boundary.
fn check_support(psi: &GridFunction, region: &Region, what: &str) -> Result<()> {
    let grid = psi.grid();
    let scale = psi.max_abs().max(f64::MIN_POSITIVE);
    for s in 0..grid.spatial_len() {
        let inside = region.contains_space(grid.dim(), &grid.node_point(s)) && !grid.is_boundary(s);
        if inside {
            continue;
        }
        for j in 0..grid.time_nodes() {
            if psi.at(j, s).abs() > 1e-12 * scale {
                return Err(Error::InvalidTestFunction(format!(
                    "{what} is nonzero at node {:?} outside the region",
                    grid.unravel(s)
                )));
            }
        }
    }
    Ok(())
}

/// `∫_K uψ|_{t₁}^{t₂} + ∫∫ (-uψ_t + |∇u|^{p-2}∇u·∇ψ) - ∫∫ fψ` for a
/// source given by its spec.
pub fn weak_residual(
    u: &GridFunction,
    source: &SourceSpec,
    psi: &GridFunction,
    region: &Region,
    p: f64,
) -> Result<f64> {
    if source.is_zero() {
        return weak_residual_field(u, None, psi, region, p);
    }
    let plain = SourceSpec {
        kind: source.kind.clone(),
        target: None,
    };
    let f = make_source(&plain, u.grid())?.field;
    weak_residual_field(u, Some(&f), psi, region, p)
}

/// As [`weak_residual`] with the source given by nodal values.
///
/// Space integrals use nodal sums (ψ vanishes near the boundary), the
/// diffusion term pairs face fluxes with face differences of ψ, time uses
/// the trapezoid rule between the nodes nearest to `t_lo` and `t_hi`, and
/// `ψ_t` is a central difference.
pub fn weak_residual_field(
    u: &GridFunction,
    f: Option<&GridFunction>,
    psi: &GridFunction,
    region: &Region,
    p: f64,
) -> Result<f64> {
    let grid = u.grid();
    if psi.grid() != grid || f.is_some_and(|f| f.grid() != grid) {
        return Err(Error::InvalidGrid("u, f and psi must share a grid".into()));
    }
    if !(p > 1.0) {
        return Err(invalid("p", format!("must exceed 1, got {p}")));
    }
    check_support(psi, region, "test function")?;
    let (j1, j2) = time_span(grid, region)?;
    let dim = grid.dim();
    let h = grid.h();
    let dt = grid.dt();
    let vol = cell_volume(grid);
    let cnt = grid.counts();
    let ns = grid.spatial_len();

    let pairing = |j: usize| -> f64 {
        let a = u.slice(j);
        let b = psi.slice(j);
        a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>() * vol
    };
    let mut total = pairing(j2) - pairing(j1);

    for j in j1..=j2 {
        let w = trapezoid(j, j1, j2, dt);
        let (jm, jp) = (j.saturating_sub(1), (j + 1).min(grid.steps()));
        let psi_t_den = grid.time(jp) - grid.time(jm);
        let v = u.slice(j);
        let ps = psi.slice(j);
        let grads = gradient_slice(u, j);
        let mut acc = 0.0;
        for s in 0..ns {
            let psi_t = (psi.at(jp, s) - psi.at(jm, s)) / psi_t_den;
            acc -= v[s] * psi_t;
            if let Some(f) = f {
                acc -= f.at(j, s) * ps[s];
            }
            let idx = grid.unravel(s);
            for a in 0..dim {
                if idx[a] + 1 == cnt[a] {
                    continue;
                }
                let st = stride(cnt, a);
                let dpsi = ps[s + st] - ps[s];
                if dpsi == 0.0 {
                    continue;
                }
                let g = face_gradient(v, &grads, dim, h, s, a, st);
                let m = norm(dim, &g);
                if m > 0.0 {
                    acc += powf(m, p - 2.0) * g[a] * dpsi / h;
                }
            }
        }
        total += w * acc * vol;
    }
    Ok(total)
}

fn smoothstep(z: f64) -> f64 {
    let z = z.clamp(0.0, 1.0);
    z * z * (3.0 - 2.0 * z)
}

fn shape_frame(grid: &SpaceTimeGrid, region: &Region) -> (Point, f64) {
    let dim = grid.dim();
    match region.shape {
        Shape::Ball { center, radius } => (center, radius / sqrt(dim as f64)),
        Shape::Box { center, half } => (center, half[..dim].iter().fold(f64::INFINITY, |m, &v| m.min(v))),
        Shape::Whole => {
            let hw = grid.half_width();
            ([0.0; 3], hw[..dim].iter().fold(f64::INFINITY, |m, &v| m.min(v)))
        }
    }
}

/// Tensor bumps `Π_a (1 - ((x_a - c_a)/ρ)²)_+^k · (3s² - 2s³)`,
/// `s = (t - t_lo)/(t_hi - t_lo)`, for `k ∈ {2, 3}` and `ρ = ρ₀, 3ρ₀/4,
/// ρ₀/2`, where `ρ₀` is the largest half-width whose cube fits the shape.
pub fn test_battery(grid: &SpaceTimeGrid, region: &Region) -> Result<Vec<GridFunction>> {
    let (center, rho0) = shape_frame(grid, region);
    if !(rho0 > 0.0) || !(region.t_hi > region.t_lo) {
        return Err(Error::EmptyRegion);
    }
    let dim = grid.dim();
    let span = region.t_hi - region.t_lo;
    let mut out = Vec::new();
    for k in [2i32, 3] {
        for scale in [1.0, 0.75, 0.5] {
            let rho = rho0 * scale;
            let psi = GridFunction::from_fn(grid.clone(), |x, t| {
                let mut v = 1.0;
                for a in 0..dim {
                    let z = (x[a] - center[a]) / rho;
                    let b = (1.0 - z * z).max(0.0);
                    v *= powf(b, k as f64);
                }
                if v == 0.0 {
                    return 0.0;
                }
                let s = ((t - region.t_lo) / span).clamp(0.0, 1.0);
                v * s * s * (3.0 - 2.0 * s)
            })?;
            out.push(psi);
        }
    }
    Ok(out)
}

/// Cutoff equal to 1 on the half-size shape for the later half of the time
/// interval, vanishing outside the shape and at `t_lo`.
pub fn standard_cutoff(grid: &SpaceTimeGrid, region: &Region) -> Result<GridFunction> {
    let dim = grid.dim();
    let span = region.t_hi - region.t_lo;
    if !(span > 0.0) {
        return Err(Error::EmptyRegion);
    }
    let spatial = |x: &Point| -> f64 {
        match region.shape {
            Shape::Ball { center, radius } => {
                let r = distance(dim, x, &center) / radius;
                1.0 - smoothstep(2.0 * r - 1.0)
            }
            Shape::Box { center, half } => (0..dim)
                .map(|a| 1.0 - smoothstep(2.0 * (x[a] - center[a]).abs() / half[a] - 1.0))
                .product(),
            Shape::Whole => {
                let hw = grid.half_width();
                (0..dim)
                    .map(|a| 1.0 - smoothstep(2.0 * x[a].abs() / hw[a] - 1.0))
                    .product()
            }
        }
    };
    GridFunction::from_fn(grid.clone(), |x, t| {
        spatial(x) * smoothstep(2.0 * (t - region.t_lo) / span)
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CaccioppoliTerms {
    /// `sup_t ∫ u²ξ^p dx`
    pub sup_term: f64,
    /// `∫∫ |∇u|^p ξ^p`
    pub grad_term: f64,
    /// `sup_term + grad_term`
    pub lhs: f64,
    /// `∫∫ |u|^p (ξ^p + |∇ξ|^p)`
    pub a_term: f64,
    /// `∫∫ u² ξ^{p-1} |ξ_t|`
    pub b_term: f64,
    /// `‖f‖_{L^{q,r}}`
    pub f_term: f64,
}

impl CaccioppoliTerms {
    /// `A + C (B + F)`.
    pub fn rhs(&self, c: f64) -> f64 {
        self.a_term + c * (self.b_term + self.f_term)
    }
}

/// Both sides of the local energy inequality for cutoff `ξ`.
pub fn caccioppoli_terms(
    u: &GridFunction,
    f_norm: f64,
    cutoff: &GridFunction,
    region: &Region,
    p: f64,
) -> Result<CaccioppoliTerms> {
    let grid = u.grid();
    if cutoff.grid() != grid {
        return Err(Error::InvalidGrid("u and the cutoff must share a grid".into()));
    }
    if !(p > 1.0) {
        return Err(invalid("p", format!("must exceed 1, got {p}")));
    }
    if let Some(v) = cutoff.values().iter().find(|v| !(**v >= -1e-12 && **v <= 1.0 + 1e-12)) {
        return Err(Error::InvalidTestFunction(format!("cutoff value {v} outside [0, 1]")));
    }
    check_support(cutoff, region, "cutoff")?;
    let (j1, j2) = time_span(grid, region)?;
    let dim = grid.dim();
    let dt = grid.dt();
    let vol = cell_volume(grid);
    let ns = grid.spatial_len();
    let (mut sup_term, mut grad_term, mut a_term, mut b_term) = (0.0f64, 0.0, 0.0, 0.0);
    for j in j1..=j2 {
        let w = trapezoid(j, j1, j2, dt);
        let (jm, jp) = (j.saturating_sub(1), (j + 1).min(grid.steps()));
        let den = grid.time(jp) - grid.time(jm);
        let v = u.slice(j);
        let xi = cutoff.slice(j);
        let gu = gradient_slice(u, j);
        let gx = gradient_slice(cutoff, j);
        let (mut l2, mut gp, mut aa, mut bb) = (0.0, 0.0, 0.0, 0.0);
        for s in 0..ns {
            let x = xi[s].clamp(0.0, 1.0);
            if x == 0.0 && norm(dim, &gx[s]) == 0.0 {
                continue;
            }
            let xp = powf(x, p);
            l2 += v[s] * v[s] * xp;
            gp += powf(norm(dim, &gu[s]), p) * xp;
            aa += powf(v[s].abs(), p) * (xp + powf(norm(dim, &gx[s]), p));
            let xt = (cutoff.at(jp, s) - cutoff.at(jm, s)) / den;
            bb += v[s] * v[s] * powf(x, p - 1.0) * xt.abs();
        }
        sup_term = sup_term.max(l2 * vol);
        grad_term += w * gp * vol;
        a_term += w * aa * vol;
        b_term += w * bb * vol;
    }
    Ok(CaccioppoliTerms {
        sup_term,
        grad_term,
        lhs: sup_term + grad_term,
        a_term,
        b_term,
        f_term: f_norm,
    })
}

/// `(lhs, rhs)` of the energy inequality with constant `c_fit`. The source
/// norm is the certified `L^{q,r}` norm of the source (zero sources need no
/// target).
pub fn caccioppoli_gap(
    u: &GridFunction,
    source: &SourceSpec,
    cutoff: &GridFunction,
    region: &Region,
    p: f64,
    c_fit: f64,
) -> Result<(f64, f64)> {
    let f_norm = if source.is_zero() {
        0.0
    } else {
        make_source(source, u.grid())?
            .norm
            .ok_or_else(|| invalid("source", "a target (q, r) is needed to measure the source"))?
    };
    let t = caccioppoli_terms(u, f_norm, cutoff, region, p)?;
    Ok((t.lhs, t.rhs(c_fit)))
}

/// Smallest `C ≥ 0` with `lhs ≤ A + C(B + F)` for every member; `None`
/// when some member has `lhs > A` but `B + F = 0`.
pub fn fit_caccioppoli_constant(terms: &[CaccioppoliTerms]) -> Option<f64> {
    let mut c: f64 = 0.0;
    for t in terms {
        let excess = t.lhs - t.a_term;
        if excess <= 0.0 {
            continue;
        }
        let d = t.b_term + t.f_term;
        if d <= 0.0 {
            return None;
        }
        c = c.max(excess / d);
    }
    Some(c)
}
