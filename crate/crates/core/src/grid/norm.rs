//! Mixed `L^{q,r}` norms and the energy norm.
//!
//! Space uses the cell-centred rule: node `i` owns the cell
//! `x_i + [-h/2, h/2]^n` clipped to the domain, weighted by the exact
//! measure of its overlap with the region's shape. Time uses the trapezoid
//! rule, i.e. node `j` is weighted by the integral of its hat function over
//! `[t_lo, t_hi]`.

use alloc::vec::Vec;

use super::calculus::node_gradient;
use super::quadrature::{ball_box_volume, disk_rect_area, overlap};
use super::{GridFunction, Point, Region, Shape, SpaceTimeGrid};
use crate::error::invalid;
use crate::math::powf;
use crate::{Error, Extended, Result};

/// Node cell `[lo, hi]` clipped to the domain.
pub(crate) fn node_cell(grid: &SpaceTimeGrid, s: usize) -> (Point, Point) {
    let x = grid.node_point(s);
    let hw = grid.half_width();
    let h2 = 0.5 * grid.h();
    let mut lo = [0.0; 3];
    let mut hi = [0.0; 3];
    for a in 0..grid.dim() {
        lo[a] = (x[a] - h2).max(-hw[a]);
        hi[a] = (x[a] + h2).min(hw[a]);
    }
    (lo, hi)
}

/// Measure of `cell ∩ shape` for every node whose cell meets the shape.
pub fn spatial_weights(grid: &SpaceTimeGrid, shape: &Shape) -> Vec<(usize, f64)> {
    let region = Region {
        shape: *shape,
        t_lo: 0.0,
        t_hi: 0.0,
    };
    let (lo_i, hi_i) = region.index_box(grid);
    let dim = grid.dim();
    let mut out = Vec::new();
    for i0 in lo_i[0]..=hi_i[0] {
        for i1 in lo_i[1]..=hi_i[1] {
            for i2 in lo_i[2]..=hi_i[2] {
                let s = grid.spatial_index([i0, i1, i2]);
                let (lo, hi) = node_cell(grid, s);
                let w = cell_overlap(dim, &lo, &hi, shape);
                if w > 0.0 {
                    out.push((s, w));
                }
            }
        }
    }
    out
}

fn cell_overlap(dim: usize, lo: &Point, hi: &Point, shape: &Shape) -> f64 {
    match *shape {
        Shape::Whole => (0..dim).map(|a| hi[a] - lo[a]).product(),
        Shape::Box { center, half } => (0..dim)
            .map(|a| overlap(lo[a], hi[a], center[a] - half[a], center[a] + half[a]))
            .product(),
        Shape::Ball { center, radius } => {
            let mut a = [0.0; 3];
            let mut b = [0.0; 3];
            let mut near2 = 0.0;
            let mut far2 = 0.0;
            for k in 0..dim {
                a[k] = lo[k] - center[k];
                b[k] = hi[k] - center[k];
                let gap = if a[k] > 0.0 {
                    a[k]
                } else if b[k] < 0.0 {
                    -b[k]
                } else {
                    0.0
                };
                near2 += gap * gap;
                let m = a[k].abs().max(b[k].abs());
                far2 += m * m;
            }
            let r2 = radius * radius;
            if near2 >= r2 {
                return 0.0;
            }
            if far2 <= r2 {
                return (0..dim).map(|k| b[k] - a[k]).product();
            }
            match dim {
                1 => overlap(a[0], b[0], -radius, radius),
                2 => disk_rect_area(radius, a[0], b[0], a[1], b[1]),
                _ => ball_box_volume(radius, &a, &b),
            }
        }
    }
}

/// Integral of each hat function over `[t_lo, t_hi]`.
pub fn time_weights(grid: &SpaceTimeGrid, t_lo: f64, t_hi: f64) -> Vec<(usize, f64)> {
    let dt = grid.dt();
    let lo = t_lo.max(grid.t_start());
    let hi = t_hi.min(grid.t_end());
    let mut out = Vec::new();
    if hi <= lo {
        return out;
    }
    // ∫_a^b (t - base)/dt dt over a rising ramp starting at `base`.
    let ramp = |a: f64, b: f64, base: f64| ((b - base) * (b - base) - (a - base) * (a - base)) / (2.0 * dt);
    for j in 0..grid.time_nodes() {
        let tj = grid.time(j);
        let mut w = 0.0;
        if j > 0 {
            let t0 = grid.time(j - 1);
            let a = lo.max(t0);
            let b = hi.min(tj);
            if b > a {
                w += ramp(a, b, t0);
            }
        }
        if j < grid.steps() {
            let t1 = grid.time(j + 1);
            let a = lo.max(tj);
            let b = hi.min(t1);
            if b > a {
                // falling ramp (t1 - t)/dt
                w += (b - a) - ramp(a, b, tj);
            }
        }
        if w > 0.0 {
            out.push((j, w));
        }
    }
    out
}

fn check_exponent(name: &'static str, e: Extended) -> Result<()> {
    match e {
        Extended::Infinite => Ok(()),
        Extended::Finite(v) if v >= 1.0 && v.is_finite() => Ok(()),
        Extended::Finite(v) => Err(invalid(name, alloc::format!("must lie in [1, inf], got {v}"))),
    }
}

/// `(∫ (∫ |f|^q dx)^{r/q} dt)^{1/r}` over `region`, with `∞` exponents
/// replaced by maxima over the region's nodes.
pub fn anisotropic_norm(f: &GridFunction, q: Extended, r: Extended, region: &Region) -> Result<f64> {
    check_exponent("q", q)?;
    check_exponent("r", r)?;
    let grid = f.grid();

    let space: Vec<(usize, f64)> = match q {
        Extended::Infinite => region.spatial_nodes(grid).into_iter().map(|s| (s, 1.0)).collect(),
        Extended::Finite(_) => spatial_weights(grid, &region.shape),
    };
    let time: Vec<(usize, f64)> = match r {
        Extended::Infinite => region.time_nodes(grid).into_iter().map(|j| (j, 1.0)).collect(),
        Extended::Finite(_) => time_weights(grid, region.t_lo, region.t_hi),
    };
    if space.is_empty() || time.is_empty() {
        return Err(Error::EmptyRegion);
    }

    let slice_norm = |j: usize| -> f64 {
        let u = f.slice(j);
        match q {
            Extended::Infinite => space.iter().fold(0.0, |m, &(s, _)| m.max(u[s].abs())),
            Extended::Finite(qq) => {
                let sum: f64 = space.iter().map(|&(s, w)| w * powf(u[s].abs(), qq)).sum();
                powf(sum, 1.0 / qq)
            }
        }
    };
    Ok(match r {
        Extended::Infinite => time.iter().fold(0.0, |m, &(j, _)| m.max(slice_norm(j))),
        Extended::Finite(rr) => {
            let sum: f64 = time.iter().map(|&(j, w)| w * powf(slice_norm(j), rr)).sum();
            powf(sum, 1.0 / rr)
        }
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnergyNorm {
    /// `sup_t ‖u(·, t)‖_{L²}`
    pub sup_l2: f64,
    /// `‖∇u‖_{L^p}` over the space-time region.
    pub grad_lp: f64,
    pub total: f64,
}

/// Norm of `L^∞(L²) ∩ L^p(W^{1,p})` over `region`.
pub fn energy_norm(u: &GridFunction, p: f64, region: &Region) -> Result<EnergyNorm> {
    if !(p > 1.0 && p.is_finite()) {
        return Err(invalid("p", alloc::format!("must exceed 1, got {p}")));
    }
    let grid = u.grid();
    let space = spatial_weights(grid, &region.shape);
    let time = time_weights(grid, region.t_lo, region.t_hi);
    let sup_nodes = region.time_nodes(grid);
    if space.is_empty() || (time.is_empty() && sup_nodes.is_empty()) {
        return Err(Error::EmptyRegion);
    }
    let mut sup_l2: f64 = 0.0;
    for &j in &sup_nodes {
        let v = u.slice(j);
        let l2: f64 = space.iter().map(|&(s, w)| w * v[s] * v[s]).sum();
        sup_l2 = sup_l2.max(crate::math::sqrt(l2));
    }
    let mut acc = 0.0;
    for &(j, wt) in &time {
        let mut slice = 0.0;
        for &(s, w) in &space {
            let g = node_gradient(u, j, s);
            slice += w * powf(super::norm(grid.dim(), &g), p);
        }
        acc += wt * slice;
    }
    let grad_lp = powf(acc, 1.0 / p);
    Ok(EnergyNorm {
        sup_l2,
        grad_lp,
        total: sup_l2 + grad_lp,
    })
}
