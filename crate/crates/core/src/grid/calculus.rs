//! Discrete calculus on grid functions.

use alloc::format;
use alloc::vec::Vec;

use super::{GridFunction, Point, Region, Shape, SpaceTimePoint};
use crate::error::invalid;
use crate::math::{ceil, cos, floor, round, sin, sqrt};
use crate::{Error, Result};

/// Nodal gradient: central differences inside, second-order one-sided
/// differences on the boundary faces.
pub(crate) fn node_gradient(u: &GridFunction, j: usize, s: usize) -> Point {
    let grid = u.grid();
    slice_gradient(u.slice(j), grid, s)
}

pub(crate) fn slice_gradient(v: &[f64], grid: &super::SpaceTimeGrid, s: usize) -> Point {
    let idx = grid.unravel(s);
    let c = grid.counts();
    let h = grid.h();
    let mut g = [0.0; 3];
    for a in 0..grid.dim() {
        let stride = stride(c, a);
        let i = idx[a];
        g[a] = if i == 0 {
            (-3.0 * v[s] + 4.0 * v[s + stride] - v[s + 2 * stride]) / (2.0 * h)
        } else if i + 1 == c[a] {
            (3.0 * v[s] - 4.0 * v[s - stride] + v[s - 2 * stride]) / (2.0 * h)
        } else {
            (v[s + stride] - v[s - stride]) / (2.0 * h)
        };
    }
    g
}

pub(crate) fn stride(c: [usize; 3], axis: usize) -> usize {
    match axis {
        0 => c[1] * c[2],
        1 => c[2],
        _ => 1,
    }
}

/// Central-difference spatial gradient at node `(j, s)`; boundary nodes
/// are rejected.
pub fn gradient(u: &GridFunction, j: usize, s: usize) -> Result<Point> {
    let grid = u.grid();
    if j >= grid.time_nodes() || s >= grid.spatial_len() {
        return Err(Error::OutOfDomain(format!("node ({j}, {s}) does not exist")));
    }
    if grid.is_boundary(s) {
        return Err(Error::OutOfDomain(format!(
            "node {:?} is on the spatial boundary",
            grid.unravel(s)
        )));
    }
    Ok(node_gradient(u, j, s))
}

/// Nodal gradients of time slice `j`.
pub fn gradient_slice(u: &GridFunction, j: usize) -> Vec<Point> {
    let grid = u.grid();
    let v = u.slice(j);
    (0..grid.spatial_len()).map(|s| slice_gradient(v, grid, s)).collect()
}

/// Cell containing `x` and the local coordinates in `[0, 1]`.
fn locate_space(grid: &super::SpaceTimeGrid, x: &Point) -> Result<([usize; 3], [f64; 3])> {
    if !grid.contains_space(x) {
        return Err(Error::OutOfDomain(format!("{x:?} lies outside the spatial box")));
    }
    let hw = grid.half_width();
    let c = grid.counts();
    let mut i = [0usize; 3];
    let mut w = [0.0; 3];
    for a in 0..grid.dim() {
        let f = (x[a] + hw[a]) / grid.h();
        let fi = floor(f).clamp(0.0, (c[a] - 2) as f64);
        i[a] = fi as usize;
        w[a] = (f - fi).clamp(0.0, 1.0);
    }
    Ok((i, w))
}

fn locate_time(grid: &super::SpaceTimeGrid, t: f64) -> Result<(usize, f64)> {
    if !grid.contains_time(t) {
        return Err(Error::OutOfDomain(format!("t = {t} lies outside the time range")));
    }
    let f = (t - grid.t_start()) / grid.dt();
    let fj = floor(f).clamp(0.0, (grid.steps() - 1) as f64);
    Ok((fj as usize, (f - fj).clamp(0.0, 1.0)))
}

/// Multilinear weights over the `2^dim` corners of a cell.
fn corners(grid: &super::SpaceTimeGrid, i: [usize; 3], w: [f64; 3]) -> Vec<(usize, f64)> {
    let dim = grid.dim();
    let c = grid.counts();
    let mut out = Vec::with_capacity(1 << dim);
    for mask in 0..(1usize << dim) {
        let mut s = 0;
        let mut wt = 1.0;
        for a in 0..dim {
            let up = mask >> a & 1;
            s += (i[a] + up) * stride(c, a);
            wt *= if up == 1 { w[a] } else { 1.0 - w[a] };
        }
        if wt != 0.0 {
            out.push((s, wt));
        }
    }
    out
}

/// Multilinear interpolation of time slice `j` at `x`.
pub fn interpolate_slice(u: &GridFunction, j: usize, x: &Point) -> Result<f64> {
    let (i, w) = locate_space(u.grid(), x)?;
    Ok(combine(&corners(u.grid(), i, w), u.slice(j)))
}

/// `Σ c_k v_k`, written relative to the first corner so that constants
/// are reproduced exactly.
fn combine(cs: &[(usize, f64)], v: &[f64]) -> f64 {
    let v0 = v[cs[0].0];
    v0 + cs.iter().map(|&(s, c)| c * (v[s] - v0)).sum::<f64>()
}

/// Multilinear interpolation in space and linear in time.
pub fn interpolate(u: &GridFunction, p: &SpaceTimePoint) -> Result<f64> {
    let grid = u.grid();
    let (i, w) = locate_space(grid, &p.x)?;
    let (j, wt) = locate_time(grid, p.t)?;
    let cs = corners(grid, i, w);
    let lo = combine(&cs, u.slice(j));
    if wt == 0.0 {
        return Ok(lo);
    }
    Ok(lo + wt * (combine(&cs, u.slice(j + 1)) - lo))
}

/// Gradient at an arbitrary point by multilinear interpolation of nodal
/// gradients.
pub fn gradient_at(u: &GridFunction, p: &SpaceTimePoint) -> Result<Point> {
    let grid = u.grid();
    let (i, w) = locate_space(grid, &p.x)?;
    let (j, wt) = locate_time(grid, p.t)?;
    let cs = corners(grid, i, w);
    let mut g = [0.0; 3];
    for (jj, tw) in [(j, 1.0 - wt), (j + 1, wt)] {
        if tw == 0.0 {
            continue;
        }
        for &(s, c) in &cs {
            let gn = node_gradient(u, jj, s);
            for a in 0..3 {
                g[a] += tw * c * gn[a];
            }
        }
    }
    Ok(g)
}

/// Sliding time average `(1/w) ∫_t^{t+w} u(·, τ) dτ` by the trapezoid rule;
/// nodes with `t > T - w` are set to zero.
pub fn steklov_average(u: &GridFunction, window: f64) -> Result<GridFunction> {
    let grid = u.grid();
    let m_f = window / grid.dt();
    let m = round(m_f);
    if !(window > 0.0) || m < 1.0 || (m_f - m).abs() > 1e-9 * m {
        return Err(invalid("window", format!("must be a positive multiple of dt, got {window}")));
    }
    let m = m as usize;
    if m > grid.steps() {
        return Err(invalid("window", "longer than the time extent"));
    }
    let ns = grid.spatial_len();
    let mut out = alloc::vec![0.0; grid.len()];
    let inv = 1.0 / m as f64;
    for j in 0..=(grid.steps() - m) {
        let dst = &mut out[j * ns..(j + 1) * ns];
        for k in 0..=m {
            let wk = if k == 0 || k == m { 0.5 * inv } else { inv };
            let src = u.slice(j + k);
            for (d, s) in dst.iter_mut().zip(src) {
                *d += wk * s;
            }
        }
    }
    GridFunction::new(grid.clone(), out)
}

/// `(value, gradient)` of an affine function of space centred at the
/// oscillation centre.
pub type AffinePart = (f64, Point);

/// Points on the sphere `|x - c| = r` used to sample the shape boundary.
pub(crate) fn sphere_samples(dim: usize, center: &Point, radius: f64, h: f64) -> Vec<Point> {
    let mut out = Vec::new();
    match dim {
        1 => {
            out.push([center[0] - radius, 0.0, 0.0]);
            out.push([center[0] + radius, 0.0, 0.0]);
        }
        2 => {
            let m = (ceil(2.0 * core::f64::consts::PI * radius / (0.5 * h)) as usize).clamp(16, 4096);
            for k in 0..m {
                let a = 2.0 * core::f64::consts::PI * k as f64 / m as f64;
                out.push([center[0] + radius * cos(a), center[1] + radius * sin(a), 0.0]);
            }
        }
        _ => {
            let area = 4.0 * core::f64::consts::PI * radius * radius / (0.25 * h * h);
            let m = (ceil(area) as usize).clamp(64, 8192);
            let golden = core::f64::consts::PI * (3.0 - sqrt(5.0));
            for k in 0..m {
                let z = 1.0 - 2.0 * (k as f64 + 0.5) / m as f64;
                let rr = sqrt((1.0 - z * z).max(0.0));
                let a = golden * k as f64;
                out.push([
                    center[0] + radius * rr * cos(a),
                    center[1] + radius * rr * sin(a),
                    center[2] + radius * z,
                ]);
            }
        }
    }
    out
}

/// `sup |u - u(center)|` over the region (or, with an affine part,
/// `sup |u - value - gradient·(x - x₀)|`).
///
/// The supremum runs over the region's nodes and, for balls, over
/// interpolated samples on the bounding sphere at each time node.
pub fn sup_oscillation(
    u: &GridFunction,
    region: &Region,
    center: &SpaceTimePoint,
    affine_part: Option<AffinePart>,
) -> Result<f64> {
    let grid = u.grid();
    let dim = grid.dim();
    if !region.contains_space(dim, &center.x) || !region.contains_time(center.t, grid.dt()) {
        return Err(Error::OutOfDomain(format!(
            "center {:?} at t = {} is not inside the region",
            center.x, center.t
        )));
    }
    let (base, slope) = match affine_part {
        Some((v, g)) => (v, g),
        None => (interpolate(u, center)?, [0.0; 3]),
    };
    let dev = |x: &Point, v: f64| -> f64 {
        let mut a = base;
        for k in 0..dim {
            a += slope[k] * (x[k] - center.x[k]);
        }
        (v - a).abs()
    };
    let nodes = region.spatial_nodes(grid);
    let times = region.time_nodes(grid);
    if nodes.is_empty() || times.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let pts: Vec<Point> = nodes.iter().map(|&s| grid.node_point(s)).collect();
    let rim: Vec<Point> = match region.shape {
        Shape::Ball { center: c, radius } => sphere_samples(dim, &c, radius, grid.h())
            .into_iter()
            .filter(|x| grid.contains_space(x))
            .collect(),
        _ => Vec::new(),
    };
    let mut sup: f64 = 0.0;
    for &j in &times {
        let v = u.slice(j);
        for (x, &s) in pts.iter().zip(&nodes) {
            sup = sup.max(dev(x, v[s]));
        }
        for x in &rim {
            sup = sup.max(dev(x, interpolate_slice(u, j, x)?));
        }
    }
    Ok(sup)
}

/// Bound on the multilinear interpolation error over the region:
/// `Σ_a (h²/8) max|∂_aa u| + (dt²/8) max|∂_tt u|`, with derivatives
/// replaced by second differences.
pub fn interpolation_error_estimate(u: &GridFunction, region: &Region) -> f64 {
    let grid = u.grid();
    let c = grid.counts();
    let nodes = region.spatial_nodes(grid);
    let times = region.time_nodes(grid);
    let mut axis_max = [0.0f64; 3];
    let mut t_max = 0.0f64;
    for &j in &times {
        let v = u.slice(j);
        for &s in &nodes {
            let idx = grid.unravel(s);
            for a in 0..grid.dim() {
                if idx[a] > 0 && idx[a] + 1 < c[a] {
                    let st = stride(c, a);
                    axis_max[a] = axis_max[a].max((v[s + st] - 2.0 * v[s] + v[s - st]).abs());
                }
            }
            if j > 0 && j < grid.steps() {
                let d2 = u.at(j + 1, s) - 2.0 * v[s] + u.at(j - 1, s);
                t_max = t_max.max(d2.abs());
            }
        }
    }
    (axis_max.iter().sum::<f64>() + t_max) / 8.0
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::SpaceTimeGrid;

    fn g1(h: f64) -> SpaceTimeGrid {
        SpaceTimeGrid::cube(1, 1.0, h, 0.1, 0.0, 1.0).unwrap()
    }

    #[test]
    fn gradient_exact_on_affine() {
        let g = SpaceTimeGrid::cube(3, 1.0, 0.25, 0.5, 0.0, 1.0).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, t| 1.0 + 0.5 * x[0] - 2.0 * x[1] + 3.0 * x[2] + t).unwrap();
        for s in 0..g.spatial_len() {
            let gr = node_gradient(&u, 1, s);
            assert!((gr[0] - 0.5).abs() < 1e-12 && (gr[1] + 2.0).abs() < 1e-12 && (gr[2] - 3.0).abs() < 1e-12);
            if g.is_boundary(s) {
                assert!(gradient(&u, 1, s).is_err());
            }
        }
        let c = GridFunction::from_fn(g.clone(), |_, _| 4.0).unwrap();
        assert_eq!(gradient(&c, 0, g.spatial_index([2, 2, 2])).unwrap(), [0.0; 3]);
        let gp = gradient_at(&u, &SpaceTimePoint::new([0.13, -0.41, 0.77], 0.3)).unwrap();
        assert!((gp[1] + 2.0).abs() < 1e-12);
    }

    #[test]
    fn gradient_second_order() {
        let mut errs = Vec::new();
        for h in [1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0] {
            let g = g1(h);
            let u = GridFunction::from_fn(g.clone(), |x, _| libm::sin(x[0])).unwrap();
            let mut e: f64 = 0.0;
            for s in 1..g.spatial_len() - 1 {
                let x = g.node_point(s)[0];
                e = e.max((gradient(&u, 0, s).unwrap()[0] - libm::cos(x)).abs());
            }
            errs.push(e);
        }
        for w in errs.windows(2) {
            let order = libm::log2(w[0] / w[1]);
            assert!(order > 1.9, "{order}");
        }
    }

    #[test]
    fn steklov_examples() {
        let g = g1(0.25);
        let u = GridFunction::from_fn(g.clone(), |_, t| t).unwrap();
        let a = steklov_average(&u, 0.3).unwrap();
        for j in 0..=7 {
            assert!((a.at(j, 2) - (g.time(j) + 0.15)).abs() < 1e-12);
        }
        assert_eq!(a.at(9, 2), 0.0);
        let c = GridFunction::from_fn(g.clone(), |x, _| x[0]).unwrap();
        let a = steklov_average(&c, 0.5).unwrap();
        assert!((a.at(2, 3) - c.at(2, 3)).abs() < 1e-15);
        assert!(steklov_average(&u, 1.5).is_err());
        assert!(steklov_average(&u, 0.15).is_err());
    }

    #[test]
    fn oscillation_examples() {
        let g = SpaceTimeGrid::cube(2, 1.0, 1.0 / 32.0, 0.1, 0.0, 1.0).unwrap();
        let center = SpaceTimePoint::new([0.0; 3], 1.0);
        let region = Region::ball([0.0; 3], 0.5, 0.5, 1.0);
        let c = GridFunction::from_fn(g.clone(), |_, _| 2.0).unwrap();
        assert_eq!(sup_oscillation(&c, &region, &center, None).unwrap(), 0.0);
        let a = GridFunction::from_fn(g.clone(), |x, _| 1.0 + 0.3 * x[0] - 0.2 * x[1]).unwrap();
        let s = sup_oscillation(&a, &region, &center, Some((1.0, [0.3, -0.2, 0.0]))).unwrap();
        assert!(s < 1e-14);
        let r = GridFunction::from_fn(g.clone(), |x, _| libm::pow(libm::hypot(x[0], x[1]), 1.5)).unwrap();
        let s = sup_oscillation(&r, &region, &center, None).unwrap();
        assert!((s - libm::pow(0.5, 1.5)).abs() < 1e-3, "{s}");
        let away = SpaceTimePoint::new([0.9, 0.0, 0.0], 1.0);
        assert!(sup_oscillation(&c, &region, &away, None).is_err());
    }
}
