//! Uniform space-time grids and nodal fields.
//!
//! Space is the box `[-L_0, L_0] × … × [-L_{n-1}, L_{n-1}]` with spacing
//! `h` on every axis, time is `[t_start, t_end]` with step `dt`. Values are
//! stored time-major, then row-major in space:
//! `idx = ((j·N0 + i0)·N1 + i1)·N2 + i2` with `N_a = 1` for unused axes.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::math::round;
use crate::{Error, Result};

pub(crate) mod calculus;
pub(crate) mod norm;
pub mod quadrature;

pub use calculus::{
    gradient, gradient_at, gradient_slice, interpolate, interpolate_slice,
    interpolation_error_estimate, steklov_average, sup_oscillation, AffinePart,
};
pub use norm::{anisotropic_norm, energy_norm, spatial_weights, time_weights, EnergyNorm};

/// Spatial point; coordinates beyond the grid dimension are ignored and
/// kept at zero.
pub type Point = [f64; 3];

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpaceTimePoint {
    pub x: Point,
    pub t: f64,
}

impl SpaceTimePoint {
    pub fn new(x: Point, t: f64) -> Self {
        Self { x, t }
    }
}

/// Euclidean distance over the first `dim` coordinates.
pub fn distance(dim: usize, a: &Point, b: &Point) -> f64 {
    let mut s = 0.0;
    for k in 0..dim {
        let d = a[k] - b[k];
        s += d * d;
    }
    crate::math::sqrt(s)
}

pub fn norm(dim: usize, v: &Point) -> f64 {
    distance(dim, v, &[0.0; 3])
}

const SNAP_TOL: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SpaceTimeGrid {
    dim: usize,
    half_width: [f64; 3],
    h: f64,
    dt: f64,
    t_start: f64,
    t_end: f64,
    counts: [usize; 3],
    steps: usize,
}

impl SpaceTimeGrid {
    /// `half_width` must have one entry per spatial axis and each
    /// `2·L/h` must be an integer (up to rounding), giving at least three
    /// nodes per axis. `t_end - t_start` must be a multiple of `dt`.
    pub fn new(
        dim: usize,
        half_width: &[f64],
        h: f64,
        dt: f64,
        t_start: f64,
        t_end: f64,
    ) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::InvalidGrid(format!("dimension must be 1, 2 or 3, got {dim}")));
        }
        if half_width.len() != dim {
            return Err(Error::InvalidGrid(format!(
                "expected {dim} half-widths, got {}",
                half_width.len()
            )));
        }
        if !(h > 0.0 && h.is_finite()) {
            return Err(invalid("h", format!("must be positive, got {h}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(invalid("dt", format!("must be positive, got {dt}")));
        }
        if !(t_end > t_start && t_start.is_finite() && t_end.is_finite()) {
            return Err(Error::InvalidGrid(format!(
                "time range ({t_start}, {t_end}] is empty"
            )));
        }
        let mut hw = [0.0; 3];
        let mut counts = [1usize; 3];
        for (a, &l) in half_width.iter().enumerate() {
            let cells = 2.0 * l / h;
            let m = round(cells);
            if !(l > 0.0) || (cells - m).abs() > SNAP_TOL * m.max(1.0) {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: 2L/h = {cells} is not a positive integer"
                )));
            }
            if m < 2.0 {
                return Err(Error::InvalidGrid(format!(
                    "axis {a}: need at least 3 nodes, got {}",
                    m as usize + 1
                )));
            }
            counts[a] = m as usize + 1;
            hw[a] = l;
        }
        let span = (t_end - t_start) / dt;
        let steps = round(span);
        if steps < 1.0 || (span - steps).abs() > SNAP_TOL * steps {
            return Err(Error::InvalidGrid(format!(
                "time span {} is not a multiple of dt = {dt}",
                t_end - t_start
            )));
        }
        Ok(Self {
            dim,
            half_width: hw,
            h,
            dt,
            t_start,
            t_end,
            counts,
            steps: steps as usize,
        })
    }

    /// Same half-width on every axis.
    pub fn cube(dim: usize, half_width: f64, h: f64, dt: f64, t_start: f64, t_end: f64) -> Result<Self> {
        Self::new(dim, &[half_width; 3][..dim.min(3)], h, dt, t_start, t_end)
    }

    /// Same spatial layout, every `stride`-th time node.
    pub fn coarsened_in_time(&self, stride: usize) -> Result<Self> {
        if stride == 0 || self.steps % stride != 0 {
            return Err(Error::InvalidGrid(format!(
                "stride {stride} does not divide {} steps",
                self.steps
            )));
        }
        let mut g = self.clone();
        g.dt = self.dt * stride as f64;
        g.steps = self.steps / stride;
        Ok(g)
    }

    /// Same spatial layout over a different time range.
    pub fn with_time(&self, dt: f64, t_start: f64, t_end: f64) -> Result<Self> {
        Self::new(self.dim, &self.half_width[..self.dim], self.h, dt, t_start, t_end)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }
    pub fn h(&self) -> f64 {
        self.h
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }
    pub fn t_start(&self) -> f64 {
        self.t_start
    }
    pub fn t_end(&self) -> f64 {
        self.t_end
    }
    pub fn half_width(&self) -> [f64; 3] {
        self.half_width
    }
    /// Nodes per axis (1 for unused axes).
    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }
    /// Number of time steps; there are `steps() + 1` time nodes.
    pub fn steps(&self) -> usize {
        self.steps
    }
    pub fn time_nodes(&self) -> usize {
        self.steps + 1
    }
    pub fn spatial_len(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }
    pub fn len(&self) -> usize {
        self.spatial_len() * self.time_nodes()
    }
    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn coord(&self, axis: usize, i: usize) -> f64 {
        if axis < self.dim {
            -self.half_width[axis] + i as f64 * self.h
        } else {
            0.0
        }
    }

    pub fn time(&self, j: usize) -> f64 {
        if j == self.steps {
            self.t_end
        } else {
            self.t_start + j as f64 * self.dt
        }
    }

    pub fn spatial_index(&self, i: [usize; 3]) -> usize {
        (i[0] * self.counts[1] + i[1]) * self.counts[2] + i[2]
    }

    pub fn unravel(&self, s: usize) -> [usize; 3] {
        let i2 = s % self.counts[2];
        let rest = s / self.counts[2];
        [rest / self.counts[1], rest % self.counts[1], i2]
    }

    pub fn index(&self, j: usize, s: usize) -> usize {
        j * self.spatial_len() + s
    }

    pub fn node_point(&self, s: usize) -> Point {
        let i = self.unravel(s);
        [self.coord(0, i[0]), self.coord(1, i[1]), self.coord(2, i[2])]
    }

    /// Whether spatial node `s` lies on the boundary of the box.
    pub fn is_boundary(&self, s: usize) -> bool {
        let i = self.unravel(s);
        (0..self.dim).any(|a| i[a] == 0 || i[a] + 1 == self.counts[a])
    }

    /// Node index nearest to `x` on each axis, clamped into the grid.
    pub fn nearest_node(&self, x: &Point) -> [usize; 3] {
        let mut i = [0usize; 3];
        for a in 0..self.dim {
            let f = round((x[a] + self.half_width[a]) / self.h);
            i[a] = f.clamp(0.0, (self.counts[a] - 1) as f64) as usize;
        }
        i
    }

    /// Time node nearest to `t`, clamped.
    pub fn nearest_time(&self, t: f64) -> usize {
        let f = round((t - self.t_start) / self.dt);
        f.clamp(0.0, self.steps as f64) as usize
    }

    pub fn contains_space(&self, x: &Point) -> bool {
        (0..self.dim).all(|a| x[a].abs() <= self.half_width[a] * (1.0 + 1e-12))
    }

    pub fn contains_time(&self, t: f64) -> bool {
        let tol = 1e-9 * self.dt;
        t >= self.t_start - tol && t <= self.t_end + tol
    }

    /// Space-time measure of the whole grid domain.
    pub fn volume(&self) -> f64 {
        let mut v = self.t_end - self.t_start;
        for a in 0..self.dim {
            v *= 2.0 * self.half_width[a];
        }
        v
    }
}

/// Scalar values on every node of a [`SpaceTimeGrid`].
#[derive(Clone, Debug, PartialEq)]
pub struct GridFunction {
    grid: SpaceTimeGrid,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: SpaceTimeGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::ShapeMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if let Some(index) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { index });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: SpaceTimeGrid) -> Self {
        let n = grid.len();
        Self {
            grid,
            values: vec![0.0; n],
        }
    }

    /// Samples `f(x, t)` at every node.
    pub fn from_fn(grid: SpaceTimeGrid, mut f: impl FnMut(&Point, f64) -> f64) -> Result<Self> {
        let ns = grid.spatial_len();
        let pts: Vec<Point> = (0..ns).map(|s| grid.node_point(s)).collect();
        let mut values = Vec::with_capacity(grid.len());
        for j in 0..grid.time_nodes() {
            let t = grid.time(j);
            values.extend(pts.iter().map(|x| f(x, t)));
        }
        Self::new(grid, values)
    }

    /// Repeats one spatial field at every time node.
    pub fn from_spatial(grid: SpaceTimeGrid, field: &[f64]) -> Result<Self> {
        if field.len() != grid.spatial_len() {
            return Err(Error::ShapeMismatch {
                expected: grid.spatial_len(),
                got: field.len(),
            });
        }
        let mut values = Vec::with_capacity(grid.len());
        for _ in 0..grid.time_nodes() {
            values.extend_from_slice(field);
        }
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &SpaceTimeGrid {
        &self.grid
    }
    pub fn values(&self) -> &[f64] {
        &self.values
    }
    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn slice(&self, j: usize) -> &[f64] {
        let ns = self.grid.spatial_len();
        &self.values[j * ns..(j + 1) * ns]
    }

    pub fn at(&self, j: usize, s: usize) -> f64 {
        self.values[self.grid.index(j, s)]
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Result<Self> {
        Self::new(self.grid.clone(), self.values.iter().map(|&v| f(v)).collect())
    }

    pub fn scaled(&self, c: f64) -> Result<Self> {
        self.map(|v| c * v)
    }

    /// Pointwise `self - other` on the same grid.
    pub fn sub(&self, other: &Self) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::InvalidGrid("grid functions live on different grids".into()));
        }
        Self::new(
            self.grid.clone(),
            self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect(),
        )
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Shape {
    Ball { center: Point, radius: f64 },
    Box { center: Point, half: Point },
    Whole,
}

/// A spatial shape times the time interval `[t_lo, t_hi]`.
///
/// Quadrature integrates over the closed interval. Node membership
/// in time uses `t_lo - dt/2 < t_j ≤ t_hi`, so a half-open cylinder
/// `(t_lo, t_hi]` picks up its nearest bottom node without flapping.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Region {
    pub shape: Shape,
    pub t_lo: f64,
    pub t_hi: f64,
}

impl Region {
    pub fn ball(center: Point, radius: f64, t_lo: f64, t_hi: f64) -> Self {
        Self {
            shape: Shape::Ball { center, radius },
            t_lo,
            t_hi,
        }
    }

    pub fn boxed(center: Point, half: Point, t_lo: f64, t_hi: f64) -> Self {
        Self {
            shape: Shape::Box { center, half },
            t_lo,
            t_hi,
        }
    }

    pub fn whole(grid: &SpaceTimeGrid) -> Self {
        Self {
            shape: Shape::Whole,
            t_lo: grid.t_start(),
            t_hi: grid.t_end(),
        }
    }

    pub fn contains_space(&self, dim: usize, x: &Point) -> bool {
        let tol = 1e-12;
        match self.shape {
            Shape::Whole => true,
            Shape::Ball { center, radius } => {
                distance(dim, x, &center) <= radius * (1.0 + tol) + tol
            }
            Shape::Box { center, half } => {
                (0..dim).all(|a| (x[a] - center[a]).abs() <= half[a] * (1.0 + tol) + tol)
            }
        }
    }

    pub fn contains_time(&self, t: f64, dt: f64) -> bool {
        t > self.t_lo - 0.5 * dt && t <= self.t_hi + 1e-9 * dt
    }

    /// Spatial nodes of `grid` inside the shape.
    pub fn spatial_nodes(&self, grid: &SpaceTimeGrid) -> Vec<usize> {
        let (lo, hi) = self.index_box(grid);
        let mut out = Vec::new();
        for i0 in lo[0]..=hi[0] {
            for i1 in lo[1]..=hi[1] {
                for i2 in lo[2]..=hi[2] {
                    let s = grid.spatial_index([i0, i1, i2]);
                    if self.contains_space(grid.dim(), &grid.node_point(s)) {
                        out.push(s);
                    }
                }
            }
        }
        out
    }

    /// Time nodes of `grid` inside the interval.
    pub fn time_nodes(&self, grid: &SpaceTimeGrid) -> Vec<usize> {
        (0..grid.time_nodes())
            .filter(|&j| self.contains_time(grid.time(j), grid.dt()))
            .collect()
    }

    /// Inclusive index bounds of the shape's bounding box, padded by one
    /// node and clamped to the grid.
    pub(crate) fn index_box(&self, grid: &SpaceTimeGrid) -> ([usize; 3], [usize; 3]) {
        let c = grid.counts();
        let mut lo = [0usize; 3];
        let mut hi = [c[0] - 1, c[1] - 1, c[2] - 1];
        let (center, half) = match self.shape {
            Shape::Whole => return (lo, hi),
            Shape::Ball { center, radius } => (center, [radius; 3]),
            Shape::Box { center, half } => (center, half),
        };
        let hw = grid.half_width();
        for a in 0..grid.dim() {
            let a_lo = crate::math::floor((center[a] - half[a] + hw[a]) / grid.h()) - 1.0;
            let a_hi = crate::math::ceil((center[a] + half[a] + hw[a]) / grid.h()) + 1.0;
            let top = (c[a] - 1) as f64;
            if a_hi < 0.0 || a_lo > top {
                lo[a] = 1;
                hi[a] = 0;
            } else {
                lo[a] = a_lo.clamp(0.0, top) as usize;
                hi[a] = a_hi.clamp(0.0, top) as usize;
            }
        }
        (lo, hi)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_layout() {
        let g = SpaceTimeGrid::new(2, &[1.0, 0.5], 0.25, 0.1, 0.0, 1.0).unwrap();
        assert_eq!(g.counts(), [9, 5, 1]);
        assert_eq!(g.steps(), 10);
        assert_eq!(g.coord(0, 4), 0.0);
        assert_eq!(g.time(10), 1.0);
        let s = g.spatial_index([3, 2, 0]);
        assert_eq!(g.unravel(s), [3, 2, 0]);
        assert_eq!(g.node_point(s), [-0.25, 0.0, 0.0]);
        assert!(g.is_boundary(g.spatial_index([0, 2, 0])));
        assert!(!g.is_boundary(s));
    }

    #[test]
    fn grid_rejects_bad_spacing() {
        assert!(SpaceTimeGrid::cube(1, 1.0, 0.3, 0.1, 0.0, 1.0).is_err());
        assert!(SpaceTimeGrid::cube(1, 1.0, 2.0, 0.1, 0.0, 1.0).is_err());
        assert!(SpaceTimeGrid::cube(1, 1.0, 0.5, 0.3, 0.0, 1.0).is_err());
        assert!(SpaceTimeGrid::cube(4, 1.0, 0.5, 0.1, 0.0, 1.0).is_err());
        assert!(SpaceTimeGrid::cube(1, 1.0, 0.5, 0.1, 0.0, 1.0).is_ok());
    }

    #[test]
    fn grid_function_validates() {
        let g = SpaceTimeGrid::cube(1, 1.0, 0.5, 0.5, 0.0, 1.0).unwrap();
        assert!(GridFunction::new(g.clone(), vec![0.0; 14]).is_err());
        let mut v = vec![0.0; 15];
        v[3] = f64::NAN;
        assert_eq!(GridFunction::new(g, v), Err(Error::NonFinite { index: 3 }));
    }

    #[test]
    fn region_membership() {
        let g = SpaceTimeGrid::cube(2, 1.0, 0.25, 0.1, 0.0, 1.0).unwrap();
        let r = Region::ball([0.0; 3], 0.5, 0.56, 1.0);
        assert_eq!(r.spatial_nodes(&g).len(), 13);
        assert_eq!(r.time_nodes(&g), vec![6, 7, 8, 9, 10]);
    }
}
