//! Source terms `f(x, t)` and their `L^{q,r}` certificates.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::grid::norm::node_cell;
use crate::grid::quadrature::{power_integral_box_with, weighted_power_integral, Rules};
use crate::grid::{anisotropic_norm, distance, GridFunction, Point, Region, SpaceTimeGrid};
use crate::math::powf;
use crate::{Error, Extended, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Sign {
    /// Factor is nonnegative.
    Positive,
    /// Factor is multiplied by the sign of the first coordinate (space) or
    /// of `t - t_origin` (time) measured from the singular point; the
    /// singular point itself counts as positive.
    Odd,
}

#[derive(Clone, Debug, PartialEq)]
pub enum SourceKind {
    Zero,
    Constant(f64),
    /// `amplitude · |x - center|^{-a} · |t - t_origin|^{-b}`, optionally
    /// with sign changes.
    SeparablePower {
        amplitude: f64,
        a: f64,
        b: f64,
        center: Point,
        t_origin: f64,
        signs: [Sign; 2],
    },
    Tabulated(GridFunction),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceSpec {
    pub kind: SourceKind,
    /// Integrability class `(q, r)` in which the norm is certified.
    pub target: Option<(Extended, Extended)>,
}

impl SourceSpec {
    pub fn zero() -> Self {
        Self {
            kind: SourceKind::Zero,
            target: None,
        }
    }

    pub fn constant(c: f64) -> Self {
        Self {
            kind: SourceKind::Constant(c),
            target: None,
        }
    }

    pub fn separable_power(amplitude: f64, a: f64, b: f64, center: Point, t_origin: f64) -> Self {
        Self {
            kind: SourceKind::SeparablePower {
                amplitude,
                a,
                b,
                center,
                t_origin,
                signs: [Sign::Positive; 2],
            },
            target: None,
        }
    }

    pub fn tabulated(f: GridFunction) -> Self {
        Self {
            kind: SourceKind::Tabulated(f),
            target: None,
        }
    }

    pub fn with_target(mut self, q: impl Into<Extended>, r: impl Into<Extended>) -> Self {
        self.target = Some((q.into(), r.into()));
        self
    }

    pub fn with_signs(mut self, space: Sign, time: Sign) -> Self {
        if let SourceKind::SeparablePower { signs, .. } = &mut self.kind {
            *signs = [space, time];
        }
        self
    }

    pub fn is_zero(&self) -> bool {
        match &self.kind {
            SourceKind::Zero => true,
            SourceKind::Constant(c) => *c == 0.0,
            SourceKind::SeparablePower { amplitude, .. } => *amplitude == 0.0,
            SourceKind::Tabulated(f) => f.values().iter().all(|&v| v == 0.0),
        }
    }

    /// Finite-norm certificate: a separable power lies in `L^{q,r}` iff
    /// `a·q < n` and `b·r < 1` (with `a = 0`, resp. `b = 0`, for infinite
    /// exponents). Other kinds are bounded and always qualify.
    pub fn admissible_in(&self, q: Extended, r: Extended, n: usize) -> bool {
        match self.kind {
            SourceKind::SeparablePower { a, b, .. } => {
                let space = match q {
                    Extended::Infinite => a == 0.0,
                    Extended::Finite(q) => a * q < n as f64,
                };
                let time = match r {
                    Extended::Infinite => b == 0.0,
                    Extended::Finite(r) => b * r < 1.0,
                };
                space && time
            }
            _ => true,
        }
    }

    /// Replaces the amplitude (constant value, power amplitude) so that the
    /// certified norm is scaled by `factor`.
    pub fn scaled(&self, factor: f64) -> Result<Self> {
        let kind = match &self.kind {
            SourceKind::Zero => SourceKind::Zero,
            SourceKind::Constant(c) => SourceKind::Constant(c * factor),
            SourceKind::SeparablePower {
                amplitude,
                a,
                b,
                center,
                t_origin,
                signs,
            } => SourceKind::SeparablePower {
                amplitude: amplitude * factor,
                a: *a,
                b: *b,
                center: *center,
                t_origin: *t_origin,
                signs: *signs,
            },
            SourceKind::Tabulated(f) => SourceKind::Tabulated(f.scaled(factor)?),
        };
        Ok(Self {
            kind,
            target: self.target,
        })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SourceField {
    pub field: GridFunction,
    /// `‖f‖_{L^{q,r}}` over the whole grid, for the source's target.
    pub norm: Option<f64>,
}

fn sign_of(sign: Sign, d: f64) -> f64 {
    match sign {
        Sign::Positive => 1.0,
        Sign::Odd if d < 0.0 => -1.0,
        Sign::Odd => 1.0,
    }
}

/// `e`-th power mean of `|x - c|^{-a}` over every node cell (exact
/// integration of the singular power), with the spatial sign applied.
fn spatial_power_means(grid: &SpaceTimeGrid, a: f64, e: f64, center: &Point, sign: Sign) -> Vec<f64> {
    let dim = grid.dim();
    let rules = Rules::new();
    (0..grid.spatial_len())
        .map(|s| {
            let x = grid.node_point(s);
            let sg = sign_of(sign, x[0] - center[0]);
            if a == 0.0 {
                return sg;
            }
            let (lo, hi) = node_cell(grid, s);
            let vol: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
            let integral = power_integral_box_with(&rules, dim, &lo, &hi, center, a * e);
            sg * powf(integral / vol, 1.0 / e)
        })
        .collect()
}

/// `e`-th power mean of `|t - t0|^{-b}` against each hat function.
fn temporal_power_means(grid: &SpaceTimeGrid, b: f64, e: f64, t0: f64, sign: Sign) -> Vec<f64> {
    let dt = grid.dt();
    (0..grid.time_nodes())
        .map(|j| {
            let tj = grid.time(j);
            let sg = sign_of(sign, tj - t0);
            if b == 0.0 {
                return sg;
            }
            let mut num = 0.0;
            let mut den = 0.0;
            if j > 0 {
                let tl = grid.time(j - 1);
                num += weighted_power_integral(tl, tj, t0, b * e, 0.0, 1.0 / dt);
                den += 0.5 * dt;
            }
            if j < grid.steps() {
                let tr = grid.time(j + 1);
                num += weighted_power_integral(tj, tr, t0, b * e, 1.0, -1.0 / dt);
                den += 0.5 * dt;
            }
            sg * powf(num / den, 1.0 / e)
        })
        .collect()
}

fn check_power(a: f64, b: f64, n: usize) -> Result<()> {
    if !(a >= 0.0 && a < n as f64) {
        return Err(Error::SourceNotIntegrable(format!(
            "spatial exponent a = {a} must lie in [0, n)"
        )));
    }
    if !(b >= 0.0 && b < 1.0) {
        return Err(Error::SourceNotIntegrable(format!(
            "temporal exponent b = {b} must lie in [0, 1)"
        )));
    }
    Ok(())
}

/// Nodal source values and, when the source carries a target `(q, r)`, the
/// certified norm.
///
/// Separable powers are never sampled at their singular point. Node values
/// are power means over the node cell in space and against the hat function
/// in time, with exponents `q` and `r` when a finite target is given (so the
/// cell-centred/trapezoid quadrature of `|f|^q` and `|f|^r` integrates the
/// singular factors exactly cell by cell) and plain means otherwise.
pub fn make_source(spec: &SourceSpec, grid: &SpaceTimeGrid) -> Result<SourceField> {
    let n = grid.dim();
    if let Some((q, r)) = spec.target {
        if !spec.admissible_in(q, r, n) {
            return Err(Error::SourceNotIntegrable(format!(
                "source is not in L^{{{q},{r}}} for n = {n}"
            )));
        }
    }
    let field = match &spec.kind {
        SourceKind::Zero => GridFunction::zeros(grid.clone()),
        SourceKind::Constant(c) => GridFunction::from_spatial(grid.clone(), &vec![*c; grid.spatial_len()])?,
        SourceKind::SeparablePower {
            amplitude,
            a,
            b,
            center,
            t_origin,
            signs,
        } => {
            check_power(*a, *b, n)?;
            let (eq, er) = match spec.target {
                Some((q, r)) => (q.finite().unwrap_or(1.0), r.finite().unwrap_or(1.0)),
                None => (1.0, 1.0),
            };
            let sx = spatial_power_means(grid, *a, eq, center, signs[0]);
            let st = temporal_power_means(grid, *b, er, *t_origin, signs[1]);
            let mut values = Vec::with_capacity(grid.len());
            for tj in &st {
                values.extend(sx.iter().map(|v| amplitude * v * tj));
            }
            GridFunction::new(grid.clone(), values)?
        }
        SourceKind::Tabulated(f) => {
            if f.grid() != grid {
                return Err(Error::InvalidGrid("tabulated source lives on a different grid".into()));
            }
            f.clone()
        }
    };
    let norm = match spec.target {
        Some((q, r)) => Some(anisotropic_norm(&field, q, r, &Region::whole(grid))?),
        None => None,
    };
    Ok(SourceField { field, norm })
}

/// Per-step source for the time stepper: the time average of `f` over
/// `[t_j, t_{j+1}]` at every spatial node.
pub(crate) struct StepSource<'a> {
    kind: StepKind<'a>,
}

enum StepKind<'a> {
    Zero,
    Constant(f64),
    Power {
        space: Vec<f64>,
        amplitude: f64,
        b: f64,
        t_origin: f64,
        sign: Sign,
    },
    Tabulated(&'a GridFunction),
}

impl<'a> StepSource<'a> {
    pub(crate) fn new(spec: &'a SourceSpec, grid: &SpaceTimeGrid) -> Result<Self> {
        let kind = match &spec.kind {
            SourceKind::Zero => StepKind::Zero,
            SourceKind::Constant(c) => StepKind::Constant(*c),
            SourceKind::SeparablePower {
                amplitude,
                a,
                b,
                center,
                t_origin,
                signs,
            } => {
                check_power(*a, *b, grid.dim())?;
                let h = grid.h();
                let dim = grid.dim();
                let rules = Rules::new();
                let space = (0..grid.spatial_len())
                    .map(|s| {
                        let x = grid.node_point(s);
                        let sg = sign_of(signs[0], x[0] - center[0]);
                        if *a == 0.0 {
                            return sg;
                        }
                        if distance(dim, &x, center) > 3.0 * h {
                            return sg * powf(distance(dim, &x, center), -a);
                        }
                        let (lo, hi) = node_cell(grid, s);
                        let vol: f64 = (0..dim).map(|k| hi[k] - lo[k]).product();
                        sg * power_integral_box_with(&rules, dim, &lo, &hi, center, *a) / vol
                    })
                    .collect();
                StepKind::Power {
                    space,
                    amplitude: *amplitude,
                    b: *b,
                    t_origin: *t_origin,
                    sign: signs[1],
                }
            }
            SourceKind::Tabulated(f) => {
                if f.grid().spatial_len() != grid.spatial_len()
                    || f.grid().time_nodes() != grid.time_nodes()
                {
                    return Err(Error::InvalidGrid(
                        "tabulated source does not match the solver grid".into(),
                    ));
                }
                StepKind::Tabulated(f)
            }
        };
        Ok(Self { kind })
    }

    pub(crate) fn is_zero(&self) -> bool {
        matches!(self.kind, StepKind::Zero)
    }

    /// Writes the step average into `out`.
    pub(crate) fn fill(&self, grid: &SpaceTimeGrid, j: usize, out: &mut [f64]) {
        match &self.kind {
            StepKind::Zero => out.iter_mut().for_each(|v| *v = 0.0),
            StepKind::Constant(c) => out.iter_mut().for_each(|v| *v = *c),
            StepKind::Power {
                space,
                amplitude,
                b,
                t_origin,
                sign,
            } => {
                let t0 = grid.time(j);
                let t1 = grid.time(j + 1);
                let mean = if *b == 0.0 {
                    1.0
                } else {
                    let mid = 0.5 * (t0 + t1);
                    let sg = match sign {
                        Sign::Positive => 1.0,
                        Sign::Odd => {
                            // signed average across a step containing t_origin
                            let left = weighted_power_integral(t0, t1.min(*t_origin), *t_origin, *b, 1.0, 0.0);
                            let right = weighted_power_integral(t0.max(*t_origin), t1, *t_origin, *b, 1.0, 0.0);
                            let total = left + right;
                            if total > 0.0 {
                                (right - left) / total
                            } else {
                                sign_of(Sign::Odd, mid - t_origin)
                            }
                        }
                    };
                    sg * weighted_power_integral(t0, t1, *t_origin, *b, 1.0, 0.0) / (t1 - t0)
                };
                let scale = amplitude * mean;
                for (o, s) in out.iter_mut().zip(space) {
                    *o = scale * s;
                }
            }
            StepKind::Tabulated(f) => {
                let a = f.slice(j);
                let b = f.slice(j + 1);
                for ((o, x), y) in out.iter_mut().zip(a).zip(b) {
                    *o = 0.5 * (x + y);
                }
            }
        }
    }
}

pub(crate) fn check_amplitude(spec: &SourceSpec) -> Result<()> {
    match &spec.kind {
        SourceKind::Constant(c) if !c.is_finite() => Err(invalid("source", "constant must be finite")),
        SourceKind::SeparablePower { amplitude, .. } if !amplitude.is_finite() => {
            Err(invalid("source", "amplitude must be finite"))
        }
        _ => Ok(()),
    }
}
