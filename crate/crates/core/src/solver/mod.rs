//! Finite-difference solver for `u_t - div(|∇u|^{p-2}∇u) = f` with
//! Dirichlet data.
//!
//! Fluxes live on cell faces. The diffusivity on the face between nodes `s`
//! and `s + e_a` is `(|G|² + ε²)^{(p-2)/2}`, where `G` has the one-sided
//! difference as its normal component and the average of the two nodal
//! central differences as tangential components. The default scheme lags
//! the diffusivity and solves one symmetric positive definite system per
//! step,
//!
//! ```text
//! (u^{j+1} - u^j)/dt - div_h(k(u^j) ∇_h u^{j+1}) = f̄^j,
//! ```
//!
//! where `f̄^j` is the average of `f` over `[t_j, t_{j+1}]`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::grid::calculus::{slice_gradient, stride};
use crate::grid::{GridFunction, Point, SpaceTimeGrid};
use crate::math::powf;
use crate::{Error, Result};

mod pcg;
mod reference;
mod source;
mod weak;

pub use reference::{
    barenblatt_constant, barenblatt_radius, barenblatt_value, reference_residual, BARENBLATT_SUPPORT_FRACTION,
    reference_solutions, Reference,
};
pub use source::{make_source, Sign, SourceField, SourceKind, SourceSpec};
pub use weak::{
    caccioppoli_gap, caccioppoli_terms, fit_caccioppoli_constant, standard_cutoff, test_battery,
    weak_residual, weak_residual_field, CaccioppoliTerms,
};

use pcg::{pcg, PcgWork};
use source::StepSource;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Scheme {
    SemiImplicit,
    Explicit,
}

/// Dirichlet data on the spatial boundary for `t > t_start`.
#[derive(Clone, Debug, PartialEq)]
pub enum BoundaryData {
    /// Keep the boundary values of the initial field.
    HoldInitial,
    Constant(f64),
    /// `value + gradient · x`.
    Affine { value: f64, gradient: Point },
    /// Boundary values read from a field on the solver grid.
    Field(GridFunction),
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolveConfig {
    pub p: f64,
    /// Diffusivity regularisation `ε`; `None` means `ε = h`.
    pub eps_reg: Option<f64>,
    pub scheme: Scheme,
    /// Relative residual target of each linear solve.
    pub newton_tol: f64,
    /// Iteration cap of each linear solve.
    pub max_inner_iters: usize,
    pub boundary: BoundaryData,
    /// Fixed-point sweeps of the lagged coefficient per step (1 = plain
    /// lagging).
    pub picard_sweeps: usize,
    /// Keep every `output_stride`-th time node of the solution.
    pub output_stride: usize,
    /// Explicit scheme: require `dt ≤ cfl · h² / (2n · k_max)`.
    pub cfl: f64,
}

impl SolveConfig {
    pub fn new(p: f64) -> Self {
        Self {
            p,
            eps_reg: None,
            scheme: Scheme::SemiImplicit,
            newton_tol: 1e-10,
            max_inner_iters: 2000,
            boundary: BoundaryData::HoldInitial,
            picard_sweeps: 1,
            output_stride: 1,
            cfl: 1.0,
        }
    }

    pub fn with_boundary(mut self, boundary: BoundaryData) -> Self {
        self.boundary = boundary;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn with_eps(mut self, eps: f64) -> Self {
        self.eps_reg = Some(eps);
        self
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.output_stride = stride;
        self
    }

    /// The regularisation actually used on `grid`.
    pub fn eps_on(&self, grid: &SpaceTimeGrid) -> f64 {
        self.eps_reg.unwrap_or(grid.h())
    }

    fn validate(&self, grid: &SpaceTimeGrid) -> Result<()> {
        let p = self.p;
        if !(p > 1.0 && p.is_finite()) {
            return Err(invalid("p", format!("must exceed 1, got {p}")));
        }
        let eps = self.eps_on(grid);
        if !(eps >= 0.0 && eps.is_finite()) {
            return Err(invalid("eps_reg", format!("must be finite and >= 0, got {eps}")));
        }
        if p != 2.0 && eps == 0.0 {
            return Err(invalid("eps_reg", "must be positive when p != 2"));
        }
        if !(self.newton_tol > 0.0) {
            return Err(invalid("newton_tol", "must be positive"));
        }
        if self.max_inner_iters == 0 {
            return Err(invalid("max_inner_iters", "must be positive"));
        }
        if self.picard_sweeps == 0 {
            return Err(invalid("picard_sweeps", "must be positive"));
        }
        if self.output_stride == 0 || grid.steps() % self.output_stride != 0 {
            return Err(invalid(
                "output_stride",
                format!("must divide the {} time steps", grid.steps()),
            ));
        }
        if !(self.cfl > 0.0) {
            return Err(invalid("cfl", "must be positive"));
        }
        if let BoundaryData::Field(f) = &self.boundary {
            if f.grid().spatial_len() != grid.spatial_len() || f.grid().time_nodes() != grid.time_nodes() {
                return Err(Error::InvalidGrid("boundary field does not match the solver grid".into()));
            }
        }
        Ok(())
    }
}

/// Face gradient between `s` and `s + e_a` from nodal values and nodal
/// gradients.
#[inline]
pub(crate) fn face_gradient(
    v: &[f64],
    grads: &[Point],
    dim: usize,
    h: f64,
    s: usize,
    a: usize,
    st: usize,
) -> Point {
    let mut g = [0.0; 3];
    for b in 0..dim {
        g[b] = if b == a {
            (v[s + st] - v[s]) / h
        } else {
            0.5 * (grads[s][b] + grads[s + st][b])
        };
    }
    g
}

/// Face diffusivities `k[a][s]` for the faces `(s, s + e_a)`.
pub(crate) fn face_coefficients(
    grid: &SpaceTimeGrid,
    v: &[f64],
    grads: &mut [Point],
    p: f64,
    eps: f64,
    k: &mut [Vec<f64>; 3],
) {
    let dim = grid.dim();
    let c = grid.counts();
    let h = grid.h();
    let ns = grid.spatial_len();
    if p == 2.0 {
        for kk in k.iter_mut().take(dim) {
            kk.iter_mut().for_each(|x| *x = 1.0);
        }
        return;
    }
    for (s, g) in grads.iter_mut().enumerate().take(ns) {
        *g = slice_gradient(v, grid, s);
    }
    let e2 = eps * eps;
    let expo = 0.5 * (p - 2.0);
    for a in 0..dim {
        let st = stride(c, a);
        for s in 0..ns {
            let i = grid.unravel(s)[a];
            if i + 1 == c[a] {
                k[a][s] = 0.0;
                continue;
            }
            let g = face_gradient(v, grads, dim, h, s, a, st);
            let m2 = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
            k[a][s] = powf(m2 + e2, expo);
        }
    }
}

struct Stepper<'a> {
    grid: &'a SpaceTimeGrid,
    config: &'a SolveConfig,
    interior: Vec<bool>,
    boundary_nodes: Vec<usize>,
    neighbours: Vec<[Option<usize>; 6]>,
    k: [Vec<f64>; 3],
    grads: Vec<Point>,
    diag: Vec<f64>,
    rhs: Vec<f64>,
    fbar: Vec<f64>,
    work: PcgWork,
    eps: f64,
}

impl<'a> Stepper<'a> {
    fn new(grid: &'a SpaceTimeGrid, config: &'a SolveConfig) -> Self {
        let ns = grid.spatial_len();
        let dim = grid.dim();
        let c = grid.counts();
        let interior: Vec<bool> = (0..ns).map(|s| !grid.is_boundary(s)).collect();
        let boundary_nodes = (0..ns).filter(|&s| !interior[s]).collect();
        let neighbours = (0..ns)
            .map(|s| {
                let idx = grid.unravel(s);
                let mut nb = [None; 6];
                for a in 0..dim {
                    let st = stride(c, a);
                    if idx[a] > 0 {
                        nb[2 * a] = Some(s - st);
                    }
                    if idx[a] + 1 < c[a] {
                        nb[2 * a + 1] = Some(s + st);
                    }
                }
                nb
            })
            .collect();
        Self {
            grid,
            config,
            interior,
            boundary_nodes,
            neighbours,
            k: [vec![0.0; ns], vec![0.0; ns], vec![0.0; ns]],
            grads: vec![[0.0; 3]; ns],
            diag: vec![1.0; ns],
            rhs: vec![0.0; ns],
            fbar: vec![0.0; ns],
            work: PcgWork::new(ns),
            eps: config.eps_on(grid),
        }
    }

    /// Coefficient of the face joining `s` to its neighbour slot `slot`.
    #[inline]
    fn face_k(&self, s: usize, slot: usize, nb: usize) -> f64 {
        let a = slot / 2;
        if slot % 2 == 1 {
            self.k[a][s]
        } else {
            self.k[a][nb]
        }
    }

    fn boundary_value(&self, init: &[f64], j: usize, s: usize) -> f64 {
        match &self.config.boundary {
            BoundaryData::HoldInitial => init[s],
            BoundaryData::Constant(c) => *c,
            BoundaryData::Affine { value, gradient } => {
                let x = self.grid.node_point(s);
                value + gradient[0] * x[0] + gradient[1] * x[1] + gradient[2] * x[2]
            }
            BoundaryData::Field(f) => f.at(j, s),
        }
    }

    fn step(
        &mut self,
        j: usize,
        init: &[f64],
        old: &[f64],
        new: &mut [f64],
        src: &StepSource<'_>,
    ) -> Result<()> {
        let grid = self.grid;
        let dt = grid.dt();
        let h = grid.h();
        let r = dt / (h * h);
        let p = self.config.p;
        if src.is_zero() {
            self.fbar.iter_mut().for_each(|v| *v = 0.0);
        } else {
            src.fill(grid, j, &mut self.fbar);
        }
        for &s in &self.boundary_nodes {
            new[s] = self.boundary_value(init, j + 1, s);
        }
        match self.config.scheme {
            Scheme::Explicit => {
                face_coefficients(grid, old, &mut self.grads, p, self.eps, &mut self.k);
                let kmax = self.k[..grid.dim()]
                    .iter()
                    .flat_map(|v| v.iter())
                    .fold(0.0f64, |m, &x| m.max(x));
                let limit = self.config.cfl * h * h / (2.0 * grid.dim() as f64 * kmax.max(f64::MIN_POSITIVE));
                if dt > limit {
                    return Err(Error::CflViolation { step: j, dt, limit });
                }
                for s in 0..old.len() {
                    if !self.interior[s] {
                        continue;
                    }
                    let mut flux = 0.0;
                    for (slot, nb) in self.neighbours[s].iter().enumerate() {
                        if let Some(nb) = *nb {
                            flux += self.face_k(s, slot, nb) * (old[nb] - old[s]);
                        }
                    }
                    new[s] = old[s] + r * flux + dt * self.fbar[s];
                }
                Ok(())
            }
            Scheme::SemiImplicit => {
                new.iter_mut()
                    .zip(old)
                    .zip(&self.interior)
                    .for_each(|((n, o), &i)| {
                        if i {
                            *n = *o
                        }
                    });
                for _ in 0..self.config.picard_sweeps {
                    let lag: Vec<f64>;
                    let coeff_src: &[f64] = if self.config.picard_sweeps == 1 {
                        old
                    } else {
                        lag = new.to_vec();
                        &lag
                    };
                    face_coefficients(grid, coeff_src, &mut self.grads, p, self.eps, &mut self.k);
                    for s in 0..old.len() {
                        if !self.interior[s] {
                            continue;
                        }
                        let mut d = 1.0;
                        let mut b = old[s] + dt * self.fbar[s];
                        for (slot, nb) in self.neighbours[s].iter().enumerate() {
                            if let Some(nb) = *nb {
                                let kf = r * self.face_k(s, slot, nb);
                                d += kf;
                                if !self.interior[nb] {
                                    b += kf * new[nb];
                                }
                            }
                        }
                        self.diag[s] = d;
                        self.rhs[s] = b;
                    }
                    let mut work = core::mem::replace(&mut self.work, PcgWork::new(0));
                    let this = &*self;
                    let apply = |v: &[f64], out: &mut [f64]| {
                        for s in 0..v.len() {
                            if !this.interior[s] {
                                continue;
                            }
                            let mut acc = this.diag[s] * v[s];
                            for (slot, nb) in this.neighbours[s].iter().enumerate() {
                                if let Some(nb) = *nb {
                                    if this.interior[nb] {
                                        acc -= r * this.face_k(s, slot, nb) * v[nb];
                                    }
                                }
                            }
                            out[s] = acc;
                        }
                    };
                    let out = pcg(
                        apply,
                        &self.diag,
                        &self.interior,
                        &self.rhs,
                        new,
                        self.config.newton_tol,
                        self.config.max_inner_iters,
                        &mut work,
                    );
                    self.work = work;
                    if !out.converged {
                        return Err(Error::LinearSolveDiverged {
                            step: j,
                            iterations: out.iterations,
                            residual: out.residual,
                        });
                    }
                }
                if let Some(i) = new.iter().position(|v| !v.is_finite()) {
                    return Err(Error::NonFinite { index: i });
                }
                Ok(())
            }
        }
    }
}

/// Time-marches `initial` over `grid`; returns the solution on
/// `grid.coarsened_in_time(config.output_stride)`.
pub fn solve(
    grid: &SpaceTimeGrid,
    config: &SolveConfig,
    source: &SourceSpec,
    initial: &[f64],
) -> Result<GridFunction> {
    config.validate(grid)?;
    source::check_amplitude(source)?;
    let ns = grid.spatial_len();
    if initial.len() != ns {
        return Err(Error::ShapeMismatch {
            expected: ns,
            got: initial.len(),
        });
    }
    if let Some(i) = initial.iter().position(|v| !v.is_finite()) {
        return Err(Error::NonFinite { index: i });
    }
    let src = StepSource::new(source, grid)?;
    let out_grid = grid.coarsened_in_time(config.output_stride)?;
    let mut values = Vec::with_capacity(out_grid.len());
    values.extend_from_slice(initial);
    let mut stepper = Stepper::new(grid, config);
    let mut old = initial.to_vec();
    let mut new = vec![0.0; ns];
    for j in 0..grid.steps() {
        stepper.step(j, initial, &old, &mut new, &src)?;
        core::mem::swap(&mut old, &mut new);
        if (j + 1) % config.output_stride == 0 {
            values.extend_from_slice(&old);
        }
    }
    GridFunction::new(out_grid, values)
}

/// Spatial field sampled from `f` at the nodes of `grid`.
pub fn spatial_field(grid: &SpaceTimeGrid, f: impl Fn(&Point) -> f64) -> Vec<f64> {
    (0..grid.spatial_len()).map(|s| f(&grid.node_point(s))).collect()
}
