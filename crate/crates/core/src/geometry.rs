//! Intrinsic cylinders, the critical zone and the two rescaling maps.

use alloc::format;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::exponents::{kappa_mu, sharp_exponents, theta, theta_accumulated, ProblemParams};
use crate::grid::calculus::node_gradient;
use crate::grid::{
    anisotropic_norm, gradient_at, interpolate, norm, spatial_weights, time_weights, GridFunction,
    Region, SpaceTimeGrid, SpaceTimePoint,
};
use crate::math::powf;
use crate::{Error, Result};

/// How the time exponent of the `k`-th corrected cylinder is formed.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ThetaRule {
    /// `θ = 2 + (2-p) log_λ(λ^α + g)` for every `k`.
    #[default]
    Fixed,
    /// `θ_k = 2 + (2-p) log_{λ^k}(λ^{kα} + g Σ_{j<k} λ^{jα})`.
    PerStep,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Correction {
    pub k: u32,
    pub sigma: f64,
}

/// `B_ρ(x₀) × (t₀ - depth, t₀]` with `depth = base^{θ_eff}`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Cylinder {
    pub center: SpaceTimePoint,
    pub rho: f64,
    /// Radius whose power gives the depth (`ρ` itself for intrinsic
    /// cylinders, `λ` for corrected ones).
    pub base: f64,
    pub theta: f64,
    pub theta_eff: f64,
    pub depth: f64,
    pub correction: Option<Correction>,
}

impl Cylinder {
    pub fn region(&self) -> Region {
        Region::ball(self.center.x, self.rho, self.center.t - self.depth, self.center.t)
    }

    pub fn contains(&self, dim: usize, p: &SpaceTimePoint, dt: f64) -> bool {
        self.region().contains_space(dim, &p.x) && self.region().contains_time(p.t, dt)
    }
}

fn check_radius(rho: f64) -> Result<()> {
    if rho > 0.0 && rho < 1.0 {
        Ok(())
    } else {
        Err(invalid("rho", format!("must lie in (0, 1), got {rho}")))
    }
}

/// `Q_ρ = B_ρ × (t₀ - ρ^θ, t₀]` with `θ` from the gradient at the centre.
pub fn intrinsic_cylinder(
    center: SpaceTimePoint,
    rho: f64,
    params: &ProblemParams,
    grad_mag: f64,
) -> Result<Cylinder> {
    check_radius(rho)?;
    let th = theta(params, grad_mag, rho)?;
    Ok(Cylinder {
        center,
        rho,
        base: rho,
        theta: th,
        theta_eff: th,
        depth: powf(rho, th),
        correction: None,
    })
}

/// `Q̂_{ρ^k} = B_{ρ^k} × (t₀ - ρ^{θ(σ+k-1)}, t₀]`.
///
/// Fails with [`Error::IntrinsicScaling`] when `σθ < 2`.
pub fn corrected_cylinder(
    center: SpaceTimePoint,
    rho: f64,
    k: u32,
    params: &ProblemParams,
    grad_mag: f64,
    rule: ThetaRule,
) -> Result<Cylinder> {
    check_radius(rho)?;
    if k == 0 {
        return Err(invalid("k", "correction index must be >= 1"));
    }
    let ex = sharp_exponents(params)?;
    let th = match rule {
        ThetaRule::Fixed => theta(params, grad_mag, rho)?,
        ThetaRule::PerStep => theta_accumulated(params.p, ex.alpha, grad_mag, rho, k)?,
    };
    let sigma_theta = ex.sigma * th;
    if sigma_theta < 2.0 - 1e-12 {
        return Err(Error::IntrinsicScaling { sigma_theta });
    }
    let theta_eff = th * (ex.sigma + k as f64 - 1.0);
    Ok(Cylinder {
        center,
        rho: powf(rho, k as f64),
        base: rho,
        theta: th,
        theta_eff,
        depth: powf(rho, theta_eff),
        correction: Some(Correction { k, sigma: ex.sigma }),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CriticalZone {
    pub threshold: f64,
    /// `(time node, spatial node, |∇u| ≤ ρ^α)` for every node carrying
    /// quadrature weight in the region.
    pub nodes: Vec<(usize, usize, bool)>,
    /// Weighted measure fraction of the critical set.
    pub fraction: f64,
}

/// Classifies nodes of `region` by `|∇u| ≤ ρ^α`.
pub fn critical_zone(u: &GridFunction, rho: f64, alpha: f64, region: &Region) -> Result<CriticalZone> {
    if !(rho > 0.0) || !(alpha > 0.0) {
        return Err(invalid("rho/alpha", "must be positive"));
    }
    let grid = u.grid();
    let threshold = powf(rho, alpha);
    let space = spatial_weights(grid, &region.shape);
    let mut time = time_weights(grid, region.t_lo, region.t_hi);
    if time.is_empty() {
        time = region.time_nodes(grid).into_iter().map(|j| (j, 1.0)).collect();
    }
    if space.is_empty() || time.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let dim = grid.dim();
    let mut nodes = Vec::with_capacity(space.len() * time.len());
    let (mut crit, mut total) = (0.0, 0.0);
    for &(j, wt) in &time {
        for &(s, ws) in &space {
            let c = norm(dim, &node_gradient(u, j, s)) <= threshold;
            nodes.push((j, s, c));
            total += wt * ws;
            if c {
                crit += wt * ws;
            }
        }
    }
    Ok(CriticalZone {
        threshold,
        nodes,
        fraction: crit / total,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Provenance {
    Normalize,
    OutsideZone,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Certificate {
    /// `‖v‖_∞` on the rescaled grid.
    pub sup_v: f64,
    /// `‖g‖_{L^{q,r}}` of the rescaled source, when one was given.
    pub g_norm: Option<f64>,
    /// `v(0, 0)` and `|∇v(0, 0)|` (outside-zone map only).
    pub center_value: Option<f64>,
    pub center_grad: Option<f64>,
    pub holds: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RescaledProblem {
    pub v: GridFunction,
    pub g: Option<GridFunction>,
    pub provenance: Provenance,
    /// Normalisation: the scale `μ`.
    pub mu: Option<f64>,
    /// Normalisation: time exponent `2s(p-1)`.
    pub time_exponent: Option<f64>,
    /// Outside zone: `|∇u(x₀, t₀)|^{1/α}`.
    pub grad_scale: Option<f64>,
    /// `κ` (normalisation) or `γ` (outside zone).
    pub exponent: f64,
    /// Outside zone: `1 - α(p-1) - (n/q + γ/r)`, the power of the scale in
    /// front of the rescaled source norm.
    pub source_exponent: Option<f64>,
    pub certificate: Certificate,
}

const CERT_TOL: f64 = 1e-9;

/// `v(x, t) = μ^s u(μ^s x, T + μ^τ (t - T))`,
/// `g(x, t) = μ^{(2p-1)s} f(μ^s x, T + μ^τ (t - T))`, `τ = 2s(p-1)`.
///
/// The map is taken about the spatial origin and the final time `T` of
/// the grid, which play the role of the top centre of the unit cylinder.
/// `mu` defaults to the largest admissible scale.
pub fn rescale_normalize(
    u: &GridFunction,
    f: &GridFunction,
    params: &ProblemParams,
    s: f64,
    delta: f64,
    mu: Option<f64>,
) -> Result<RescaledProblem> {
    let grid = u.grid();
    if f.grid() != grid {
        return Err(Error::InvalidGrid("u and f must share a grid".into()));
    }
    let whole = Region::whole(grid);
    let f_norm = anisotropic_norm(f, params.q, params.r, &whole)?;
    let km = kappa_mu(params, s, delta, u.max_abs(), f_norm)?;
    let mu = mu.unwrap_or(km.mu_max);
    if !(mu > 0.0 && mu <= km.mu_max) {
        return Err(invalid(
            "mu",
            format!("must lie in (0, {}], got {mu}", km.mu_max),
        ));
    }
    let p = params.p;
    let tau = 2.0 * s * (p - 1.0);
    let ms = powf(mu, s);
    let mt = powf(mu, tau);
    let amp = powf(mu, (2.0 * p - 1.0) * s);
    let t_top = grid.t_end();
    let pull = |x: &crate::grid::Point, t: f64| SpaceTimePoint {
        x: [ms * x[0], ms * x[1], ms * x[2]],
        t: t_top + mt * (t - t_top),
    };
    let v = GridFunction::from_fn(grid.clone(), |x, t| {
        ms * interpolate(u, &pull(x, t)).unwrap_or(f64::NAN)
    })?;
    let g = GridFunction::from_fn(grid.clone(), |x, t| {
        amp * interpolate(f, &pull(x, t)).unwrap_or(f64::NAN)
    })?;
    let sup_v = v.max_abs();
    let g_norm = anisotropic_norm(&g, params.q, params.r, &whole)?;
    let holds = sup_v <= 1.0 + CERT_TOL && g_norm <= delta * (1.0 + CERT_TOL);
    Ok(RescaledProblem {
        v,
        g: Some(g),
        provenance: Provenance::Normalize,
        mu: Some(mu),
        time_exponent: Some(tau),
        grad_scale: None,
        exponent: km.kappa,
        source_exponent: None,
        certificate: Certificate {
            sup_v,
            g_norm: Some(g_norm),
            center_value: None,
            center_grad: None,
            holds,
        },
    })
}

/// Resolution of the unit grid used by [`rescale_outside`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UnitGridSpec {
    /// Nodes per axis on `[-1, 1]` (odd, so the centre is a node).
    pub nodes: usize,
    /// Time steps on `[-1, 0]`.
    pub steps: usize,
}

impl Default for UnitGridSpec {
    fn default() -> Self {
        Self { nodes: 65, steps: 32 }
    }
}

/// `v(y, s) = (u(x₀ + τy, t₀ + τ^γ s) - u(x₀, t₀)) / τ^{1+α}` on
/// `[-1, 1]^n × [-1, 0]` with `τ = |∇u(x₀, t₀)|^{1/α}`.
///
/// Rejects centres whose `τ` is below two grid spacings (they belong to
/// the critical zone at the grid's resolution) and `τ`-cylinders that
/// leave the domain.
pub fn rescale_outside(
    u: &GridFunction,
    f: Option<&GridFunction>,
    center: &SpaceTimePoint,
    params: &ProblemParams,
    unit: UnitGridSpec,
) -> Result<RescaledProblem> {
    let grid = u.grid();
    let dim = grid.dim();
    let ex = sharp_exponents(params)?;
    let alpha = ex.alpha;
    let gvec = gradient_at(u, center)?;
    let gmag = norm(dim, &gvec);
    let tau = powf(gmag, 1.0 / alpha);
    if !(gmag > 0.0) || tau < 2.0 * grid.h() {
        return Err(Error::CriticalCenter { grad_mag: gmag });
    }
    let gamma = ex.gamma;
    let depth = powf(tau, gamma);
    let hw = grid.half_width();
    for a in 0..dim {
        if center.x[a].abs() + tau > hw[a] * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(format!(
                "the cube of half-width tau = {tau} around the centre leaves the domain"
            )));
        }
    }
    if center.t - depth < grid.t_start() - 1e-12 {
        return Err(Error::OutOfDomain(format!(
            "time depth tau^gamma = {depth} reaches before t_start"
        )));
    }
    if unit.nodes < 3 || unit.nodes % 2 == 0 || unit.steps == 0 {
        return Err(invalid("unit", "need an odd node count >= 3 and at least one step"));
    }
    let ug = SpaceTimeGrid::cube(
        dim,
        1.0,
        2.0 / (unit.nodes - 1) as f64,
        1.0 / unit.steps as f64,
        -1.0,
        0.0,
    )?;
    let u0 = interpolate(u, center)?;
    let scale = powf(tau, 1.0 + alpha);
    let pull = |y: &crate::grid::Point, s: f64| SpaceTimePoint {
        x: [
            center.x[0] + tau * y[0],
            center.x[1] + tau * y[1],
            center.x[2] + tau * y[2],
        ],
        t: center.t + depth * s,
    };
    let v = GridFunction::from_fn(ug.clone(), |y, s| {
        (interpolate(u, &pull(y, s)).unwrap_or(f64::NAN) - u0) / scale
    })?;
    let p = params.p;
    let src_amp = powf(tau, 1.0 - alpha * (p - 1.0));
    let g = match f {
        Some(f) => Some(GridFunction::from_fn(ug.clone(), |y, s| {
            src_amp * interpolate(f, &pull(y, s)).unwrap_or(f64::NAN)
        })?),
        None => None,
    };
    let source_exponent = 1.0 - alpha * (p - 1.0) - (params.n_over_q() + gamma * params.inv_r());
    let origin = SpaceTimePoint::new([0.0; 3], 0.0);
    let center_value = interpolate(&v, &origin)?;
    let center_grad = norm(dim, &gradient_at(&v, &origin)?);
    let g_norm = match &g {
        Some(g) => Some(anisotropic_norm(g, params.q, params.r, &Region::whole(&ug))?),
        None => None,
    };
    let holds = center_value.abs() <= 1e-12 && source_exponent >= -1e-12;
    let sup_v = v.max_abs();
    Ok(RescaledProblem {
        v,
        g,
        provenance: Provenance::OutsideZone,
        mu: None,
        time_exponent: None,
        grad_scale: Some(tau),
        exponent: gamma,
        source_exponent: Some(source_exponent),
        certificate: Certificate {
            sup_v,
            g_norm,
            center_value: Some(center_value),
            center_grad: Some(center_grad),
            holds,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Extended;
    use proptest::prelude::*;

    fn params(p: f64, n: usize, q: f64, r: f64, ah: Option<f64>) -> ProblemParams {
        ProblemParams::new(p, n, Extended::from_f64(q), Extended::from_f64(r), ah).unwrap()
    }

    fn origin() -> SpaceTimePoint {
        SpaceTimePoint::new([0.0; 3], 0.0)
    }

    #[test]
    fn heat_cylinder_is_parabolic() {
        let pr = params(2.0, 2, f64::INFINITY, f64::INFINITY, None);
        let c = intrinsic_cylinder(origin(), 0.25, &pr, 3.0).unwrap();
        assert_eq!(c.theta, 2.0);
        assert!((c.depth - 0.0625).abs() < 1e-15);
    }

    #[test]
    fn corrected_k1_matches_intrinsic_when_sigma_is_one() {
        let pr = params(1.8, 2, 8.0, 8.0, Some(0.9));
        let a = intrinsic_cylinder(origin(), 0.4, &pr, 0.1).unwrap();
        let b = corrected_cylinder(origin(), 0.4, 1, &pr, 0.1, ThetaRule::Fixed).unwrap();
        assert!((a.depth - b.depth).abs() < 1e-14);
        assert_eq!(b.rho, 0.4);
    }

    #[test]
    fn corrected_rejects_bad_radius() {
        let pr = params(2.5, 2, 8.0, 8.0, Some(0.9));
        assert!(corrected_cylinder(origin(), 1.0, 1, &pr, 0.0, ThetaRule::Fixed).is_err());
        assert!(corrected_cylinder(origin(), 0.0, 1, &pr, 0.0, ThetaRule::Fixed).is_err());
        assert!(corrected_cylinder(origin(), 0.5, 0, &pr, 0.0, ThetaRule::Fixed).is_err());
    }

    #[test]
    fn critical_zone_of_heat_mode() {
        let g = SpaceTimeGrid::cube(1, 1.0, 1.0 / 512.0, 0.01, 0.0, 0.01).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, _| libm::sin(core::f64::consts::PI * x[0] / 2.0))
            .unwrap();
        let region = Region::boxed([0.0; 3], [1.0; 3], 0.0, 0.01);
        let z = critical_zone(&u, 0.5, 1.0, &region).unwrap();
        // |∇u| = (π/2)|cos(πx/2)| <= 1/2 on |x| >= 1 - (2/π) acos(1/π)
        let edge = 2.0 / core::f64::consts::PI * libm::acos(1.0 / core::f64::consts::PI);
        let exact = 1.0 - edge;
        assert!((z.fraction - exact).abs() < 5e-3, "{} vs {exact}", z.fraction);
    }

    #[test]
    fn normalize_constant_source() {
        let g = SpaceTimeGrid::cube(1, 1.0, 1.0 / 32.0, 1.0 / 32.0, 0.0, 1.0).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, t| 3.0 * (1.0 + x[0] * t)).unwrap();
        let f = GridFunction::from_fn(g.clone(), |_, _| 5.0).unwrap();
        let pr = params(2.5, 1, 4.0, 8.0, Some(0.9));
        let s = 0.5;
        let r = rescale_normalize(&u, &f, &pr, s, 0.1, None).unwrap();
        assert!(r.certificate.holds, "{:?}", r.certificate);
        let mu = r.mu.unwrap();
        let gn = r.certificate.g_norm.unwrap();
        let whole = Region::whole(&g);
        let fnorm = anisotropic_norm(&f, pr.q, pr.r, &whole).unwrap();
        assert!(gn <= powf(mu, r.exponent) * fnorm * (1.0 + 1e-9));
        assert_eq!(r.time_exponent, Some(2.0 * s * 1.5));
    }

    #[test]
    fn normalize_identity_when_small() {
        let g = SpaceTimeGrid::cube(1, 1.0, 0.25, 0.25, 0.0, 1.0).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, t| 0.5 * x[0] * t).unwrap();
        let f = GridFunction::zeros(g.clone());
        let pr = params(3.0, 1, 4.0, 8.0, Some(0.5));
        let r = rescale_normalize(&u, &f, &pr, 0.5, 0.1, Some(1.0)).unwrap();
        for (a, b) in r.v.values().iter().zip(u.values()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!(rescale_normalize(&u, &f, &pr, 0.5, 0.1, Some(1.5)).is_err());
    }

    #[test]
    fn outside_map_on_affine_field() {
        let g = SpaceTimeGrid::cube(2, 1.0, 1.0 / 64.0, 1.0 / 64.0, 0.0, 1.0).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, _| 0.3 * x[0] - 0.4 * x[1] + 1.0).unwrap();
        let pr = params(2.5, 2, 8.0, 8.0, Some(0.9));
        let c = SpaceTimePoint::new([0.125, -0.25, 0.0], 1.0);
        let r = rescale_outside(&u, None, &c, &pr, UnitGridSpec::default()).unwrap();
        assert!(r.certificate.holds);
        assert!(r.certificate.center_value.unwrap().abs() < 1e-12);
        assert!((r.certificate.center_grad.unwrap() - 1.0).abs() < 1e-9);
        assert!(r.source_exponent.unwrap() >= 0.0);
    }

    #[test]
    fn outside_map_rejects_critical_center() {
        let g = SpaceTimeGrid::cube(1, 1.0, 1.0 / 64.0, 1.0 / 64.0, 0.0, 1.0).unwrap();
        let u = GridFunction::from_fn(g.clone(), |x, _| x[0] * x[0]).unwrap();
        let pr = params(2.5, 1, 8.0, 8.0, Some(0.9));
        let c = SpaceTimePoint::new([0.0; 3], 1.0);
        assert!(matches!(
            rescale_outside(&u, None, &c, &pr, UnitGridSpec::default()),
            Err(Error::CriticalCenter { .. })
        ));
    }

    proptest! {
        #[test]
        fn corrected_cylinders_nest(
            p in 2.05f64..4.0, q in 6.0f64..50.0, r in 6.0f64..50.0,
            g in 0.0f64..0.3, lam in 0.1f64..0.49,
        ) {
            let pr = params(p, 2, q, r, Some(0.99));
            let mut prev: Option<Cylinder> = None;
            for k in 1..6 {
                let c = corrected_cylinder(origin(), lam, k, &pr, g, ThetaRule::Fixed).unwrap();
                prop_assert!(c.correction.unwrap().sigma * c.theta >= 2.0 - 1e-12);
                if let Some(pc) = prev {
                    prop_assert!(c.rho < pc.rho);
                    prop_assert!(c.depth <= pc.depth);
                }
                prev = Some(c);
            }
        }
    }
}
