//! Oscillation profiles over λ-adic corrected cylinders, exponent fits and
//! the pointwise `C^{1+α}` check.

use alloc::format;
use alloc::vec::Vec;

use crate::error::invalid;
use crate::exponents::{sharp_exponents, ProblemParams};
use crate::geometry::{corrected_cylinder, rescale_outside, ThetaRule, UnitGridSpec};
use crate::grid::calculus::node_gradient;
use crate::grid::{
    gradient_at, interpolate, interpolation_error_estimate, norm, sup_oscillation, GridFunction,
    Region, SpaceTimeGrid, SpaceTimePoint,
};
use crate::math::{ln, powf};
use crate::solver::{solve, SolveConfig, SourceSpec};
use crate::{Error, Result};

pub const DEFAULT_LAMBDA: f64 = 0.45;
pub const DEFAULT_DEPTH: u32 = 6;
pub const MIN_DEPTH: u32 = 4;
pub const NOISE_FACTOR: f64 = 10.0;
/// Smallest admissible radius in grid spacings.
pub const MIN_RADIUS_CELLS: f64 = 2.0;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum ProbeMode {
    #[default]
    Plain,
    Affine,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProfileEntry {
    pub k: u32,
    pub rho: f64,
    pub theta: f64,
    pub depth: f64,
    pub sup_osc: f64,
    pub grad_mag: f64,
    /// Time nodes inside the cylinder; below 4 the time direction is not
    /// resolved and `S_k` only sees the top slices.
    pub time_nodes: usize,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OscillationProfile {
    pub center: SpaceTimePoint,
    pub lambda: f64,
    pub mode: ProbeMode,
    pub rule: ThetaRule,
    pub entries: Vec<ProfileEntry>,
    pub noise_floor: f64,
}

impl OscillationProfile {
    pub fn grad_mag(&self) -> f64 {
        self.entries.first().map_or(0.0, |e| e.grad_mag)
    }

    /// Fewest time nodes over the cylinders.
    pub fn min_time_nodes(&self) -> usize {
        self.entries.iter().map(|e| e.time_nodes).min().unwrap_or(0)
    }
}

pub fn oscillation_profile(
    u: &GridFunction,
    center: &SpaceTimePoint,
    lambda: f64,
    depth: u32,
    params: &ProblemParams,
    mode: ProbeMode,
) -> Result<OscillationProfile> {
    oscillation_profile_with(u, center, lambda, depth, params, mode, ThetaRule::Fixed)
}

pub fn oscillation_profile_with(
    u: &GridFunction,
    center: &SpaceTimePoint,
    lambda: f64,
    depth: u32,
    params: &ProblemParams,
    mode: ProbeMode,
    rule: ThetaRule,
) -> Result<OscillationProfile> {
    if !(lambda > 0.0 && lambda < 0.5) {
        return Err(invalid("lambda", format!("must lie in (0, 1/2), got {lambda}")));
    }
    if depth < MIN_DEPTH {
        return Err(invalid("K", format!("need at least {MIN_DEPTH} levels, got {depth}")));
    }
    let grid = u.grid();
    let dim = grid.dim();
    if params.n != dim {
        return Err(Error::ShapeMismatch { expected: dim, got: params.n });
    }
    let rho_min = powf(lambda, depth as f64);
    if rho_min < MIN_RADIUS_CELLS * grid.h() {
        return Err(Error::Unresolvable(format!(
            "smallest radius {rho_min:.3e} is below {MIN_RADIUS_CELLS} grid spacings (h = {:.3e})",
            grid.h()
        )));
    }
    let hw = grid.half_width();
    for a in 0..dim {
        if center.x[a].abs() + lambda > hw[a] * (1.0 + 1e-12) {
            return Err(Error::OutOfDomain(format!(
                "ball of radius {lambda} around the centre leaves the domain"
            )));
        }
    }
    let gvec = gradient_at(u, center)?;
    let g = norm(dim, &gvec);
    let affine = match mode {
        ProbeMode::Plain => None,
        ProbeMode::Affine => Some((interpolate(u, center)?, gvec)),
    };
    let mut entries = Vec::with_capacity(depth as usize);
    let mut first: Option<Region> = None;
    let mut last: Option<Region> = None;
    for k in 1..=depth {
        let cyl = corrected_cylinder(*center, lambda, k, params, g, rule)?;
        if k == 1 && center.t - cyl.depth < grid.t_start() - 1e-12 {
            return Err(Error::OutOfDomain(format!(
                "first cylinder reaches t = {} before t_start",
                center.t - cyl.depth
            )));
        }
        let region = cyl.region();
        let s = sup_oscillation(u, &region, center, affine)?;
        entries.push(ProfileEntry {
            k,
            rho: cyl.rho,
            theta: cyl.theta,
            depth: cyl.depth,
            sup_osc: s,
            grad_mag: g,
            time_nodes: region.time_nodes(grid).len(),
        });
        if k == 1 {
            first = Some(region);
        }
        last = Some(region);
    }
    let (first, last) = (first.unwrap(), last.unwrap());
    let scale = first
        .time_nodes(grid)
        .iter()
        .flat_map(|&j| first.spatial_nodes(grid).into_iter().map(move |s| (j, s)))
        .fold(0.0f64, |m, (j, s)| m.max(u.at(j, s).abs()));
    let noise_floor = NOISE_FACTOR * interpolation_error_estimate(u, &last) + 1e-12 * (1.0 + scale);
    Ok(OscillationProfile {
        center: *center,
        lambda,
        mode,
        rule,
        entries,
        noise_floor,
    })
}

/// `ρ^{1+α}(1 + g ρ^{-α})`.
pub fn dyadic_bound(rho: f64, alpha: f64, g: f64) -> f64 {
    powf(rho, 1.0 + alpha) * (1.0 + g * powf(rho, -alpha))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DyadicEntry {
    pub k: u32,
    pub rho: f64,
    pub theta: f64,
    pub sup_osc: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DyadicReport {
    pub alpha: f64,
    pub grad_mag: f64,
    pub entries: Vec<DyadicEntry>,
    pub fitted_m: f64,
    pub passes: bool,
}

/// Ratios `S_k / [ρ_k^{1+α}(1 + g ρ_k^{-α})]` and their maximum.
pub fn check_dyadic_bound(profile: &OscillationProfile, params: &ProblemParams) -> Result<DyadicReport> {
    if profile.mode != ProbeMode::Plain {
        return Err(invalid("profile", "the dyadic bound needs a plain-mode profile"));
    }
    let alpha = sharp_exponents(params)?.alpha;
    let g = profile.grad_mag();
    let entries: Vec<DyadicEntry> = profile
        .entries
        .iter()
        .map(|e| {
            let bound = dyadic_bound(e.rho, alpha, g);
            DyadicEntry {
                k: e.k,
                rho: e.rho,
                theta: e.theta,
                sup_osc: e.sup_osc,
                bound,
                ratio: e.sup_osc / bound,
            }
        })
        .collect();
    let fitted_m = entries.iter().fold(0.0f64, |m, e| m.max(e.ratio));
    Ok(DyadicReport {
        alpha,
        grad_mag: g,
        entries,
        fitted_m,
        passes: fitted_m.is_finite(),
    })
}

/// `B_k = λ^{k(1+α)} + g Σ_{j<k} λ^{k+jα}` summed term by term.
pub fn bound_sequence(lambda: f64, alpha: f64, g: f64, k: u32) -> f64 {
    let kf = k as f64;
    let mut sum = 0.0;
    for j in 0..k {
        sum += powf(lambda, kf + j as f64 * alpha);
    }
    powf(lambda, kf * (1.0 + alpha)) + g * sum
}

/// `B_k = λ^{k(1+α)} + g λ^k (1 - λ^{kα}) / (1 - λ^α)`.
pub fn bound_sequence_closed(lambda: f64, alpha: f64, g: f64, k: u32) -> f64 {
    let kf = k as f64;
    let la = powf(lambda, alpha);
    powf(lambda, kf * (1.0 + alpha)) + g * powf(lambda, kf) * (1.0 - powf(la, kf)) / (1.0 - la)
}

/// `(1/λ^{1+α}) (1 + 1/(1 - λ^α)) (1 + g ρ^{-α})`, the constant that
/// dominates `B_k / ρ_k^{1+α}` at `ρ_k = λ^k`.
pub fn theorem_constant_bound(lambda: f64, alpha: f64, g: f64, rho: f64) -> f64 {
    (1.0 + 1.0 / (1.0 - powf(lambda, alpha))) * (1.0 + g * powf(rho, -alpha))
        / powf(lambda, 1.0 + alpha)
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentFit {
    pub slope: f64,
    pub log_m: f64,
    pub residual: f64,
    pub k_range: Vec<u32>,
}

/// Least squares of `ln S_k` against `ln ρ_k` over entries above the
/// noise floor.
pub fn fit_exponent(profile: &OscillationProfile) -> Result<ExponentFit> {
    let used: Vec<&ProfileEntry> = profile
        .entries
        .iter()
        .filter(|e| e.sup_osc > profile.noise_floor)
        .collect();
    if used.len() < 3 {
        return Err(Error::Unfittable { usable: used.len() });
    }
    let m = used.len() as f64;
    let xs: Vec<f64> = used.iter().map(|e| ln(e.rho)).collect();
    let ys: Vec<f64> = used.iter().map(|e| ln(e.sup_osc)).collect();
    let xm = xs.iter().sum::<f64>() / m;
    let ym = ys.iter().sum::<f64>() / m;
    let sxx: f64 = xs.iter().map(|x| (x - xm) * (x - xm)).sum();
    let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - xm) * (y - ym)).sum();
    let slope = sxy / sxx;
    let log_m = ym - slope * xm;
    let residual = xs
        .iter()
        .zip(&ys)
        .fold(0.0f64, |r, (x, y)| r.max((y - log_m - slope * x).abs()));
    Ok(ExponentFit {
        slope,
        log_m,
        residual,
        k_range: used.iter().map(|e| e.k).collect(),
    })
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Case1Level {
    pub k: u32,
    pub rho: f64,
    pub sup_osc: f64,
    /// `S_k / [ρ_k^{1+α}(1 + g ρ_k^{-α})]` from the plain profile.
    pub ratio: f64,
    /// `1 + g ρ_k^{-α}`, at most `1 + g τ^{-α} = 2`.
    pub factor: f64,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Case2Level {
    pub k: u32,
    pub rho: f64,
    /// `ρ_k / τ`.
    pub rescaled_radius: f64,
    /// Affine oscillation of the rescaled function over the parabolic
    /// cylinder of that radius.
    pub rescaled_osc: f64,
    /// `τ^{1+α}` times the rescaled oscillation.
    pub mapped_osc: f64,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PointwiseReport {
    pub center: SpaceTimePoint,
    pub alpha: f64,
    pub beta_star: f64,
    pub grad_mag: f64,
    pub critical: bool,
    pub profile: OscillationProfile,
    /// `max_k S_k / ρ_k^{1+α}` of the affine profile.
    pub fitted_m: f64,
    pub fit: Option<ExponentFit>,
    pub tau: Option<f64>,
    /// `g τ^{-α}`, equal to one by construction of `τ`.
    pub tau_factor: Option<f64>,
    pub case1: Vec<Case1Level>,
    pub case2: Vec<Case2Level>,
    /// Levels whose rescaled cylinder could not be resolved.
    pub case2_skipped: Vec<u32>,
    pub passes: bool,
}

/// Affine-mode profile with a fitted `M`. A centre is critical when
/// `g ≤ ρ_K^α` at the smallest probed radius; otherwise the levels are
/// split at `ρ = τ = g^{1/α}`.
pub fn check_pointwise_c1alpha(
    u: &GridFunction,
    center: &SpaceTimePoint,
    params: &ProblemParams,
    lambda: f64,
    depth: u32,
) -> Result<PointwiseReport> {
    let ex = sharp_exponents(params)?;
    let alpha = ex.alpha;
    let g = norm(u.grid().dim(), &gradient_at(u, center)?);
    let critical = g <= powf(lambda, depth as f64 * alpha);
    if !critical && params.p < 2.0 {
        return Err(Error::OutsideZoneNeedsDegenerate { p: params.p });
    }
    let profile = oscillation_profile(u, center, lambda, depth, params, ProbeMode::Affine)?;
    let fitted_m = profile
        .entries
        .iter()
        .fold(0.0f64, |m, e| m.max(e.sup_osc / powf(e.rho, 1.0 + alpha)));
    let fit = match fit_exponent(&profile) {
        Ok(f) => Some(f),
        Err(Error::Unfittable { .. }) => None,
        Err(e) => return Err(e),
    };
    let mut report = PointwiseReport {
        center: *center,
        alpha,
        beta_star: ex.beta_star,
        grad_mag: g,
        critical,
        passes: fitted_m.is_finite(),
        profile,
        fitted_m,
        fit,
        tau: None,
        tau_factor: None,
        case1: Vec::new(),
        case2: Vec::new(),
        case2_skipped: Vec::new(),
    };
    if critical {
        return Ok(report);
    }
    let tau = powf(g, 1.0 / alpha);
    report.tau = Some(tau);
    report.tau_factor = Some(g * powf(tau, -alpha));
    let plain = oscillation_profile(u, center, lambda, depth, params, ProbeMode::Plain)?;
    let rescaled = if plain.entries.iter().any(|e| e.rho < tau) {
        match rescale_outside(u, None, center, params, UnitGridSpec::default()) {
            Ok(r) => Some(r),
            Err(Error::CriticalCenter { .. }) | Err(Error::OutOfDomain(_)) => None,
            Err(e) => return Err(e),
        }
    } else {
        None
    };
    let origin = SpaceTimePoint::new([0.0; 3], 0.0);
    for e in &plain.entries {
        if e.rho >= tau {
            let factor = 1.0 + g * powf(e.rho, -alpha);
            report.case1.push(Case1Level {
                k: e.k,
                rho: e.rho,
                sup_osc: e.sup_osc,
                ratio: e.sup_osc / dyadic_bound(e.rho, alpha, g),
                factor,
            });
            continue;
        }
        let Some(r) = &rescaled else {
            report.case2_skipped.push(e.k);
            continue;
        };
        let radius = e.rho / tau;
        if radius < MIN_RADIUS_CELLS * r.v.grid().h() {
            report.case2_skipped.push(e.k);
            continue;
        }
        let gv = gradient_at(&r.v, &origin)?;
        let region = Region::ball([0.0; 3], radius, -radius * radius, 0.0);
        let sv = sup_oscillation(&r.v, &region, &origin, Some((0.0, gv)))?;
        let mapped = powf(tau, 1.0 + alpha) * sv;
        report.case2.push(Case2Level {
            k: e.k,
            rho: e.rho,
            rescaled_radius: radius,
            rescaled_osc: sv,
            mapped_osc: mapped,
            ratio: mapped / powf(e.rho, 1.0 + alpha),
        });
    }
    report.passes = report.passes
        && report.case1.iter().all(|c| c.ratio.is_finite())
        && report.case2.iter().all(|c| c.ratio.is_finite());
    Ok(report)
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Proximity {
    pub value_dist: f64,
    pub gradient_dist: f64,
}

/// Distance between the solve with `source` and the zero-source solve
/// with the same data, over `B_{L/2} × (T - (T - t₀)/4, T]`.
pub fn p_caloric_proximity(
    grid: &SpaceTimeGrid,
    config: &SolveConfig,
    source: &SourceSpec,
    initial: &[f64],
) -> Result<Proximity> {
    let u = solve(grid, config, source, initial)?;
    let phi = solve(grid, config, &SourceSpec::zero(), initial)?;
    proximity_of(&u, &phi)
}

pub fn proximity_of(u: &GridFunction, phi: &GridFunction) -> Result<Proximity> {
    let grid = u.grid();
    if phi.grid() != grid {
        return Err(Error::InvalidGrid("u and phi must share a grid".into()));
    }
    let dim = grid.dim();
    let half = grid.half_width()[..dim].iter().fold(f64::INFINITY, |m, &x| m.min(x)) / 2.0;
    let span = grid.t_end() - grid.t_start();
    let region = Region::ball([0.0; 3], half, grid.t_end() - span / 4.0, grid.t_end());
    let diff = u.sub(phi)?;
    let nodes = region.spatial_nodes(grid);
    let times = region.time_nodes(grid);
    if nodes.is_empty() || times.is_empty() {
        return Err(Error::EmptyRegion);
    }
    let (mut value_dist, mut gradient_dist) = (0.0f64, 0.0f64);
    for &j in &times {
        for &s in &nodes {
            value_dist = value_dist.max(diff.at(j, s).abs());
            gradient_dist = gradient_dist.max(norm(dim, &node_gradient(&diff, j, s)));
        }
    }
    Ok(Proximity {
        value_dist,
        gradient_dist,
    })
}

/// Strict spatial local extrema of time slice `j` with `|∇u| ≤ ρ^α`,
/// at least `margin` away from the boundary.
pub fn critical_extrema(u: &GridFunction, j: usize, rho: f64, alpha: f64, margin: f64) -> Vec<SpaceTimePoint> {
    let grid = u.grid();
    let dim = grid.dim();
    let c = grid.counts();
    let hw = grid.half_width();
    let threshold = powf(rho, alpha);
    let v = u.slice(j);
    let mut out = Vec::new();
    'nodes: for s in 0..grid.spatial_len() {
        let x = grid.node_point(s);
        if (0..dim).any(|a| x[a].abs() + margin > hw[a] * (1.0 + 1e-12)) {
            continue;
        }
        let idx = grid.unravel(s);
        let (mut above, mut below) = (true, true);
        for a in 0..dim {
            if idx[a] == 0 || idx[a] + 1 >= c[a] {
                continue 'nodes;
            }
            let st = crate::grid::calculus::stride(c, a);
            for nb in [v[s - st], v[s + st]] {
                above &= v[s] > nb;
                below &= v[s] < nb;
            }
        }
        if (above || below) && norm(dim, &node_gradient(u, j, s)) <= threshold {
            out.push(SpaceTimePoint::new(x, grid.time(j)));
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Extended;
    use proptest::prelude::*;

    fn params(p: f64, n: usize, q: f64, r: f64, ah: Option<f64>) -> ProblemParams {
        ProblemParams::new(p, n, Extended::from_f64(q), Extended::from_f64(r), ah).unwrap()
    }

    fn heat(n: usize) -> ProblemParams {
        params(2.0, n, f64::INFINITY, f64::INFINITY, None)
    }

    fn frozen(dim: usize, nodes: usize, f: impl Fn(&crate::grid::Point) -> f64) -> GridFunction {
        let g = SpaceTimeGrid::cube(dim, 0.5, 1.0 / (nodes - 1) as f64, 0.5, 0.0, 1.0).unwrap();
        GridFunction::from_fn(g, |x, _| f(x)).unwrap()
    }

    fn top() -> SpaceTimePoint {
        SpaceTimePoint::new([0.0; 3], 1.0)
    }

    #[test]
    fn constant_is_unfittable() {
        let u = frozen(1, 257, |_| 2.5);
        let pr = heat(1);
        let prof = oscillation_profile(&u, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain).unwrap();
        assert!(prof.entries.iter().all(|e| e.sup_osc == 0.0));
        assert!(matches!(fit_exponent(&prof), Err(Error::Unfittable { usable: 0 })));
    }

    #[test]
    fn affine_cancels_and_decays_linearly() {
        let u = frozen(2, 257, |x| 1.0 + 0.7 * x[0] - 0.2 * x[1]);
        let pr = heat(2);
        let aff = oscillation_profile(&u, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Affine).unwrap();
        assert!(aff.entries.iter().all(|e| e.sup_osc < 1e-13));
        assert!(fit_exponent(&aff).is_err());
        let plain = oscillation_profile(&u, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain).unwrap();
        let fit = fit_exponent(&plain).unwrap();
        assert!((fit.slope - 1.0).abs() < 0.05, "{}", fit.slope);
    }

    #[test]
    fn radial_power_profile() {
        let a0 = 0.5;
        let u = frozen(1, 257, |x| powf(x[0].abs(), 1.0 + a0));
        let pr = heat(1);
        let prof = oscillation_profile(&u, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain).unwrap();
        for e in &prof.entries {
            let exact = powf(DEFAULT_LAMBDA, e.k as f64 * (1.0 + a0));
            assert!((e.sup_osc - exact).abs() <= prof.noise_floor, "{} {}", e.sup_osc, exact);
        }
        let fit = fit_exponent(&prof).unwrap();
        assert!((fit.slope - 1.5).abs() < 0.05);
        let rep = check_dyadic_bound(&prof, &pr).unwrap();
        assert!(rep.passes);
        assert_eq!(rep.grad_mag, 0.0);
        // g = 0 leaves ρ^{1+α}; α = 1/2 here so the ratios are flat
        for e in &rep.entries {
            assert!((e.bound - powf(e.rho, 1.0 + rep.alpha)).abs() < 1e-15);
        }
    }

    #[test]
    fn smoother_than_predicted_ratios_decrease() {
        let u = frozen(1, 257, |x| powf(x[0].abs(), 1.75));
        let pr = params(2.0, 1, 4.0, 8.0, None);
        let prof = oscillation_profile(&u, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain).unwrap();
        let rep = check_dyadic_bound(&prof, &pr).unwrap();
        assert!(rep.entries.windows(2).all(|w| w[1].ratio < w[0].ratio));
    }

    #[test]
    fn rejects_unresolvable_and_boundary() {
        let u = frozen(1, 65, |x| x[0]);
        let pr = heat(1);
        assert!(matches!(
            oscillation_profile(&u, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain),
            Err(Error::Unresolvable(_))
        ));
        let u = frozen(1, 257, |x| x[0]);
        let off = SpaceTimePoint::new([0.3, 0.0, 0.0], 1.0);
        assert!(matches!(
            oscillation_profile(&u, &off, DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain),
            Err(Error::OutOfDomain(_))
        ));
        assert!(oscillation_profile(&u, &top(), 0.5, 6, &pr, ProbeMode::Plain).is_err());
        assert!(oscillation_profile(&u, &top(), 0.45, 3, &pr, ProbeMode::Plain).is_err());
    }

    #[test]
    fn affine_plain_triangle() {
        let u = frozen(1, 257, |x| libm::sin(3.0 * x[0]) + 0.2 * x[0] * x[0]);
        let pr = heat(1);
        let c = SpaceTimePoint::new([0.02, 0.0, 0.0], 1.0);
        let a = oscillation_profile(&u, &c, DEFAULT_LAMBDA, 6, &pr, ProbeMode::Affine).unwrap();
        let p = oscillation_profile(&u, &c, DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain).unwrap();
        for (ea, ep) in a.entries.iter().zip(&p.entries) {
            assert!(ea.sup_osc <= ep.sup_osc + ep.rho * ep.grad_mag + 1e-14);
        }
    }

    #[test]
    fn outside_zone_split() {
        let u = frozen(1, 257, |x| 0.5 * x[0] + x[0] * x[0]);
        let pr = params(2.5, 1, 16.0, 16.0, Some(0.8));
        let rep = check_pointwise_c1alpha(&u, &top(), &pr, DEFAULT_LAMBDA, 6).unwrap();
        assert!(!rep.critical);
        assert!((rep.tau_factor.unwrap() - 1.0).abs() < 1e-12);
        assert!(rep.passes);
        assert!(rep.case1.iter().all(|c| c.factor <= 2.0 + 1e-12));
        assert_eq!(rep.case1.len() + rep.case2.len() + rep.case2_skipped.len(), 6);
        let singular = params(1.5, 1, 4.0, 4.0, Some(0.8));
        let r = check_pointwise_c1alpha(&u, &top(), &singular, DEFAULT_LAMBDA, 6);
        assert!(matches!(r, Err(Error::OutsideZoneNeedsDegenerate { .. })), "{r:?}");
    }

    #[test]
    fn affine_field_is_c1alpha_with_zero_m() {
        let u = frozen(1, 257, |x| 0.01 * x[0] + 4.0);
        let pr = heat(1);
        let rep = check_pointwise_c1alpha(&u, &top(), &pr, DEFAULT_LAMBDA, 6).unwrap();
        assert!(rep.fitted_m < 1e-12);
        assert!(rep.passes);
    }

    #[test]
    fn zero_source_proximity_is_exact() {
        let g = SpaceTimeGrid::cube(1, 1.0, 1.0 / 32.0, 1.0 / 256.0, 0.0, 0.125).unwrap();
        let init: Vec<f64> = (0..g.spatial_len())
            .map(|s| libm::cos(core::f64::consts::FRAC_PI_2 * g.node_point(s)[0]))
            .collect();
        let cfg = SolveConfig::new(3.0);
        let d = p_caloric_proximity(&g, &cfg, &SourceSpec::zero(), &init).unwrap();
        assert_eq!((d.value_dist, d.gradient_dist), (0.0, 0.0));
    }

    #[test]
    fn finds_the_critical_extremum() {
        let u = frozen(2, 65, |x| libm::cos(3.0 * x[0]) * libm::cos(3.0 * x[1]));
        let c = critical_extrema(&u, 2, 0.45, 0.5, 0.1);
        assert_eq!(c.len(), 1);
        assert_eq!(c[0].x, [0.0; 3]);
    }

    proptest! {
        #[test]
        fn bound_sequence_identity(lam in 0.05f64..0.49, a in 0.01f64..1.0, g in 0.0f64..5.0, k in 1u32..12) {
            let b = bound_sequence(lam, a, g, k);
            let c = bound_sequence_closed(lam, a, g, k);
            prop_assert!((b - c).abs() <= 1e-12 * b.max(1.0));
            let rho = powf(lam, k as f64);
            prop_assert!(b / powf(rho, 1.0 + a) <= theorem_constant_bound(lam, a, g, rho) * (1.0 + 1e-12));
        }

        #[test]
        fn slope_invariant_under_scaling(c in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0], shift in -3.0f64..3.0) {
            let pr = heat(1);
            let base = frozen(1, 257, |x| powf(x[0].abs(), 1.5) + 0.3 * x[0]);
            let scaled = base.map(|v| c * v + shift).unwrap();
            let p0 = oscillation_profile(&base, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain).unwrap();
            let p1 = oscillation_profile(&scaled, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain).unwrap();
            let (f0, f1) = (fit_exponent(&p0).unwrap(), fit_exponent(&p1).unwrap());
            prop_assert!((f0.slope - f1.slope).abs() < 1e-8);
            prop_assert!((f1.log_m - f0.log_m - ln(c.abs())).abs() < 1e-8);
        }

        #[test]
        fn fitted_m_ignores_order(seed in 0u32..1000) {
            let pr = heat(1);
            let u = frozen(1, 257, |x| powf(x[0].abs(), 1.3) + 0.01 * seed as f64 * x[0]);
            let mut prof = oscillation_profile(&u, &top(), DEFAULT_LAMBDA, 6, &pr, ProbeMode::Plain).unwrap();
            let m0 = check_dyadic_bound(&prof, &pr).unwrap().fitted_m;
            prof.entries.reverse();
            let rot = seed as usize % prof.entries.len();
            prof.entries.rotate_left(rot);
            prop_assert_eq!(check_dyadic_bound(&prof, &pr).unwrap().fitted_m, m0);
        }
    }
}
