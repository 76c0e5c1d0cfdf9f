//! Closed-form exponent calculus.
//!
//! Everything here is a pure function of `(p, n, q, r, α_H)`. With
//! `b = n/q + 2/r` the quantities are
//!
//! ```text
//! α̂ = (1 - b) / ((p-1)(1-1/r) + 1/r)
//! α  = min{α̂, α_H}
//! θ  = 2 + (2-p) log_ρ(ρ^α + |∇u|)
//! ```
//!
//! and `(q, r)` is admissible when `1/r + n/(pq) < 1` and
//! `max{0, (1-1/r)(2-p)} ≤ b < 1`.

use alloc::vec::Vec;

use crate::error::invalid;
use crate::math::{ln, powf};
use crate::{Error, Extended, Result};

/// Tolerance for the two expansions of the denominator of `α̂`.
pub const DENOMINATOR_TOL: f64 = 1e-12;

/// Default margin used to step strictly below `α_H` when it is attained.
pub const DEFAULT_STRICT_MARGIN: f64 = 1e-6;

/// Default upper end of the `(q, r)` scan.
pub const REGION_Q_MAX: f64 = 1e3;
pub const REGION_R_MAX: f64 = 1e3;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ProblemParams {
    pub p: f64,
    pub n: usize,
    pub q: Extended,
    pub r: Extended,
    pub alpha_h: f64,
}

/// Lower limit for `p`: `max{1, 2n/(n+2)}`.
pub fn p_floor(n: usize) -> f64 {
    let n = n as f64;
    f64::max(1.0, 2.0 * n / (n + 2.0))
}

impl ProblemParams {
    /// Validated constructor.
    ///
    /// `alpha_h` defaults to 1 for `p = 2` (the heat equation); for any
    /// other `p` it must be supplied.
    pub fn new(
        p: f64,
        n: usize,
        q: impl Into<Extended>,
        r: impl Into<Extended>,
        alpha_h: Option<f64>,
    ) -> Result<Self> {
        let params = Self::new_unchecked(p, n, q, r, alpha_h)?;
        if !params.q.exceeds(n as f64) {
            return Err(invalid("q", alloc::format!("need q > n = {n}, got {}", params.q)));
        }
        if !params.r.exceeds(2.0) {
            return Err(invalid("r", alloc::format!("need r > 2, got {}", params.r)));
        }
        Ok(params)
    }

    /// Checks only what every formula needs to be evaluable (finite
    /// positive `p`, `n ≥ 1`, positive `q`, `r`, `α_H ∈ (0, 1]`), plus the
    /// lower limit on `p`. Range conditions on `q` and `r` are left to
    /// [`check_compatibility`].
    pub fn new_unchecked(
        p: f64,
        n: usize,
        q: impl Into<Extended>,
        r: impl Into<Extended>,
        alpha_h: Option<f64>,
    ) -> Result<Self> {
        let q = q.into();
        let r = r.into();
        if n == 0 {
            return Err(invalid("n", "dimension must be positive"));
        }
        if !p.is_finite() || p <= p_floor(n) {
            return Err(invalid(
                "p",
                alloc::format!("need p > max{{1, 2n/(n+2)}} = {}, got {p}", p_floor(n)),
            ));
        }
        for (name, v) in [("q", q), ("r", r)] {
            if let Extended::Finite(x) = v {
                if !(x.is_finite() && x > 0.0) {
                    return Err(invalid(name, alloc::format!("must be positive, got {x}")));
                }
            }
        }
        let alpha_h = match alpha_h {
            Some(a) => a,
            None if p == 2.0 => 1.0,
            None => {
                return Err(invalid(
                    "alpha_H",
                    "the homogeneous exponent must be given explicitly when p != 2",
                ))
            }
        };
        if !(alpha_h > 0.0 && alpha_h <= 1.0) {
            return Err(invalid("alpha_H", alloc::format!("must lie in (0, 1], got {alpha_h}")));
        }
        Ok(Self {
            p,
            n,
            q,
            r,
            alpha_h,
        })
    }

    pub fn with_qr(self, q: impl Into<Extended>, r: impl Into<Extended>) -> Result<Self> {
        Self::new(self.p, self.n, q, r, Some(self.alpha_h))
    }

    /// `n/q`, zero for `q = ∞`.
    pub fn n_over_q(&self) -> f64 {
        self.n as f64 * self.q.recip()
    }

    /// `1/r`, zero for `r = ∞`.
    pub fn inv_r(&self) -> f64 {
        self.r.recip()
    }

    /// `n/q + 2/r`.
    pub fn holder_band(&self) -> f64 {
        self.n_over_q() + 2.0 * self.inv_r()
    }
}

/// A named inequality of the compatibility conditions.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum Violation {
    MinimalIntegrability,
    HolderBand,
    LowerBand,
    QAboveN,
    RAboveTwo,
    PRange,
}

impl Violation {
    pub fn name(self) -> &'static str {
        match self {
            Violation::MinimalIntegrability => "1/r+n/(pq)<1",
            Violation::HolderBand => "n/q+2/r<1",
            Violation::LowerBand => "max{0,(1-1/r)(2-p)}<=n/q+2/r",
            Violation::QAboveN => "q>n",
            Violation::RAboveTwo => "r>2",
            Violation::PRange => "p>max{1,2n/(n+2)}",
        }
    }
}

impl core::fmt::Display for Violation {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CompatibilityReport {
    pub admissible: bool,
    /// `1/r + n/(pq)`
    pub minimal_integrability: f64,
    /// `n/q + 2/r`
    pub holder_band: f64,
    /// `max{0, (1-1/r)(2-p)}`
    pub lower_band: f64,
    pub violations: Vec<Violation>,
}

pub fn check_compatibility(params: &ProblemParams) -> CompatibilityReport {
    let ProblemParams { p, n, q, r, .. } = *params;
    let minimal_integrability = r.recip() + params.n_over_q() / p;
    let holder_band = params.holder_band();
    let lower_band = f64::max(0.0, (1.0 - r.recip()) * (2.0 - p));

    let mut violations = Vec::new();
    if minimal_integrability >= 1.0 {
        violations.push(Violation::MinimalIntegrability);
    }
    if holder_band >= 1.0 {
        violations.push(Violation::HolderBand);
    }
    if lower_band > holder_band {
        violations.push(Violation::LowerBand);
    }
    if !q.exceeds(n as f64) {
        violations.push(Violation::QAboveN);
    }
    if !r.exceeds(2.0) {
        violations.push(Violation::RAboveTwo);
    }
    if p <= p_floor(n) {
        violations.push(Violation::PRange);
    }
    CompatibilityReport {
        admissible: violations.is_empty(),
        minimal_integrability,
        holder_band,
        lower_band,
        violations,
    }
}

fn require_admissible(params: &ProblemParams) -> Result<CompatibilityReport> {
    let report = check_compatibility(params);
    if report.admissible {
        Ok(report)
    } else {
        Err(Error::NotAdmissible(report.violations))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ExponentSet {
    pub alpha_hat: f64,
    pub alpha: f64,
    /// The minimum defining `α` is `α_H` (which is then not attained
    /// itself; see [`ExponentSet::alpha_strict`]).
    pub attained_by_homogeneous: bool,
    /// Correction factor of the corrected cylinders, `max{1, 2/(2+(2-p)α̂)}`.
    pub sigma: f64,
    /// Outside-zone time exponent `2 + α(2-p)`.
    pub gamma: f64,
    /// Uniformly parabolic exponent `1 - (n/q + 2/r)`.
    pub beta_star: f64,
    /// `(p-1)(1-1/r) + 1/r`
    pub denominator: f64,
}

impl ExponentSet {
    /// A usable exponent strictly below `α_H` when the homogeneous branch
    /// wins, `α̂` otherwise.
    pub fn alpha_strict(&self, margin: f64) -> f64 {
        if self.attained_by_homogeneous {
            self.alpha - margin
        } else {
            self.alpha
        }
    }
}

/// Denominator of `α̂` in factored form, written as `(p-1) - (p-2)/r` so
/// that `p = 2` and `r = ∞` are exact.
fn denominator(p: f64, inv_r: f64) -> f64 {
    (p - 1.0) - (p - 2.0) * inv_r
}

/// Denominator of `α̂` as printed: `p[1-(n/(pq)+1/r)] - [1-(n/q+2/r)]`.
pub fn denominator_expanded(params: &ProblemParams) -> f64 {
    let p = params.p;
    let inv_r = params.inv_r();
    p * (1.0 - (params.n_over_q() / p + inv_r)) - (1.0 - params.holder_band())
}

/// `(p-1)(1-1/r) + 1/r`, literally.
pub fn denominator_factored(params: &ProblemParams) -> f64 {
    let inv_r = params.inv_r();
    (params.p - 1.0) * (1.0 - inv_r) + inv_r
}

pub fn sharp_exponents(params: &ProblemParams) -> Result<ExponentSet> {
    require_admissible(params)?;
    let p = params.p;
    let den = denominator(p, params.inv_r());
    let expanded = denominator_expanded(params);
    let factored = denominator_factored(params);
    let scale = f64::max(1.0, p);
    if (expanded - factored).abs() > DENOMINATOR_TOL * scale
        || (den - factored).abs() > DENOMINATOR_TOL * scale
    {
        return Err(Error::DenominatorMismatch { expanded, factored });
    }
    let beta_star = 1.0 - params.holder_band();
    let alpha_hat = beta_star / den;
    let attained_by_homogeneous = params.alpha_h <= alpha_hat;
    let alpha = f64::min(alpha_hat, params.alpha_h);
    Ok(ExponentSet {
        alpha_hat,
        alpha,
        attained_by_homogeneous,
        sigma: f64::max(1.0, 2.0 / (2.0 + (2.0 - p) * alpha_hat)),
        gamma: 2.0 + alpha * (2.0 - p),
        beta_star,
        denominator: den,
    })
}

fn check_base(base: f64) -> Result<()> {
    if base > 0.0 && base < 1.0 {
        Ok(())
    } else {
        Err(invalid("base", alloc::format!("must lie in (0, 1), got {base}")))
    }
}

fn check_grad(g: f64) -> Result<()> {
    if g >= 0.0 && g.is_finite() {
        Ok(())
    } else {
        Err(invalid("grad_mag", alloc::format!("must be finite and >= 0, got {g}")))
    }
}

/// Intrinsic time exponent `2 + (2-p) log_ρ(ρ^α + g)` with the sharp `α`.
pub fn theta(params: &ProblemParams, grad_mag: f64, base: f64) -> Result<f64> {
    let ex = sharp_exponents(params)?;
    theta_with(params.p, ex.alpha, grad_mag, base)
}

/// As [`theta`] for an explicit exponent `alpha`.
pub fn theta_with(p: f64, alpha: f64, grad_mag: f64, base: f64) -> Result<f64> {
    check_base(base)?;
    check_grad(grad_mag)?;
    Ok(theta_from_sum(p, powf(base, alpha) + grad_mag, base))
}

fn theta_from_sum(p: f64, sum: f64, base: f64) -> f64 {
    if p == 2.0 {
        return 2.0;
    }
    2.0 + (2.0 - p) * ln(sum) / ln(base)
}

/// Per-step variant: base `λ^k` and argument
/// `λ^{kα} + g Σ_{j<k} λ^{jα}`.
pub fn theta_accumulated(p: f64, alpha: f64, grad_mag: f64, lambda: f64, k: u32) -> Result<f64> {
    check_base(lambda)?;
    check_grad(grad_mag)?;
    if k == 0 {
        return Err(invalid("k", "step index must be >= 1"));
    }
    let base = powf(lambda, k as f64);
    let la = powf(lambda, alpha);
    let mut sum = 0.0;
    let mut term = 1.0;
    for _ in 0..k {
        sum += term;
        term *= la;
    }
    Ok(theta_from_sum(p, powf(base, alpha) + grad_mag * sum, base))
}

/// `(min{2, 2+(2-p)α̂}, max{2, 2+(2-p)α̂})`.
pub fn theta_bounds(params: &ProblemParams) -> Result<(f64, f64)> {
    let ex = sharp_exponents(params)?;
    let other = 2.0 + (2.0 - params.p) * ex.alpha_hat;
    Ok((f64::min(2.0, other), f64::max(2.0, other)))
}

/// `(1 + 2/(p-2) + n/q) / (1 - 1/r + 1/(p-2))`, the lower bound for `p > 2`.
pub fn theta_lower_closed_form(params: &ProblemParams) -> Result<f64> {
    require_admissible(params)?;
    if params.p <= 2.0 {
        return Err(invalid("p", "closed form lower bound needs p > 2"));
    }
    let k = 1.0 / (params.p - 2.0);
    Ok((1.0 + 2.0 * k + params.n_over_q()) / (1.0 - params.inv_r() + k))
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct KappaMu {
    /// `(2p-1)s - (sn/q + (2p-1)s/r)`
    pub kappa: f64,
    /// `s[(p-1)(1-1/r)+1/r] + sp[1-(n/(pq)+1/r)]`, which equals `kappa + s/r`.
    pub kappa_rearranged: f64,
    pub mu_max: f64,
}

/// Normalisation exponent `κ` and the largest admissible scale `μ`.
///
/// Only the basic parameter ranges are required; `κ > 0` is checked
/// directly (it always holds for admissible pairs).
pub fn kappa_mu(
    params: &ProblemParams,
    s: f64,
    delta: f64,
    sup_u: f64,
    f_norm: f64,
) -> Result<KappaMu> {
    if !(s > 0.0 && s.is_finite()) {
        return Err(invalid("s", alloc::format!("must be positive, got {s}")));
    }
    if !(delta > 0.0 && delta.is_finite()) {
        return Err(invalid("delta", alloc::format!("must be positive, got {delta}")));
    }
    let p = params.p;
    let kappa = (2.0 * p - 1.0) * s - (s * params.n_over_q() + (2.0 * p - 1.0) * s * params.inv_r());
    let kappa_rearranged = s * denominator_factored(params)
        + s * p * (1.0 - (params.n_over_q() / p + params.inv_r()));
    let mu = mu_max(s, kappa, sup_u, delta, f_norm)?;
    Ok(KappaMu {
        kappa,
        kappa_rearranged,
        mu_max: mu,
    })
}

/// `min{1, (1/sup_u)^{1/s}, (δ/‖f‖)^{1/κ}}`; a term whose denominator
/// vanishes is dropped.
pub fn mu_max(s: f64, kappa: f64, sup_u: f64, delta: f64, f_norm: f64) -> Result<f64> {
    for (name, v) in [("sup_u", sup_u), ("f_norm", f_norm)] {
        if !(v >= 0.0 && v.is_finite()) {
            return Err(invalid(name, alloc::format!("must be finite and >= 0, got {v}")));
        }
    }
    if !(kappa > 0.0) {
        return Err(invalid("kappa", alloc::format!("must be positive, got {kappa}")));
    }
    let mut mu = 1.0_f64;
    if sup_u > 0.0 {
        mu = mu.min(powf(1.0 / sup_u, 1.0 / s));
    }
    if f_norm > 0.0 {
        mu = mu.min(powf(delta / f_norm, 1.0 / kappa));
    }
    Ok(mu)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum LayerBranch {
    Degenerate,
    Singular,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LayerReport {
    pub branch: LayerBranch,
    pub eps: f64,
    pub s: f64,
    /// The pair substituted into the exponent formula.
    pub q: f64,
    pub r: f64,
    pub alpha_hat: f64,
    pub alpha: f64,
    /// Degenerate branch: `r = 2/((1-s)ε)` as printed, and the resulting `α̂`
    /// (`None` when that pair is not admissible).
    pub stated_r: Option<f64>,
    pub stated_alpha_hat: Option<f64>,
    /// Degenerate branch: `2ε/(2(p-1) - (p-2)(1-s)ε)`.
    pub closed_form: Option<f64>,
    /// `nr/((r-1)q) + 2/(r-1) - (2-p)` on the substituted pair.
    pub varsigma: f64,
}

fn check_layer_inputs(s: f64, eps: f64) -> Result<()> {
    if !(s > 0.0 && s < 1.0) {
        return Err(invalid("s", alloc::format!("must lie in (0, 1), got {s}")));
    }
    if !(eps > 0.0 && eps < 1.0) {
        return Err(invalid("eps", alloc::format!("must lie in (0, 1), got {eps}")));
    }
    Ok(())
}

fn varsigma(n: usize, p: f64, q: f64, r: f64) -> f64 {
    n as f64 * r / ((r - 1.0) * q) + 2.0 / (r - 1.0) - (2.0 - p)
}

/// Branch chosen by `p`: degenerate for `p ≥ 2`, singular for `p < 2`.
/// `params.q` and `params.r` are ignored; the layer constructs its own.
pub fn epsilon_layers(params: &ProblemParams, s: f64, eps: f64) -> Result<LayerReport> {
    if params.p >= 2.0 {
        degenerate_layer(params, s, eps)
    } else {
        singular_layer(params, s, eps)
    }
}

/// `q = n/(s(1-ε))` with `r = 2/((1-s)(1-ε))`, for which
/// `n/q + 2/r = 1 - ε` and `α̂ → 0`. The printed `r = 2/((1-s)ε)` is
/// evaluated alongside.
pub fn degenerate_layer(params: &ProblemParams, s: f64, eps: f64) -> Result<LayerReport> {
    check_layer_inputs(s, eps)?;
    let p = params.p;
    if p < 2.0 {
        return Err(invalid("p", "degenerate layer needs p >= 2"));
    }
    let n = params.n as f64;
    let q = n / (s * (1.0 - eps));
    let r = 2.0 / ((1.0 - s) * (1.0 - eps));
    let used = params.with_qr(q, r)?;
    let ex = sharp_exponents(&used)?;

    let stated_r = 2.0 / ((1.0 - s) * eps);
    let stated_alpha_hat = params
        .with_qr(q, stated_r)
        .ok()
        .and_then(|st| sharp_exponents(&st).ok())
        .map(|e| e.alpha_hat);
    let closed_form = 2.0 * eps / (2.0 * (p - 1.0) - (p - 2.0) * (1.0 - s) * eps);
    Ok(LayerReport {
        branch: LayerBranch::Degenerate,
        eps,
        s,
        q,
        r,
        alpha_hat: ex.alpha_hat,
        alpha: ex.alpha,
        stated_r: Some(stated_r),
        stated_alpha_hat,
        closed_form: Some(closed_form),
        varsigma: varsigma(params.n, p, q, r),
    })
}

/// `r = 2/(s(ε+2-p)) + 1`, `q = nr/((r-1)(1-s)(ε+2-p))`.
pub fn singular_layer(params: &ProblemParams, s: f64, eps: f64) -> Result<LayerReport> {
    check_layer_inputs(s, eps)?;
    let p = params.p;
    if p >= 2.0 {
        return Err(invalid("p", "singular layer needs p < 2"));
    }
    let n = params.n as f64;
    let gap = eps + 2.0 - p;
    let r = 2.0 / (s * gap) + 1.0;
    let q = n * r / ((r - 1.0) * (1.0 - s) * gap);
    let used = params.with_qr(q, r)?;
    let ex = sharp_exponents(&used)?;
    Ok(LayerReport {
        branch: LayerBranch::Singular,
        eps,
        s,
        q,
        r,
        alpha_hat: ex.alpha_hat,
        alpha: ex.alpha,
        stated_r: None,
        stated_alpha_hat: None,
        closed_form: None,
        varsigma: varsigma(params.n, p, q, r),
    })
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionSample {
    pub q: f64,
    pub r: f64,
    pub n_over_q_plus_2_over_r: f64,
    pub admissible: bool,
    pub violations: Vec<Violation>,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RegionScan {
    pub p: f64,
    pub n: usize,
    pub samples: Vec<RegionSample>,
    /// Level set `n/q + 2/r = 1`, i.e. `r = 2/(1 - n/q)`.
    pub upper_curve: Vec<(f64, f64)>,
    /// Level set `(n/q + 2/r)/((r-1)/r) = 2 - p`; `None` for `p ≥ 2`.
    pub lower_curve: Option<Vec<(f64, f64)>>,
}

fn log_axis(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let ratio = ln(hi / lo);
    (1..=count)
        .map(|i| lo * crate::math::exp(ratio * i as f64 / count as f64))
        .collect()
}

/// Classifies a `resolution × resolution` log-spaced sample of
/// `(n, q_max] × (2, r_max]`.
pub fn admissible_region(p: f64, n: usize, resolution: usize) -> Result<RegionScan> {
    admissible_region_with(p, n, resolution, REGION_Q_MAX, REGION_R_MAX)
}

pub fn admissible_region_with(
    p: f64,
    n: usize,
    resolution: usize,
    q_max: f64,
    r_max: f64,
) -> Result<RegionScan> {
    if resolution < 2 {
        return Err(invalid("resolution", "need at least 2 samples per axis"));
    }
    let nf = n as f64;
    if !(q_max > nf && r_max > 2.0) {
        return Err(invalid("q_max/r_max", "scan window is empty"));
    }
    let qs = log_axis(nf, q_max, resolution);
    let rs = log_axis(2.0, r_max, resolution);
    let mut samples = Vec::with_capacity(resolution * resolution);
    for &q in &qs {
        for &r in &rs {
            let prm = ProblemParams::new_unchecked(p, n, q, r, Some(1.0))?;
            let rep = check_compatibility(&prm);
            samples.push(RegionSample {
                q,
                r,
                n_over_q_plus_2_over_r: rep.holder_band,
                admissible: rep.admissible,
                violations: rep.violations,
            });
        }
    }
    let upper_curve = qs
        .iter()
        .map(|&q| (q, 2.0 / (1.0 - nf / q)))
        .filter(|&(_, r)| r <= r_max)
        .collect();
    let lower_curve = (p < 2.0).then(|| {
        qs.iter()
            .filter(|&&q| 2.0 - p > nf / q)
            .map(|&q| (q, (4.0 - p) / ((2.0 - p) - nf / q)))
            .filter(|&(_, r)| r > 2.0 && r <= r_max)
            .collect()
    });
    Ok(RegionScan {
        p,
        n,
        samples,
        upper_curve,
        lower_curve,
    })
}
