//! Quadrature primitives: Gauss–Legendre rules, exact cell/shape overlaps
//! and integrals of `|x - c|^{-s}` over boxes.

use alloc::vec::Vec;

use crate::grid::Point;
use crate::math::{cos, powf, sqrt};

/// Gauss–Legendre nodes and weights on `[-1, 1]`.
pub fn gauss_legendre(m: usize) -> (Vec<f64>, Vec<f64>) {
    let mut xs = Vec::with_capacity(m);
    let mut ws = Vec::with_capacity(m);
    for i in 0..m {
        let mut x = cos(core::f64::consts::PI * (i as f64 + 0.75) / (m as f64 + 0.5));
        let mut dp = 1.0;
        for _ in 0..100 {
            let (p, d) = legendre(m, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre(m, x);
        if d != 0.0 {
            dp = d;
        }
        xs.push(x);
        ws.push(2.0 / ((1.0 - x * x) * dp * dp));
    }
    (xs, ws)
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let k = k as f64;
        let p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}

/// Cached rules used by the box integrator.
pub(crate) struct Rules {
    rules: [(Vec<f64>, Vec<f64>); 3],
}

impl Rules {
    pub(crate) fn new() -> Self {
        Self {
            rules: [gauss_legendre(2), gauss_legendre(4), gauss_legendre(8)],
        }
    }
}

/// Length of `[a0, a1] ∩ [b0, b1]`.
pub fn overlap(a0: f64, a1: f64, b0: f64, b1: f64) -> f64 {
    (a1.min(b1) - a0.max(b0)).max(0.0)
}

/// `∫ sqrt(R² - x²) dx`.
fn half_chord_primitive(x: f64, r: f64) -> f64 {
    let x = x.clamp(-r, r);
    let s = sqrt((r * r - x * x).max(0.0));
    0.5 * (x * s + r * r * libm::asin(x / r))
}

/// Area of the disk of radius `r` centred at the origin intersected with
/// `[x0, x1] × [y0, y1]`, exactly.
pub fn disk_rect_area(r: f64, x0: f64, x1: f64, y0: f64, y1: f64) -> f64 {
    if r <= 0.0 || x1 <= x0 || y1 <= y0 {
        return 0.0;
    }
    let xa = x0.max(-r);
    let xb = x1.min(r);
    if xb <= xa {
        return 0.0;
    }
    // The integrand min(y1, s) - max(y0, -s) with s = sqrt(r² - x²) changes
    // form where s crosses |y0| or |y1|.
    let mut cuts: Vec<f64> = Vec::with_capacity(6);
    cuts.push(xa);
    for y in [y0, y1] {
        if y.abs() < r {
            let c = sqrt(r * r - y * y);
            for c in [-c, c] {
                if c > xa && c < xb {
                    cuts.push(c);
                }
            }
        }
    }
    cuts.push(xb);
    cuts.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let mut area = 0.0;
    for w in cuts.windows(2) {
        let (a, b) = (w[0], w[1]);
        if b <= a {
            continue;
        }
        let m = 0.5 * (a + b);
        let s = sqrt((r * r - m * m).max(0.0));
        let top_is_chord = s < y1;
        let bot_is_chord = -s > y0;
        if (if top_is_chord { s } else { y1 }) <= (if bot_is_chord { -s } else { y0 }) {
            continue;
        }
        let chord = half_chord_primitive(b, r) - half_chord_primitive(a, r);
        let len = b - a;
        area += if top_is_chord { chord } else { y1 * len };
        area -= if bot_is_chord { -chord } else { y0 * len };
    }
    area.max(0.0)
}

/// Volume of the ball of radius `r` centred at the origin intersected with
/// a box, by Gauss–Legendre in `z` over exact disk–rectangle slices.
pub fn ball_box_volume(r: f64, lo: &Point, hi: &Point) -> f64 {
    let z0 = lo[2].max(-r);
    let z1 = hi[2].min(r);
    if z1 <= z0 {
        return 0.0;
    }
    let (xs, ws) = gauss_legendre(8);
    let half = 0.5 * (z1 - z0);
    let mid = 0.5 * (z1 + z0);
    let mut v = 0.0;
    for (x, w) in xs.iter().zip(&ws) {
        let z = mid + half * x;
        let rr = sqrt((r * r - z * z).max(0.0));
        v += w * disk_rect_area(rr, lo[0], hi[0], lo[1], hi[1]);
    }
    v * half
}

/// `∫_{[lo, hi]} |x - c|^{-s} dx` over the first `dim` coordinates, for
/// `s < dim` (the integral is finite even when `c` lies in the box).
pub fn power_integral_box(dim: usize, lo: &Point, hi: &Point, c: &Point, s: f64) -> f64 {
    let rules = Rules::new();
    power_integral_box_with(&rules, dim, lo, hi, c, s)
}

pub(crate) fn power_integral_box_with(
    rules: &Rules,
    dim: usize,
    lo: &Point,
    hi: &Point,
    c: &Point,
    s: f64,
) -> f64 {
    let mut a = [0.0; 3];
    let mut b = [0.0; 3];
    for k in 0..dim {
        a[k] = lo[k] - c[k];
        b[k] = hi[k] - c[k];
        if b[k] <= a[k] {
            return 0.0;
        }
    }
    if s == 0.0 {
        return (0..dim).map(|k| b[k] - a[k]).product();
    }
    shifted(rules, dim, &a, &b, 0.0, s, 0)
}

/// Integral of `(off² + |y|²)^{-s/2}` over `[a, b] ⊂ R^dim`.
fn shifted(rules: &Rules, dim: usize, a: &Point, b: &Point, off2: f64, s: f64, depth: u32) -> f64 {
    if dim == 0 {
        return powf(off2, -0.5 * s);
    }
    let contains = (0..dim).all(|k| a[k] <= 0.0 && b[k] >= 0.0);
    if contains && off2 == 0.0 {
        return orthants(rules, dim, a, b, s);
    }
    let mut d2 = off2;
    let mut diam2 = 0.0;
    for k in 0..dim {
        let gap = if a[k] > 0.0 {
            a[k]
        } else if b[k] < 0.0 {
            -b[k]
        } else {
            0.0
        };
        d2 += gap * gap;
        diam2 += (b[k] - a[k]) * (b[k] - a[k]);
    }
    let ratio2 = d2 / diam2;
    if ratio2 < 1.0 && depth < 40 {
        return split(rules, dim, a, b, off2, s, depth);
    }
    let rule = if ratio2 > 256.0 {
        &rules.rules[0]
    } else if ratio2 > 16.0 {
        &rules.rules[1]
    } else {
        &rules.rules[2]
    };
    tensor(rule, dim, a, b, off2, s)
}

fn split(rules: &Rules, dim: usize, a: &Point, b: &Point, off2: f64, s: f64, depth: u32) -> f64 {
    let mut total = 0.0;
    for mask in 0..(1usize << dim) {
        let mut lo = [0.0; 3];
        let mut hi = [0.0; 3];
        for k in 0..dim {
            let m = 0.5 * (a[k] + b[k]);
            if mask >> k & 1 == 0 {
                lo[k] = a[k];
                hi[k] = m;
            } else {
                lo[k] = m;
                hi[k] = b[k];
            }
        }
        total += shifted(rules, dim, &lo, &hi, off2, s, depth + 1);
    }
    total
}

fn tensor(rule: &(Vec<f64>, Vec<f64>), dim: usize, a: &Point, b: &Point, off2: f64, s: f64) -> f64 {
    let (xs, ws) = rule;
    let m = xs.len();
    let mut half = [0.0; 3];
    let mut mid = [0.0; 3];
    for k in 0..dim {
        half[k] = 0.5 * (b[k] - a[k]);
        mid[k] = 0.5 * (b[k] + a[k]);
    }
    let total_pts = m.pow(dim as u32);
    let mut sum = 0.0;
    for idx in 0..total_pts {
        let mut rem = idx;
        let mut w = 1.0;
        let mut r2 = off2;
        for k in 0..dim {
            let i = rem % m;
            rem /= m;
            let y = mid[k] + half[k] * xs[i];
            r2 += y * y;
            w *= ws[i];
        }
        sum += w * powf(r2, -0.5 * s);
    }
    let jac: f64 = half[..dim].iter().product();
    sum * jac
}

/// Box containing the singular point: split into orthant boxes with the
/// singularity at a corner.
fn orthants(rules: &Rules, dim: usize, a: &Point, b: &Point, s: f64) -> f64 {
    let mut total = 0.0;
    for mask in 0..(1usize << dim) {
        let mut ext = [0.0; 3];
        let mut empty = false;
        for k in 0..dim {
            ext[k] = if mask >> k & 1 == 0 { -a[k] } else { b[k] };
            if ext[k] <= 0.0 {
                empty = true;
            }
        }
        if !empty {
            total += corner_box(rules, dim, &ext, s);
        }
    }
    total
}

/// `∫_{[0,e]} |y|^{-s} dy` by decomposing the box into pyramids with apex
/// at the origin: the pyramid over the face `y_i = e_i` contributes
/// `e_i/(dim - s) ∫_face |y|^{-s}`.
fn corner_box(rules: &Rules, dim: usize, e: &Point, s: f64) -> f64 {
    let mut total = 0.0;
    for i in 0..dim {
        let lo = [0.0; 3];
        let mut hi = [0.0; 3];
        let mut m = 0;
        for k in 0..dim {
            if k != i {
                hi[m] = e[k];
                m += 1;
            }
        }
        let face = shifted(rules, dim - 1, &lo, &hi, e[i] * e[i], s, 0);
        total += e[i] / (dim as f64 - s) * face;
    }
    total
}

/// `∫_{[lo, hi]} w(t) |t - c|^{-s} dt` for an affine weight
/// `w(t) = w0 + w1 (t - lo)`, exactly (`s < 1` when `c` is inside).
pub fn weighted_power_integral(lo: f64, hi: f64, c: f64, s: f64, w0: f64, w1: f64) -> f64 {
    if hi <= lo {
        return 0.0;
    }
    if c > lo && c < hi {
        return weighted_power_integral(lo, c, c, s, w0, w1)
            + weighted_power_integral(c, hi, c, s, w0 + w1 * (c - lo), w1);
    }
    // On this piece u = |t - c| is monotone; write the weight as A + B u.
    let sign = if c <= lo { 1.0 } else { -1.0 };
    let u0 = (lo - c).abs();
    let u1 = (hi - c).abs();
    // t = c + sign·u, so w = w0 + w1 (c + sign·u - lo)
    let aa = w0 + w1 * (c - lo);
    let bb = w1 * sign;
    let prim = |u: f64| -> f64 {
        let p1 = if u == 0.0 { 0.0 } else { powf(u, 1.0 - s) / (1.0 - s) };
        let p2 = if u == 0.0 { 0.0 } else { powf(u, 2.0 - s) / (2.0 - s) };
        aa * p1 + bb * p2
    };
    sign * (prim(u1) - prim(u0))
}
