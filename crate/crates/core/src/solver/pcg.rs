//! Jacobi-preconditioned conjugate gradients on a masked vector.

pub(crate) struct PcgOutcome {
    pub iterations: usize,
    pub residual: f64,
    pub converged: bool,
}

pub(crate) struct PcgWork {
    r: alloc::vec::Vec<f64>,
    z: alloc::vec::Vec<f64>,
    p: alloc::vec::Vec<f64>,
    ap: alloc::vec::Vec<f64>,
}

impl PcgWork {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            r: alloc::vec![0.0; n],
            z: alloc::vec![0.0; n],
            p: alloc::vec![0.0; n],
            ap: alloc::vec![0.0; n],
        }
    }
}

fn dot(mask: &[bool], a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        if mask[i] {
            s += a[i] * b[i];
        }
    }
    s
}

/// Solves `A x = b` on the entries where `mask` is set. `apply` must write
/// `A v` on masked entries and may leave the rest untouched; `diag` is the
/// diagonal of `A`. The relative residual `‖b - Ax‖/‖b‖` must drop below
/// `tol` within `max_iter` iterations.
pub(crate) fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    mask: &[bool],
    b: &[f64],
    x: &mut [f64],
    tol: f64,
    max_iter: usize,
    work: &mut PcgWork,
) -> PcgOutcome {
    let PcgWork { r, z, p, ap } = work;
    apply(x, ap);
    for i in 0..b.len() {
        if mask[i] {
            r[i] = b[i] - ap[i];
        } else {
            r[i] = 0.0;
            z[i] = 0.0;
            p[i] = 0.0;
        }
    }
    let bnorm = crate::math::sqrt(dot(mask, b, b));
    if bnorm == 0.0 {
        for i in 0..x.len() {
            if mask[i] {
                x[i] = 0.0;
            }
        }
        return PcgOutcome {
            iterations: 0,
            residual: 0.0,
            converged: true,
        };
    }
    let mut rnorm = crate::math::sqrt(dot(mask, r, r));
    if rnorm <= tol * bnorm {
        return PcgOutcome {
            iterations: 0,
            residual: rnorm / bnorm,
            converged: true,
        };
    }
    for i in 0..b.len() {
        if mask[i] {
            z[i] = r[i] / diag[i];
            p[i] = z[i];
        }
    }
    let mut rz = dot(mask, r, z);
    for it in 1..=max_iter {
        apply(p, ap);
        let pap = dot(mask, p, ap);
        if !(pap > 0.0) {
            return PcgOutcome {
                iterations: it,
                residual: rnorm / bnorm,
                converged: false,
            };
        }
        let alpha = rz / pap;
        for i in 0..b.len() {
            if mask[i] {
                x[i] += alpha * p[i];
                r[i] -= alpha * ap[i];
            }
        }
        rnorm = crate::math::sqrt(dot(mask, r, r));
        if !rnorm.is_finite() {
            break;
        }
        if rnorm <= tol * bnorm {
            return PcgOutcome {
                iterations: it,
                residual: rnorm / bnorm,
                converged: true,
            };
        }
        for i in 0..b.len() {
            if mask[i] {
                z[i] = r[i] / diag[i];
            }
        }
        let rz_new = dot(mask, r, z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..b.len() {
            if mask[i] {
                p[i] = z[i] + beta * p[i];
            }
        }
    }
    PcgOutcome {
        iterations: max_iter,
        residual: rnorm / bnorm,
        converged: false,
    }
}
