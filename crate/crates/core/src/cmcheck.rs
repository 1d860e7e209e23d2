//! Deciding and refuting complete monotonicity.
//!
//! Two independent routes are available. The kernel route looks for a point
//! where `φ < 0`: a continuous, absolutely integrable density that is negative
//! somewhere cannot be the Laplace density of a completely monotonic function.
//! The derivative route evaluates `(-1)ⁿ f⁽ⁿ⁾(x) = ∫ tⁿ φ(t) e^{-xt} dt` on a grid.
//! [`assess_cm`] runs the kernel route first and lets it take precedence.

use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::laplace::{laplace_moment, QuadError, MAX_ORDER};
use crate::specfun::{kernel_sign_fn, Kernel, KernelKind, SpecFunError};

pub const DEFAULT_SCAN_POINTS: usize = 512;
pub const DEFAULT_SCAN_START: f64 = 1e-6;
pub const DEFAULT_X_GRID: [f64; 6] = [0.25, 0.5, 1.0, 2.0, 5.0, 10.0];

/// Relative bracket width at which bisection stops.
const BISECTION_REL_WIDTH: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CmError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Function(#[from] SpecFunError),
    #[error(transparent)]
    Quadrature(#[from] QuadError),
}

/// A bracket `[lo, hi]` with `sign_fn(lo) > 0 > sign_fn(hi)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SignChangeCertificate {
    pub kernel: Kernel,
    pub bracket_lo: f64,
    pub bracket_hi: f64,
    pub root_estimate: f64,
    pub sign_fn_lo: f64,
    pub sign_fn_hi: f64,
    /// `T(m)` from [`negativity_threshold`]; only defined for Phi3.
    pub analytic_threshold: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Verdict {
    ConsistentWithCM,
    RefutedAtDerivative { order: u32, x: f64 },
    RefutedByKernelSign { t: f64 },
}

impl Verdict {
    pub fn is_refuted(&self) -> bool {
        !matches!(self, Verdict::ConsistentWithCM)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderMargin {
    pub order: u32,
    /// `min_x (-1)ⁿ f⁽ⁿ⁾(x)` over the grid.
    pub min_margin: f64,
    pub x_at_min: f64,
    /// Total quadrature error reported at the minimizing `x`.
    pub error_at_min: f64,
}

/// A negative margin that did not exceed its own error estimate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NearZero {
    pub order: u32,
    pub x: f64,
    pub margin: f64,
    pub error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CmReport {
    pub kernel: Kernel,
    pub max_order: u32,
    pub x_grid: Vec<f64>,
    pub margins: Vec<OrderMargin>,
    pub near_zero: Vec<NearZero>,
    /// Evaluations that hit the panel limit and report a best-effort value.
    pub unconverged: usize,
    pub certificate: Option<SignChangeCertificate>,
    pub verdict: Verdict,
}

/// `T(m) = (1 + sqrt(1 + 4a)) / (2a)` with `a = m²/2880`, the positive root of
/// `a t² = t + 1`.
///
/// For `t ≥ T(m)`, `g(t) ≤ t + 1 ≤ a t² ≤ S(m,t)`, so the Phi3 kernel is
/// negative there.
pub fn negativity_threshold(m: f64) -> f64 {
    let a = m * m / 2880.0;
    (1.0 + (1.0 + 4.0 * a).sqrt()) / (2.0 * a)
}

/// Scan interval used when none is given: `[1e-6, min(2 T(m), limit)]` for
/// Phi3 and `[1e-6, min(500, limit)]` for Phi4, where `limit` keeps the sign
/// function representable.
pub fn default_scan_range(k: &Kernel) -> (f64, f64) {
    let limit = k.sign_fn_limit();
    let hi = match k.kind {
        KernelKind::Phi3 => (2.0 * negativity_threshold(k.param())).min(limit),
        KernelKind::Phi4 => 500.0f64.min(limit),
    };
    (DEFAULT_SCAN_START, hi)
}

/// Log-spaced grid of `points` nodes on `[lo, hi]`, `lo > 0`.
pub fn log_grid(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![lo];
    }
    let (ln_lo, ln_hi) = (lo.ln(), hi.ln());
    (0..points)
        .map(|i| {
            if i == 0 {
                lo
            } else if i == points - 1 {
                hi
            } else {
                let frac = i as f64 / (points - 1) as f64;
                (ln_lo + frac * (ln_hi - ln_lo)).exp()
            }
        })
        .collect()
}

pub fn find_sign_change(
    k: &Kernel,
    t_lo: f64,
    t_hi: f64,
) -> Result<Option<SignChangeCertificate>, CmError> {
    find_sign_change_with(k, t_lo, t_hi, DEFAULT_SCAN_POINTS)
}

/// Scans a log-spaced grid for the first positive-to-negative change of
/// [`kernel_sign_fn`] and bisects it down to relative width `1e-8`.
///
/// A zero lower end is replaced by `min(1e-6, t_hi/1e3)`; the kernel vanishes
/// at the origin and carries no sign information there.
pub fn find_sign_change_with(
    k: &Kernel,
    t_lo: f64,
    t_hi: f64,
    points: usize,
) -> Result<Option<SignChangeCertificate>, CmError> {
    if !(t_lo >= 0.0 && t_hi > t_lo && t_hi.is_finite()) {
        return Err(CmError::Usage(format!(
            "scan interval [{t_lo}, {t_hi}] is not a proper subset of [0, ∞)"
        )));
    }
    if points < 2 {
        return Err(CmError::Usage("scan needs at least two points".into()));
    }
    let start = if t_lo > 0.0 {
        t_lo
    } else {
        DEFAULT_SCAN_START.min(t_hi * 1e-3)
    };
    let sign = |t: f64| kernel_sign_fn(k, t);

    let grid = log_grid(start, t_hi, points);
    let mut prev = (grid[0], sign(grid[0])?);
    let mut bracket = None;
    for &t in &grid[1..] {
        let v = sign(t)?;
        if prev.1 > 0.0 && v < 0.0 {
            bracket = Some((prev, (t, v)));
            break;
        }
        prev = (t, v);
    }
    let Some(((mut lo, mut v_lo), (mut hi, mut v_hi))) = bracket else {
        return Ok(None);
    };

    while hi - lo > BISECTION_REL_WIDTH * lo.max(1.0) {
        let mid = 0.5 * (lo + hi);
        if !(mid > lo && mid < hi) {
            break;
        }
        let v = sign(mid)?;
        if v > 0.0 {
            (lo, v_lo) = (mid, v);
        } else if v < 0.0 {
            (hi, v_hi) = (mid, v);
        } else {
            break;
        }
    }

    Ok(Some(SignChangeCertificate {
        kernel: *k,
        bracket_lo: lo,
        bracket_hi: hi,
        root_estimate: 0.5 * (lo + hi),
        sign_fn_lo: v_lo,
        sign_fn_hi: v_hi,
        analytic_threshold: match k.kind {
            KernelKind::Phi3 => Some(negativity_threshold(k.param())),
            KernelKind::Phi4 => None,
        },
    }))
}

fn validate_grid(max_order: u32, x_grid: &[f64]) -> Result<(), CmError> {
    if max_order > MAX_ORDER {
        return Err(CmError::Usage(format!(
            "max order {max_order} exceeds {MAX_ORDER}"
        )));
    }
    if x_grid.is_empty() {
        return Err(CmError::Usage("x grid is empty".into()));
    }
    if let Some(x) = x_grid.iter().find(|x| !(**x > 0.0 && x.is_finite())) {
        return Err(CmError::Usage(format!("x grid point {x} is not positive")));
    }
    Ok(())
}

/// Evaluates `(-1)ⁿ f⁽ⁿ⁾(x)` for `n = 0..=max_order` and every grid point.
///
/// A negative margin refutes complete monotonicity only if its magnitude
/// exceeds the total reported quadrature error; the first such `(n, x)` in
/// order-major, grid order becomes the verdict.
pub fn cm_verify(
    k: &Kernel,
    max_order: u32,
    x_grid: &[f64],
    tol: f64,
) -> Result<CmReport, CmError> {
    validate_grid(max_order, x_grid)?;

    let jobs: Vec<(u32, f64)> = (0..=max_order)
        .flat_map(|n| x_grid.iter().map(move |&x| (n, x)))
        .collect();
    // Collected in job order, so the report does not depend on scheduling.
    let values: Vec<(f64, f64, bool)> = jobs
        .par_iter()
        .map(|&(n, x)| match laplace_moment(k, n, x, tol) {
            Ok(r) => Ok((r.value, r.total_error(), true)),
            Err(QuadError::ToleranceNotMet { best }) => Ok((best.value, best.total_error(), false)),
            Err(e) => Err(CmError::from(e)),
        })
        .collect::<Result<_, _>>()?;

    let mut margins = Vec::with_capacity(max_order as usize + 1);
    let mut near_zero = Vec::new();
    let mut verdict = Verdict::ConsistentWithCM;
    for (n, row) in values.chunks(x_grid.len()).enumerate() {
        let n = n as u32;
        let mut best = OrderMargin {
            order: n,
            min_margin: f64::INFINITY,
            x_at_min: x_grid[0],
            error_at_min: 0.0,
        };
        for (&x, &(margin, error, _)) in x_grid.iter().zip(row) {
            if margin < best.min_margin {
                best = OrderMargin {
                    order: n,
                    min_margin: margin,
                    x_at_min: x,
                    error_at_min: error,
                };
            }
            if margin < 0.0 {
                if -margin > error {
                    if verdict == Verdict::ConsistentWithCM {
                        verdict = Verdict::RefutedAtDerivative { order: n, x };
                    }
                } else {
                    near_zero.push(NearZero {
                        order: n,
                        x,
                        margin,
                        error,
                    });
                }
            }
        }
        margins.push(best);
    }

    Ok(CmReport {
        kernel: *k,
        max_order,
        x_grid: x_grid.to_vec(),
        margins,
        near_zero,
        unconverged: values.iter().filter(|v| !v.2).count(),
        certificate: None,
        verdict,
    })
}

/// Kernel scan over [`default_scan_range`] followed by [`cm_verify`]; a kernel
/// certificate overrides whatever the derivative margins say.
///
/// Without a bracket, a Phi3 kernel that is already negative at its analytic
/// threshold `T(m)` still refutes, at `t = T(m)`.
pub fn assess_cm(
    k: &Kernel,
    max_order: u32,
    x_grid: &[f64],
    tol: f64,
) -> Result<CmReport, CmError> {
    validate_grid(max_order, x_grid)?;
    let (lo, hi) = default_scan_range(k);
    let certificate = find_sign_change(k, lo, hi)?;

    let mut report = cm_verify(k, max_order, x_grid, tol)?;
    if let Some(cert) = &certificate {
        report.verdict = Verdict::RefutedByKernelSign { t: cert.bracket_hi };
    } else if k.kind == KernelKind::Phi3 {
        let t = negativity_threshold(k.param());
        if t <= k.sign_fn_limit() && kernel_sign_fn(k, t)? < 0.0 {
            report.verdict = Verdict::RefutedByKernelSign { t };
        }
    }
    report.certificate = certificate;
    Ok(report)
}

/// Samples `f(x₀ + j h)` for `j = 0..count`.
pub fn sample_uniform(f: impl Fn(f64) -> f64, x0: f64, h: f64, count: usize) -> Vec<f64> {
    (0..count).map(|j| f(x0 + j as f64 * h)).collect()
}

/// `(-1)ⁿ Δₕⁿ f(x₀)` for `n = 0..=max_order`, from samples at `x₀ + jh`.
///
/// The discrete analogue of the derivative margins: every entry of a
/// completely monotonic function's probe is nonnegative.
pub fn finite_difference_cm_probe(samples: &[f64], max_order: usize) -> Result<Vec<f64>, CmError> {
    if samples.len() < max_order + 1 {
        return Err(CmError::Usage(format!(
            "order {max_order} needs {} samples, got {}",
            max_order + 1,
            samples.len()
        )));
    }
    Ok((0..=max_order)
        .map(|n| {
            let mut binom = 1.0;
            let mut sum = 0.0;
            for (j, &f) in samples[..=n].iter().enumerate() {
                sum += if j % 2 == 0 { binom * f } else { -binom * f };
                binom = binom * (n - j) as f64 / (j + 1) as f64;
            }
            sum
        })
        .collect())
}
