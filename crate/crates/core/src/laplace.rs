//! Laplace-type integrals `∫₀^∞ tⁿ φ(t) e^{-xt} dt` with explicit error accounting.
//!
//! The integral is split at a truncation point `T`. The finite part is handled
//! by adaptive bisection with an embedded 7/15-point Gauss–Kronrod pair; the
//! tail `∫_T^∞` is bounded analytically from a majorant of `|φ|`, see
//! [`EnvelopeTerm`]. `T` is the first point of the sequence `16, 32, 64, …`
//! whose tail bound falls below half the tolerance.

use serde::Serialize;
use thiserror::Error;

use crate::specfun::{kernel_eval, Kernel, KernelKind, SpecFunError};

/// Orders above this are refused: `tⁿ e^{-xt}` then peaks where the kernel
/// is no longer resolved in double precision.
pub const MAX_ORDER: u32 = 60;
pub const MIN_MOMENT_TOL: f64 = 1e-12;
pub const MIN_ABS_TOL: f64 = 1e-10;

const INITIAL_TRUNCATION: f64 = 16.0;
const MAX_TRUNCATION: f64 = 1_048_576.0;
const MAX_PANELS: usize = 4000;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuadratureResult {
    pub value: f64,
    /// Quadrature error on `[0, T]`.
    pub abs_error_estimate: f64,
    /// Certified bound on the neglected `∫_T^∞`.
    pub tail_bound: f64,
    pub nodes_used: usize,
    pub truncation_point: f64,
}

impl QuadratureResult {
    pub fn total_error(&self) -> f64 {
        self.abs_error_estimate + self.tail_bound
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum QuadError {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Function(#[from] SpecFunError),
    #[error("tolerance not met: value {} with total error {}", best.value, best.total_error())]
    ToleranceNotMet { best: QuadratureResult },
    #[error("integral diverges: no finite tail bound up to t = {truncation_point}")]
    Divergent { truncation_point: f64 },
}

impl QuadError {
    /// The best-effort result carried by [`QuadError::ToleranceNotMet`].
    pub fn best_effort(&self) -> Option<&QuadratureResult> {
        match self {
            QuadError::ToleranceNotMet { best } => Some(best),
            _ => None,
        }
    }
}

/// One term `coeff · t^power · e^{-decay·t} · e^{2 sqrt(growth·t)}` of a majorant of `|φ(t)|`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnvelopeTerm {
    pub coeff: f64,
    pub power: u32,
    pub decay: f64,
    pub growth: f64,
}

/// A density that can be pushed through [`laplace_moment`].
pub trait LaplaceDensity: Sync {
    fn density(&self, t: f64) -> Result<f64, SpecFunError>;

    /// Terms whose sum dominates `|density(t)|` for every `t ≥ 0`.
    fn envelope(&self) -> Vec<EnvelopeTerm>;

    /// Largest `t` at which `density` can be evaluated.
    fn max_t(&self) -> f64 {
        f64::INFINITY
    }
}

impl LaplaceDensity for Kernel {
    fn density(&self, t: f64) -> Result<f64, SpecFunError> {
        kernel_eval(self, t)
    }

    /// `S(m,t) ≤ e^{2 sqrt(mt)}` since `(2n)!(2n+1)! ≥ (4n)!/2^{4n}`; with
    /// `g(t) ≤ t + 1` this gives `|φ₃| ≤ (t + 1 + e^{2 sqrt(mt)}) e^{-t}`,
    /// and `t e^{-t}/(1 - e^{-t}) ≤ 1` gives `|φ₄| ≤ e^{2 sqrt(mt)} + 1`.
    fn envelope(&self) -> Vec<EnvelopeTerm> {
        let m = self.param();
        let term = |power, decay, growth| EnvelopeTerm {
            coeff: 1.0,
            power,
            decay,
            growth,
        };
        match self.kind {
            KernelKind::Phi3 => vec![term(1, 1.0, 0.0), term(0, 1.0, 0.0), term(0, 1.0, m)],
            KernelKind::Phi4 => vec![term(0, 0.0, m), term(0, 0.0, 0.0)],
        }
    }

    fn max_t(&self) -> f64 {
        // 2 sqrt(mt) <= 700
        122_500.0 / self.param()
    }
}

/// `φ(t) = c`. Used as a control: its moments are `c·n!/x^{n+1}` and it is
/// not absolutely integrable.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantDensity(pub f64);

impl LaplaceDensity for ConstantDensity {
    fn density(&self, _t: f64) -> Result<f64, SpecFunError> {
        Ok(self.0)
    }

    fn envelope(&self) -> Vec<EnvelopeTerm> {
        vec![EnvelopeTerm {
            coeff: self.0.abs(),
            power: 0,
            decay: 0.0,
            growth: 0.0,
        }]
    }
}

/// Where to cut the integral off.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Truncation {
    /// Smallest `16·2^k` whose tail bound is below `tol/2`.
    Auto,
    Fixed(f64),
}

/// `(-1)ⁿ f⁽ⁿ⁾(x) = ∫₀^∞ tⁿ φ(t) e^{-xt} dt` for `f(x) = ∫₀^∞ φ(t) e^{-xt} dt`.
pub fn laplace_moment<D: LaplaceDensity + ?Sized>(
    density: &D,
    n: u32,
    x: f64,
    tol: f64,
) -> Result<QuadratureResult, QuadError> {
    laplace_moment_with(density, n, x, tol, Truncation::Auto)
}

pub fn laplace_moment_with<D: LaplaceDensity + ?Sized>(
    density: &D,
    n: u32,
    x: f64,
    tol: f64,
    truncation: Truncation,
) -> Result<QuadratureResult, QuadError> {
    if n > MAX_ORDER {
        return Err(QuadError::InvalidArgument(format!(
            "order {n} exceeds the cap of {MAX_ORDER}"
        )));
    }
    if !(x > 0.0) || !x.is_finite() {
        return Err(QuadError::InvalidArgument(format!("x = {x} must be positive")));
    }
    if !(tol >= MIN_MOMENT_TOL) {
        return Err(QuadError::InvalidArgument(format!(
            "tol = {tol} below {MIN_MOMENT_TOL}"
        )));
    }
    integrate(density, n, x, tol, false, truncation)
}

/// `∫₀^∞ |φ(t)| dt`; fails with [`QuadError::Divergent`] when no finite tail
/// bound exists.
pub fn integral_abs_kernel<D: LaplaceDensity + ?Sized>(
    density: &D,
    tol: f64,
) -> Result<QuadratureResult, QuadError> {
    if !(tol >= MIN_ABS_TOL) {
        return Err(QuadError::InvalidArgument(format!(
            "tol = {tol} below {MIN_ABS_TOL}"
        )));
    }
    integrate(density, 0, 0.0, tol, true, Truncation::Auto)
}

fn integrate<D: LaplaceDensity + ?Sized>(
    density: &D,
    n: u32,
    x: f64,
    tol: f64,
    absolute: bool,
    truncation: Truncation,
) -> Result<QuadratureResult, QuadError> {
    let envelope = density.envelope();
    let cap = MAX_TRUNCATION.min(density.max_t());

    let (t_end, tail) = match truncation {
        Truncation::Fixed(t) => {
            if !(t > 0.0) || t > density.max_t() {
                return Err(QuadError::InvalidArgument(format!(
                    "truncation point {t} outside (0, {}]",
                    density.max_t()
                )));
            }
            (t, tail_bound(&envelope, n, x, t))
        }
        Truncation::Auto => {
            let mut t = INITIAL_TRUNCATION;
            let mut tail = tail_bound(&envelope, n, x, t);
            while tail > 0.5 * tol && 2.0 * t <= cap {
                t *= 2.0;
                tail = tail_bound(&envelope, n, x, t);
            }
            (t, tail)
        }
    };
    if !tail.is_finite() {
        return Err(QuadError::Divergent {
            truncation_point: t_end,
        });
    }

    let integrand = |t: f64| -> Result<f64, SpecFunError> {
        let phi = density.density(t)?;
        let phi = if absolute { phi.abs() } else { phi };
        let weight = if t > 0.0 {
            (n as f64 * t.ln() - x * t).exp()
        } else if n == 0 {
            1.0
        } else {
            0.0
        };
        Ok(phi * weight)
    };
    let finite = adaptive(&integrand, t_end, 0.5 * tol)?;

    let result = QuadratureResult {
        value: finite.value,
        abs_error_estimate: finite.error,
        tail_bound: tail,
        nodes_used: finite.nodes,
        truncation_point: t_end,
    };
    if finite.converged && (tail <= 0.5 * tol || matches!(truncation, Truncation::Fixed(_))) {
        Ok(result)
    } else {
        Err(QuadError::ToleranceNotMet { best: result })
    }
}

/// Upper bound for `∫_T^∞ t^n e^{-xt} Σ envelope(t) dt`.
pub fn tail_bound(envelope: &[EnvelopeTerm], n: u32, x: f64, t_cut: f64) -> f64 {
    envelope
        .iter()
        .map(|e| {
            if e.coeff == 0.0 {
                0.0
            } else {
                e.coeff * exp_sqrt_tail(n + e.power, e.decay + x, e.growth, t_cut)
            }
        })
        .sum()
}

/// Upper bound for `∫_T^∞ t^p e^{-ct} e^{2 sqrt(g t)} dt`.
///
/// For `g > 0` the concave exponent is replaced by its tangent at `T`,
/// `2 sqrt(gt) ≤ sqrt(gT) + sqrt(g/T)·t`, which leaves an incomplete gamma
/// integral. Returns `+∞` when the bound does not converge.
fn exp_sqrt_tail(p: u32, c: f64, growth: f64, t_cut: f64) -> f64 {
    let (rate, log_prefactor) = if growth > 0.0 {
        (c - (growth / t_cut).sqrt(), (growth * t_cut).sqrt())
    } else {
        (c, 0.0)
    };
    if !(rate > 0.0) {
        return f64::INFINITY;
    }
    let log_bound =
        log_prefactor + ln_upper_gamma_int(p, rate * t_cut) - (p as f64 + 1.0) * rate.ln();
    log_bound.exp()
}

/// `ln Γ(p+1, y) = -y + ln Σ_{k=0}^{p} (p!/k!) y^k` for integer `p`.
fn ln_upper_gamma_int(p: u32, y: f64) -> f64 {
    // ln(p!/k!) y^k, accumulated from k = p downward.
    let mut logs = Vec::with_capacity(p as usize + 1);
    let ln_y = y.ln();
    let mut ln_ratio = 0.0;
    for k in (0..=p).rev() {
        logs.push(ln_ratio + k as f64 * ln_y);
        ln_ratio += (k.max(1) as f64).ln();
    }
    let peak = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let sum: f64 = logs.iter().map(|l| (l - peak).exp()).sum();
    -y + peak + sum.ln()
}

// 7-point Gauss / 15-point Kronrod, abscissae on [0, 1] half of [-1, 1].
const XGK: [f64; 8] = [
    0.991_455_371_120_812_639_206_854_697_526_329,
    0.949_107_912_342_758_524_526_189_684_047_851,
    0.864_864_423_359_769_072_789_712_788_640_926,
    0.741_531_185_599_394_439_863_864_773_280_788,
    0.586_087_235_467_691_130_294_144_838_258_730,
    0.405_845_151_377_397_166_906_606_412_076_961,
    0.207_784_955_007_898_467_600_689_403_773_245,
    0.000_000_000_000_000_000_000_000_000_000_000,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_224_963_732_008_058_970,
    0.063_092_092_629_978_553_290_700_663_189_204,
    0.104_790_010_322_250_183_839_876_322_541_518,
    0.140_653_259_715_525_918_745_189_590_510_238,
    0.169_004_726_639_267_902_826_583_426_598_550,
    0.190_350_578_064_785_409_913_256_402_421_014,
    0.204_432_940_075_298_892_414_161_999_234_649,
    0.209_482_141_084_727_828_012_999_174_891_714,
];
// Gauss weights for XGK[1], XGK[3], XGK[5], XGK[7].
const WG: [f64; 4] = [
    0.129_484_966_168_869_693_270_611_432_679_082,
    0.279_705_391_489_276_667_901_467_771_423_780,
    0.381_830_050_505_118_944_950_369_775_488_975,
    0.417_959_183_673_469_387_755_102_040_816_327,
];

#[derive(Debug, Clone, Copy)]
struct Panel {
    a: f64,
    b: f64,
    value: f64,
    error: f64,
    resabs: f64,
}

fn gauss_kronrod<F>(f: &F, a: f64, b: f64) -> Result<Panel, SpecFunError>
where
    F: Fn(f64) -> Result<f64, SpecFunError>,
{
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center)?;
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    let mut resabs = (fc * WGK[7]).abs();
    for j in 0..7 {
        let dx = half * XGK[j];
        let f1 = f(center - dx)?;
        let f2 = f(center + dx)?;
        kronrod += WGK[j] * (f1 + f2);
        resabs += WGK[j] * (f1.abs() + f2.abs());
        if j % 2 == 1 {
            gauss += WG[j / 2] * (f1 + f2);
        }
    }
    let value = kronrod * half;
    let resabs = resabs * half.abs();
    let error = ((kronrod - gauss) * half)
        .abs()
        .max(50.0 * f64::EPSILON * resabs);
    Ok(Panel {
        a,
        b,
        value,
        error,
        resabs,
    })
}

struct Adaptive {
    value: f64,
    error: f64,
    nodes: usize,
    converged: bool,
}

/// Integrates over `[0, t_end]`, refining the panel with the largest error
/// until the summed error drops below `tol` (or below the roundoff floor
/// already built into each panel's estimate).
fn adaptive<F>(f: &F, t_end: f64, tol: f64) -> Result<Adaptive, SpecFunError>
where
    F: Fn(f64) -> Result<f64, SpecFunError>,
{
    let mut edges = vec![0.0];
    let mut e = 1.0;
    while e < t_end {
        edges.push(e);
        e *= 2.0;
    }
    edges.push(t_end);

    let mut panels = Vec::with_capacity(MAX_PANELS);
    for w in edges.windows(2) {
        panels.push(gauss_kronrod(f, w[0], w[1])?);
    }
    let mut nodes = 15 * panels.len();

    let floor = |panels: &[Panel]| -> f64 {
        // Each panel's estimate is at least 50 eps |∫|f||; allow twice that overall.
        panels.iter().map(|p| p.resabs).sum::<f64>() * 100.0 * f64::EPSILON
    };

    let mut converged = false;
    loop {
        let error: f64 = panels.iter().map(|p| p.error).sum();
        if error <= tol.max(floor(&panels)) {
            converged = true;
            break;
        }
        if panels.len() >= MAX_PANELS {
            break;
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.error.total_cmp(&b.1.error))
            .expect("at least one panel");
        let p = panels[worst];
        let mid = 0.5 * (p.a + p.b);
        if !(mid > p.a && mid < p.b) {
            break;
        }
        let left = gauss_kronrod(f, p.a, mid)?;
        let right = gauss_kronrod(f, mid, p.b)?;
        nodes += 30;
        panels[worst] = left;
        panels.push(right);
    }

    // Sum from left to right so the result does not depend on split history.
    panels.sort_by(|a, b| a.a.total_cmp(&b.a));
    Ok(Adaptive {
        value: panels.iter().map(|p| p.value).sum(),
        error: panels.iter().map(|p| p.error).sum(),
        nodes,
        converged,
    })
}
