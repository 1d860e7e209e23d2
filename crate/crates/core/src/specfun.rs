//! Scalar special functions behind the two reference kernels.
//!
//! Everything here is pure `f64` arithmetic: the trigamma function, the
//! function `g(t) = t / (1 - e^{-t})`, the double-factorial series
//! `S(m, t) = Σ (mt)^{2n} / ((2n)! (2n+1)!)`, the kernels built from them and
//! the closed-form functions whose Laplace densities those kernels are.

use std::fmt;

use serde::Serialize;
use thiserror::Error;

/// Errors raised by the scalar evaluators.
#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum SpecFunError {
    #[error("{function}: argument {value} outside the domain")]
    Domain { function: &'static str, value: f64 },
    #[error("{function}: result overflows at argument {value}")]
    Overflow { function: &'static str, value: f64 },
}

/// Recurrence shift threshold for [`trigamma`].
const TRIGAMMA_SHIFT: f64 = 10.0;

/// `B_{2k}` for k = 1..=6, the coefficients of `x^{-(2k+1)}` in the
/// asymptotic expansion of trigamma.
const TRIGAMMA_ASYMP: [f64; 6] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
];

/// Below this `g` switches to its Taylor polynomial.
const G_TAYLOR_CUTOFF: f64 = 1e-2;

/// Taylor coefficients of `g(t) = t / (1 - e^{-t})` at zero, degrees 0..=4.
const G_TAYLOR: [f64; 5] = [1.0, 0.5, 1.0 / 12.0, 0.0, -1.0 / 720.0];

/// Terms of the series below this fraction of the partial sum end the loop.
const S_SERIES_REL_STOP: f64 = 1e-17;
const S_SERIES_MAX_TERMS: usize = 10_000;

/// Largest `2 sqrt(mt)` accepted by [`s_series`]; `S` grows like `e^{2 sqrt(mt)}`.
pub const S_SERIES_EXPONENT_LIMIT: f64 = 709.0;

/// Trigamma `ψ'(x) = Σ_{k≥0} 1/(x+k)²` for `x > 0`.
///
/// Shifts upward with `ψ'(x) = ψ'(x+1) + 1/x²` until `x ≥ 10`, then sums the
/// asymptotic series `1/x + 1/(2x²) + Σ B_{2k}/x^{2k+1}` through `B_12`.
pub fn trigamma(x: f64) -> Result<f64, SpecFunError> {
    if !(x > 0.0) || x.is_infinite() {
        return Err(SpecFunError::Domain {
            function: "trigamma",
            value: x,
        });
    }

    let mut shifted = x;
    let mut steps = 0usize;
    while shifted < TRIGAMMA_SHIFT {
        shifted += 1.0;
        steps += 1;
    }

    let inv = 1.0 / shifted;
    let inv2 = inv * inv;
    let mut tail = 0.0;
    // Horner in 1/x² from the smallest coefficient up.
    for &b in TRIGAMMA_ASYMP.iter().rev() {
        tail = tail * inv2 + b;
    }
    let mut sum = inv + 0.5 * inv2 + tail * inv2 * inv;

    // Add the recurrence terms smallest first.
    for k in (0..steps).rev() {
        let xk = x + k as f64;
        sum += 1.0 / (xk * xk);
    }

    if sum.is_finite() {
        Ok(sum)
    } else {
        Err(SpecFunError::Overflow {
            function: "trigamma",
            value: x,
        })
    }
}

/// `g(t) = t / (1 - e^{-t})`, with the removable singularity filled (`g(0) = 1`).
pub fn g(t: f64) -> f64 {
    if t.abs() < G_TAYLOR_CUTOFF {
        G_TAYLOR.iter().rev().fold(0.0, |acc, &c| acc * t + c)
    } else {
        t / -(-t).exp_m1()
    }
}

/// `t / (e^t - 1) = g(t) - t`, the second term of the Phi4 kernel.
fn bose(t: f64) -> f64 {
    if t.abs() < G_TAYLOR_CUTOFF {
        // g's polynomial with the sign of the odd term flipped.
        G_TAYLOR
            .iter()
            .enumerate()
            .rev()
            .fold(0.0, |acc, (i, &c)| acc * t + if i == 1 { -c } else { c })
    } else {
        t / t.exp_m1()
    }
}

/// `S(m, t) = Σ_{n≥0} (mt)^{2n} / ((2n)! (2n+1)!)`.
///
/// Terms follow `term_{n+1} = term_n (mt)² / ((2n+1)(2n+2)²(2n+3))` and are
/// accumulated with Neumaier compensation until a term falls below `1e-17`
/// of the partial sum.
pub fn s_series(m: f64, t: f64) -> Result<f64, SpecFunError> {
    if !(m > 0.0) || m.is_infinite() {
        return Err(SpecFunError::Domain {
            function: "s_series",
            value: m,
        });
    }
    if !(t >= 0.0) {
        return Err(SpecFunError::Domain {
            function: "s_series",
            value: t,
        });
    }
    let z = m * t;
    if 2.0 * z.sqrt() > S_SERIES_EXPONENT_LIMIT {
        return Err(SpecFunError::Overflow {
            function: "s_series",
            value: t,
        });
    }
    let z2 = z * z;

    let mut sum = 1.0;
    let mut comp = 0.0;
    let mut term = 1.0;
    for n in 0..S_SERIES_MAX_TERMS {
        let k = n as f64;
        let denom = (2.0 * k + 1.0) * (2.0 * k + 2.0) * (2.0 * k + 2.0) * (2.0 * k + 3.0);
        term *= z2 / denom;
        let next = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - next) + term;
        } else {
            comp += (term - next) + sum;
        }
        sum = next;
        if term < S_SERIES_REL_STOP * sum {
            break;
        }
    }
    let sum = sum + comp;
    if sum.is_finite() {
        Ok(sum)
    } else {
        Err(SpecFunError::Overflow {
            function: "s_series",
            value: t,
        })
    }
}

/// Kernel parameter `m > 0`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize)]
#[serde(transparent)]
pub struct KernelParam(f64);

impl KernelParam {
    pub fn new(m: f64) -> Result<Self, SpecFunError> {
        if m > 0.0 && m.is_finite() {
            Ok(Self(m))
        } else {
            Err(SpecFunError::Domain {
                function: "KernelParam",
                value: m,
            })
        }
    }

    pub fn get(self) -> f64 {
        self.0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub enum KernelKind {
    /// `φ(t) = (g(t) - S(m,t)) e^{-t}`, the density of `ψ'(x+1) - sinh(m/(x+1))/m`.
    Phi3,
    /// `φ(t) = S(m,t) - t e^{-t}/(1 - e^{-t})`, the density of `sinh(m/x)/m - ψ'(x+1)`.
    Phi4,
}

impl KernelKind {
    pub fn name(self) -> &'static str {
        match self {
            KernelKind::Phi3 => "phi3",
            KernelKind::Phi4 => "phi4",
        }
    }
}

impl fmt::Display for KernelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// One of the two reference Laplace kernels together with its parameter.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Kernel {
    pub kind: KernelKind,
    pub m: KernelParam,
}

impl Kernel {
    pub fn new(kind: KernelKind, m: f64) -> Result<Self, SpecFunError> {
        Ok(Self {
            kind,
            m: KernelParam::new(m)?,
        })
    }

    pub fn phi3(m: f64) -> Result<Self, SpecFunError> {
        Self::new(KernelKind::Phi3, m)
    }

    pub fn phi4(m: f64) -> Result<Self, SpecFunError> {
        Self::new(KernelKind::Phi4, m)
    }

    pub fn param(&self) -> f64 {
        self.m.get()
    }

    /// Largest `t` at which [`kernel_sign_fn`] is representable, with some headroom.
    pub fn sign_fn_limit(&self) -> f64 {
        let m = self.param();
        match self.kind {
            // 2 sqrt(mt) <= 600
            KernelKind::Phi3 => 90_000.0 / m,
            // t + 2 sqrt(mt) <= 690
            KernelKind::Phi4 => {
                let r = (m + 690.0).sqrt() - m.sqrt();
                r * r
            }
        }
    }
}

impl fmt::Display for Kernel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{{m={}}}", self.kind, self.param())
    }
}

fn check_t(function: &'static str, t: f64) -> Result<(), SpecFunError> {
    if t >= 0.0 && t.is_finite() {
        Ok(())
    } else {
        Err(SpecFunError::Domain { function, value: t })
    }
}

/// The kernel `φ(t)` itself. Both kernels vanish at `t = 0`.
pub fn kernel_eval(k: &Kernel, t: f64) -> Result<f64, SpecFunError> {
    check_t("kernel_eval", t)?;
    let s = s_series(k.param(), t)?;
    Ok(match k.kind {
        KernelKind::Phi3 => (g(t) - s) * (-t).exp(),
        KernelKind::Phi4 => s - bose(t),
    })
}

/// A function with the sign of `φ(t)` but without the decaying factor:
/// `g(t) - S(m,t)` for Phi3 and `(e^t - 1) S(m,t) - t` for Phi4.
pub fn kernel_sign_fn(k: &Kernel, t: f64) -> Result<f64, SpecFunError> {
    check_t("kernel_sign_fn", t)?;
    let s = s_series(k.param(), t)?;
    let v = match k.kind {
        KernelKind::Phi3 => g(t) - s,
        KernelKind::Phi4 => t.exp_m1() * s - t,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SpecFunError::Overflow {
            function: "kernel_sign_fn",
            value: t,
        })
    }
}

/// The function whose Laplace density is the kernel:
/// `ψ'(x+1) - sinh(m/(x+1))/m` (Phi3) or `sinh(m/x)/m - ψ'(x+1)` (Phi4).
pub fn closed_form(k: &Kernel, x: f64) -> Result<f64, SpecFunError> {
    if !(x > 0.0) || x.is_infinite() {
        return Err(SpecFunError::Domain {
            function: "closed_form",
            value: x,
        });
    }
    let m = k.param();
    let tri = trigamma(x + 1.0)?;
    let v = match k.kind {
        KernelKind::Phi3 => tri - (m / (x + 1.0)).sinh() / m,
        KernelKind::Phi4 => (m / x).sinh() / m - tri,
    };
    if v.is_finite() {
        Ok(v)
    } else {
        Err(SpecFunError::Overflow {
            function: "closed_form",
            value: x,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{BigInt, BigRational, One, ToPrimitive, Zero};
    use proptest::prelude::*;

    fn rel(a: f64, b: f64) -> f64 {
        (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
    }

    /// Σ 1/(x+k)² for k < K (smallest terms first, compensated) plus the
    /// tail estimate 1/(x+K-1/2), which is exact to O((x+K)^-4).
    fn trigamma_oracle(x: f64) -> f64 {
        const K: usize = 2_000_000;
        let mut sum = 0.0f64;
        let mut comp = 0.0f64;
        let mut add = |v: f64| {
            let t = sum + v;
            comp += if sum.abs() >= v.abs() { (sum - t) + v } else { (v - t) + sum };
            sum = t;
        };
        add(1.0 / (x + K as f64 - 0.5));
        for k in (0..K).rev() {
            let xk = x + k as f64;
            add(1.0 / (xk * xk));
        }
        sum + comp
    }

    #[test]
    fn trigamma_known_values() {
        let z2 = std::f64::consts::PI.powi(2) / 6.0;
        assert!(rel(trigamma(1.0).unwrap(), 1.6449340668482264) < 1e-15);
        assert!(rel(trigamma(1.0).unwrap(), z2) < 1e-15);
        assert!(rel(trigamma(2.0).unwrap(), 0.6449340668482264) < 1e-14);
    }

    #[test]
    fn trigamma_matches_series_oracle() {
        for &x in &[0.1, 0.5, 1.0, 2.0, 3.7, 9.99, 10.0, 12.5, 50.0] {
            let o = trigamma_oracle(x);
            let v = trigamma(x).unwrap();
            assert!(rel(v, o) < 1e-13, "x={x}: {v} vs {o}");
        }
    }

    #[test]
    fn trigamma_recurrence() {
        for &x in &[0.5, 1.0, 3.0] {
            let d = trigamma(x).unwrap() - trigamma(x + 1.0).unwrap();
            assert!(rel(d, 1.0 / (x * x)) < 1e-14, "x={x}");
        }
        let mut x = 0.1;
        while x <= 50.0 {
            let a = trigamma(x).unwrap();
            let r = (a - trigamma(x + 1.0).unwrap() - 1.0 / (x * x)).abs();
            assert!(r <= 1e-13 * a, "x={x} residual {r}");
            x += 0.173;
        }
    }

    #[test]
    fn trigamma_domain_and_overflow() {
        assert!(matches!(trigamma(0.0), Err(SpecFunError::Domain { .. })));
        assert!(matches!(trigamma(-1.5), Err(SpecFunError::Domain { .. })));
        assert!(matches!(trigamma(f64::NAN), Err(SpecFunError::Domain { .. })));
        assert!(matches!(trigamma(1e-200), Err(SpecFunError::Overflow { .. })));
        assert!(rel(trigamma(1e300).unwrap(), 1e-300) < 1e-15);
    }

    /// Bernoulli numbers B_0..B_n as exact rationals, from
    /// Σ_{j<=k} C(k+1, j) B_j = 0.
    fn bernoulli(n: usize) -> Vec<BigRational> {
        let mut b: Vec<BigRational> = vec![BigRational::one()];
        for k in 1..=n {
            let mut acc = BigRational::zero();
            let mut binom = BigInt::one();
            for (j, bj) in b.iter().enumerate() {
                acc += BigRational::from_integer(binom.clone()) * bj;
                binom = binom * BigInt::from(k + 1 - j) / BigInt::from(j + 1);
            }
            b.push(-acc / BigRational::from_integer(BigInt::from(k + 1)));
        }
        b
    }

    #[test]
    fn asymptotic_coefficients_are_bernoulli_numbers() {
        let b = bernoulli(12);
        for (k, &c) in TRIGAMMA_ASYMP.iter().enumerate() {
            let exact = b[2 * (k + 1)].to_f64().unwrap();
            assert!(rel(c, exact) < 1e-15, "B_{}", 2 * (k + 1));
        }
    }

    #[test]
    fn g_taylor_coefficients_from_exact_series() {
        // g(t) = t + t/(e^t - 1) = t + Σ B_k t^k / k!
        let b = bernoulli(4);
        let mut fact = BigInt::one();
        for (k, &c) in G_TAYLOR.iter().enumerate() {
            if k > 0 {
                fact *= BigInt::from(k);
            }
            let mut exact = &b[k] / BigRational::from_integer(fact.clone());
            if k == 1 {
                exact += BigRational::one();
            }
            assert_eq!(c, exact.to_f64().unwrap(), "degree {k}");
        }
    }

    #[test]
    fn g_values() {
        assert_eq!(g(0.0), 1.0);
        // 1/(1 - e^{-1}) to 40 digits: 1.58197670686932642438500200510901155854
        assert!(rel(g(1.0), 1.5819767068693265) < 1e-15);
        for &t in &[0.1, 1.0, 10.0] {
            let lhs = g(t) - t;
            let rhs = t / t.exp_m1();
            assert!((lhs - rhs).abs() <= 4.0 * f64::EPSILON * g(t), "t={t}");
        }
        // Continuity across the Taylor cutoff.
        let below = g(G_TAYLOR_CUTOFF * (1.0 - 1e-12));
        let above = g(G_TAYLOR_CUTOFF);
        assert!(rel(below, above) < 1e-14);
        assert!(rel(bose(G_TAYLOR_CUTOFF * (1.0 - 1e-12)), bose(G_TAYLOR_CUTOFF)) < 1e-14);
    }

    fn s_series_exact(m: i64, t: i64, terms: usize) -> f64 {
        let z2 = BigRational::from_integer(BigInt::from(m * t).pow(2));
        let mut term = BigRational::one();
        let mut sum = BigRational::one();
        for n in 0..terms as i64 {
            let d = (2 * n + 1) * (2 * n + 2) * (2 * n + 2) * (2 * n + 3);
            term = term * &z2 / BigRational::from_integer(BigInt::from(d));
            sum += &term;
        }
        sum.to_f64().unwrap()
    }

    #[test]
    fn s_series_values() {
        for &m in &[0.1, 1.0, 7.0] {
            assert_eq!(s_series(m, 0.0).unwrap(), 1.0);
        }
        let exact = s_series_exact(1, 1, 200);
        assert!(rel(s_series(1.0, 1.0).unwrap(), exact) < 1e-13);
        let exact = s_series_exact(3, 20, 200);
        assert!(rel(s_series(3.0, 20.0).unwrap(), exact) < 1e-13);
        for &(m, t) in &[(1.0, 10.0), (2.0, 5.0), (0.5, 40.0)] {
            let mt: f64 = m * t;
            assert!(s_series(m, t).unwrap() >= 1.0 + mt * mt / 2880.0);
        }
    }

    #[test]
    fn s_series_errors() {
        assert!(matches!(s_series(0.0, 1.0), Err(SpecFunError::Domain { .. })));
        assert!(matches!(s_series(1.0, -1.0), Err(SpecFunError::Domain { .. })));
        assert!(matches!(s_series(1.0, 2e5), Err(SpecFunError::Overflow { .. })));
        assert!(s_series(1.0, 1.2e5).unwrap().is_finite());
    }

    #[test]
    fn kernel_values_at_zero_and_one() {
        for &m in &[0.3, 1.0, 50.0] {
            assert_eq!(kernel_eval(&Kernel::phi3(m).unwrap(), 0.0).unwrap(), 0.0);
            assert_eq!(kernel_eval(&Kernel::phi4(m).unwrap(), 0.0).unwrap(), 0.0);
            assert_eq!(kernel_sign_fn(&Kernel::phi3(m).unwrap(), 0.0).unwrap(), 0.0);
        }
        let k = Kernel::phi4(1.0).unwrap();
        let v = kernel_eval(&k, 1.0).unwrap();
        let e = (-1.0f64).exp();
        let composed = s_series(1.0, 1.0).unwrap() - e / (1.0 - e);
        assert!(v >= 0.0);
        assert!((v - composed).abs() < 1e-13);
    }

    #[test]
    fn sign_fn_spot_checks() {
        let k4 = Kernel::phi4(1.0).unwrap();
        for &t in &[0.5, 1.0, 5.0, 20.0] {
            assert!(kernel_sign_fn(&k4, t).unwrap() >= 0.0);
        }
        // t + 1 < t²/2880 at t = 3000 and S(1,t) > t²/2880
        let k3 = Kernel::phi3(1.0).unwrap();
        assert!(3001.0 < 3000.0f64.powi(2) / 2880.0);
        assert!(kernel_sign_fn(&k3, 3000.0).unwrap() < 0.0);
        assert!(matches!(
            kernel_sign_fn(&k4, 800.0),
            Err(SpecFunError::Overflow { .. })
        ));
        assert!(kernel_sign_fn(&k4, k4.sign_fn_limit()).is_ok());
        assert!(kernel_sign_fn(&k3, k3.sign_fn_limit()).is_ok());
    }

    #[test]
    fn sign_fn_agrees_with_kernel_sign() {
        for &m in &[0.1, 1.0, 2.0, 50.0] {
            for kind in [KernelKind::Phi3, KernelKind::Phi4] {
                let k = Kernel::new(kind, m).unwrap();
                for i in 0..=400 {
                    let t = 1e-8 * (500.0f64 / 1e-8).powf(i as f64 / 400.0);
                    if t > k.sign_fn_limit() {
                        break;
                    }
                    let a = kernel_eval(&k, t).unwrap();
                    let b = kernel_sign_fn(&k, t).unwrap();
                    if a != 0.0 && a.abs() > f64::MIN_POSITIVE {
                        assert_eq!(a.signum(), b.signum(), "{k} t={t}: {a} vs {b}");
                    }
                }
            }
        }
    }

    #[test]
    fn closed_form_values() {
        let k4 = Kernel::phi4(1.0).unwrap();
        // sinh(1) - (π²/6 - 1), 40-digit reference
        let expected = 0.530267126795575020409966683949575626;
        assert!(rel(closed_form(&k4, 1.0).unwrap(), expected) < 1e-14);

        let k3 = Kernel::phi3(1.0).unwrap();
        let sum = closed_form(&k3, 2.0).unwrap() + closed_form(&k4, 2.0).unwrap();
        let identity = (0.5f64).sinh() - (1.0f64 / 3.0).sinh();
        assert!((sum - identity).abs() < 1e-15);

        let vals: Vec<f64> = [1.0, 2.0, 4.0, 8.0]
            .iter()
            .map(|&x| closed_form(&k4, x).unwrap())
            .collect();
        assert!(vals.iter().all(|&v| v > 0.0));
        assert!(vals.windows(2).all(|w| w[1] < w[0]));

        assert!(matches!(closed_form(&k4, 0.0), Err(SpecFunError::Domain { .. })));
        assert!(matches!(
            closed_form(&k4, 1e-3),
            Err(SpecFunError::Overflow { .. })
        ));
    }

    #[test]
    fn kernel_param_validation() {
        assert!(KernelParam::new(0.0).is_err());
        assert!(KernelParam::new(-1.0).is_err());
        assert!(KernelParam::new(f64::NAN).is_err());
        assert!(KernelParam::new(f64::INFINITY).is_err());
        assert_eq!(KernelParam::new(2.5).unwrap().get(), 2.5);
    }

    proptest! {
        #[test]
        fn g_is_increasing_and_below_t_plus_one(t in 0.0f64..700.0, dt in 1e-6f64..5.0) {
            prop_assert!(g(t) <= t + 1.0);
            prop_assert!(g(t + dt) >= g(t));
        }

        #[test]
        fn s_series_at_least_one(m in 1e-3f64..100.0, t in 0.0f64..500.0) {
            prop_assert!(s_series(m, t).unwrap() >= 1.0);
        }

        #[test]
        fn phi4_sign_fn_nonnegative(m in 1e-2f64..50.0, t in 0.0f64..300.0) {
            prop_assert!(kernel_sign_fn(&Kernel::phi4(m).unwrap(), t).unwrap() >= 0.0);
        }
    }
}
