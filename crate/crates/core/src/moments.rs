//! Discrete signed measures and their exponential moments.
//!
//! A measure `μ = Σ wᵢ δ_{tᵢ}` on `[0, ∞)` has exponential moments
//! `cₙ = Σ wᵢ e^{-n tᵢ}`. Under `s = e^{-t}` these become the power moments
//! `Σ wᵢ sᵢⁿ` of the push-forward measure on `(0, 1]`, so everything known
//! about Hausdorff moment sequences applies: forward differences, total
//! monotonicity and Bernstein-polynomial reconstruction of the distribution
//! function.

use std::fmt::Write as _;
use std::str::FromStr;

use num::{BigInt, BigRational, ToPrimitive, Zero};
use serde::Serialize;
use thiserror::Error;

use crate::format::sig17;

/// Largest order for which binomial coefficients are tabulated.
pub const MAX_DIFFERENCE_ORDER: usize = 60;

/// Scale of the moment-equality test in [`first_differing_moment`].
pub const MOMENT_EQUALITY_TOL: f64 = 1e-12;

/// Scale of the positivity test in [`is_totally_monotone`].
pub const TOTAL_MONOTONE_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MomentsError {
    #[error("invalid atom ({location}, {weight}): {reason}")]
    InvalidAtom {
        location: f64,
        weight: f64,
        reason: &'static str,
    },
    #[error("order {given} is below the required {required}")]
    OrderTooSmall { required: usize, given: usize },
    #[error("index out of range: {0}")]
    Index(String),
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid indicator profile: {0}")]
    InvalidProfile(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Atom {
    pub location: f64,
    pub weight: f64,
}

/// Finitely many atoms at strictly increasing nonnegative locations, all with
/// nonzero weight. The empty list is the zero measure.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct DiscreteSignedMeasure {
    atoms: Vec<Atom>,
}

impl DiscreteSignedMeasure {
    /// Sorts the atoms, merges equal locations by adding their weights and
    /// drops the ones whose weight ends up zero.
    pub fn new<I>(atoms: I) -> Result<Self, MomentsError>
    where
        I: IntoIterator<Item = (f64, f64)>,
    {
        let mut raw: Vec<Atom> = Vec::new();
        for (location, weight) in atoms {
            let reason = if !location.is_finite() || !weight.is_finite() {
                Some("not finite")
            } else if location < 0.0 {
                Some("negative location")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(MomentsError::InvalidAtom {
                    location,
                    weight,
                    reason,
                });
            }
            // -0.0 and 0.0 are the same location.
            raw.push(Atom {
                location: location + 0.0,
                weight,
            });
        }
        raw.sort_by(|a, b| a.location.total_cmp(&b.location));

        let mut atoms: Vec<Atom> = Vec::with_capacity(raw.len());
        for a in raw {
            match atoms.last_mut() {
                Some(last) if last.location == a.location => last.weight += a.weight,
                _ => atoms.push(a),
            }
        }
        atoms.retain(|a| a.weight != 0.0);
        Ok(Self { atoms })
    }

    pub fn zero() -> Self {
        Self::default()
    }

    /// `δ_t` scaled by `w`.
    pub fn point(t: f64, w: f64) -> Result<Self, MomentsError> {
        Self::new([(t, w)])
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `|μ|([0, ∞)) = Σ |wᵢ|`.
    pub fn total_variation(&self) -> f64 {
        self.atoms.iter().map(|a| a.weight.abs()).sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.atoms.iter().all(|a| a.weight > 0.0)
    }

    /// `μ([a, b])`.
    pub fn mass_in(&self, a: f64, b: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|at| a <= at.location && at.location <= b)
            .map(|at| at.weight)
            .sum()
    }

    /// `μ([0, x])`, the distribution function.
    pub fn cdf(&self, x: f64) -> f64 {
        self.atoms
            .iter()
            .filter(|at| at.location <= x)
            .map(|at| at.weight)
            .sum()
    }

    /// One `t w` pair per line.
    pub fn to_text(&self) -> String {
        let mut out = String::from("# location weight\n");
        for a in &self.atoms {
            let _ = writeln!(out, "{} {}", a.location, a.weight);
        }
        out
    }
}

impl FromStr for DiscreteSignedMeasure {
    type Err = MomentsError;

    /// Parses one `t w` pair per line; `#` starts a comment, blank lines are skipped.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut pairs = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| MomentsError::Parse {
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split_whitespace().collect();
            if fields.len() != 2 {
                return Err(parse_err(format!(
                    "expected `t w`, found {} field(s)",
                    fields.len()
                )));
            }
            let num = |s: &str| {
                s.parse::<f64>()
                    .map_err(|e| parse_err(format!("`{s}`: {e}")))
            };
            pairs.push((num(fields[0])?, num(fields[1])?));
        }
        Self::new(pairs).map_err(|e| MomentsError::Parse {
            line: 0,
            message: e.to_string(),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum MomentDomain {
    /// `cₙ = ∫ e^{-nt} dμ(t)` on `[0, ∞)`.
    ExponentialT,
    /// `cₙ = ∫ sⁿ dμ(s)` on `(0, 1]`.
    HausdorffS,
}

/// Moments `c₀..c_N`.
///
/// Sequences computed from a measure also keep its atoms in the `s`
/// variable (for exponential moments, `sᵢ = e^{-tᵢ}` rounded).
/// Reconstruction is badly conditioned in the moments but well conditioned in
/// the locations, so it uses the exact moments `Σ wᵢ sᵢⁿ` of these atoms when
/// present.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MomentSequence {
    pub values: Vec<f64>,
    pub domain: MomentDomain,
    #[serde(skip)]
    source: Option<Vec<(f64, f64)>>,
}

impl MomentSequence {
    pub fn new(values: Vec<f64>, domain: MomentDomain) -> Self {
        Self {
            values,
            domain,
            source: None,
        }
    }

    pub fn has_source(&self) -> bool {
        self.source.is_some()
    }

    /// Highest order `N` held.
    pub fn max_order(&self) -> Option<usize> {
        self.values.len().checked_sub(1)
    }

    /// CSV with header `n,c_n`.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("n,c_n\n");
        for (n, c) in self.values.iter().enumerate() {
            let _ = writeln!(out, "{n},{}", sig17(*c));
        }
        out
    }
}

/// `cₙ = Σ wᵢ e^{-n tᵢ}` for `n = 0..=max_order`.
pub fn exp_moments(mu: &DiscreteSignedMeasure, max_order: usize) -> MomentSequence {
    let values = (0..=max_order)
        .map(|n| {
            mu.atoms
                .iter()
                .map(|a| a.weight * (-(n as f64) * a.location).exp())
                .sum()
        })
        .collect();
    MomentSequence {
        values,
        domain: MomentDomain::ExponentialT,
        source: Some(
            mu.atoms
                .iter()
                .map(|a| ((-a.location).exp(), a.weight))
                .collect(),
        ),
    }
}

/// `cₙ = Σ wᵢ sᵢⁿ` for a measure given in the `s` variable.
pub fn power_moments(mu_s: &DiscreteSignedMeasure, max_order: usize) -> MomentSequence {
    let values = (0..=max_order)
        .map(|n| {
            mu_s.atoms
                .iter()
                .map(|a| a.weight * a.location.powi(n as i32))
                .sum()
        })
        .collect();
    MomentSequence {
        values,
        domain: MomentDomain::HausdorffS,
        source: Some(mu_s.atoms.iter().map(|a| (a.location, a.weight)).collect()),
    }
}

/// Exact sum of dyadic rationals `mantissa · 2^exponent`.
#[derive(Default)]
struct DyadicSum {
    terms: Vec<(BigInt, i64)>,
}

impl DyadicSum {
    fn decode(v: f64) -> (BigInt, i64) {
        let (mantissa, exponent, sign) = num::Float::integer_decode(v);
        let m = BigInt::from(mantissa);
        (if sign < 0 { -m } else { m }, exponent as i64)
    }

    fn push(&mut self, mantissa: BigInt, exponent: i64) {
        if !mantissa.is_zero() {
            self.terms.push((mantissa, exponent));
        }
    }

    /// Correctly rounded value of the sum.
    fn to_f64(&self) -> Option<f64> {
        let Some(low) = self.terms.iter().map(|t| t.1).min() else {
            return Some(0.0);
        };
        let mut total = BigInt::zero();
        for (m, e) in &self.terms {
            total += m << (e - low) as usize;
        }
        let value = if low >= 0 {
            BigRational::from_integer(total << low as usize)
        } else {
            BigRational::new(total, BigInt::from(1) << (-low) as usize)
        };
        value.to_f64()
    }
}

/// Image of `μ` under `t ↦ e^{-t}`: each atom `(t, w)` moves to `(e^{-t}, w)`.
pub fn pushforward(mu: &DiscreteSignedMeasure) -> DiscreteSignedMeasure {
    DiscreteSignedMeasure::new(mu.atoms.iter().map(|a| ((-a.location).exp(), a.weight)))
        .expect("e^{-t} of a finite nonnegative t is a valid location")
}

/// Smallest `n ≤ max_order` with `|cₙ(μ) - cₙ(ν)| > 1e-12 (M_μ + M_ν)`.
///
/// Two measures with `k` atoms between them that agree on `c₀, …, c_{k-1}`
/// are equal (the Vandermonde matrix on distinct nodes is invertible), so
/// `max_order` must be at least the combined atom count.
pub fn first_differing_moment(
    mu: &DiscreteSignedMeasure,
    nu: &DiscreteSignedMeasure,
    max_order: usize,
) -> Result<Option<usize>, MomentsError> {
    let required = mu.len() + nu.len();
    if max_order < required {
        return Err(MomentsError::OrderTooSmall {
            required,
            given: max_order,
        });
    }
    let tol = MOMENT_EQUALITY_TOL * (mu.total_variation() + nu.total_variation());
    let a = exp_moments(mu, max_order);
    let b = exp_moments(nu, max_order);
    Ok(a
        .values
        .iter()
        .zip(&b.values)
        .position(|(x, y)| (x - y).abs() > tol))
}

/// Exact `C(n, k)` for `n ≤ 60` (fits in `u64`).
pub fn binomial(n: usize, k: usize) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u64 = 1;
    for i in 0..k {
        // Exact at each step: c·(n-i) is divisible by (i+1).
        c = c * (n - i) as u64 / (i + 1) as u64;
    }
    c
}

fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (l, r) = v.split_at(v.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

fn check_indices(c: &MomentSequence, n: usize, k: usize) -> Result<(), MomentsError> {
    if k > n {
        return Err(MomentsError::Index(format!("k = {k} exceeds n = {n}")));
    }
    if n >= c.values.len() {
        return Err(MomentsError::Index(format!(
            "n = {n} beyond the {} stored moments",
            c.values.len()
        )));
    }
    if n - k > MAX_DIFFERENCE_ORDER {
        return Err(MomentsError::Index(format!(
            "difference order {} exceeds {MAX_DIFFERENCE_ORDER}",
            n - k
        )));
    }
    Ok(())
}

/// `(-1)^{n-k} Δ^{n-k} c_k = Σ_j (-1)^j C(n-k, j) c_{k+j}`.
///
/// For Hausdorff moments this is `∫ s^k (1-s)^{n-k} dμ(s)`.
pub fn hausdorff_differences(c: &MomentSequence, n: usize, k: usize) -> Result<f64, MomentsError> {
    check_indices(c, n, k)?;
    let r = n - k;
    let terms: Vec<f64> = (0..=r)
        .map(|j| {
            let t = binomial(r, j) as f64 * c.values[k + j];
            if j % 2 == 0 {
                t
            } else {
                -t
            }
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Roundoff allowance for [`hausdorff_differences`]: a small multiple of
/// `eps · Σ_j C(n-k, j) |c_{k+j}|`, covering both the summation and the
/// rounding already present in the moments.
pub fn difference_error_bound(c: &MomentSequence, n: usize, k: usize) -> Result<f64, MomentsError> {
    check_indices(c, n, k)?;
    let r = n - k;
    let scale: f64 = (0..=r)
        .map(|j| binomial(r, j) as f64 * c.values[k + j].abs())
        .sum();
    let depth = (r as f64 + 1.0).log2().ceil() + 1.0;
    Ok(8.0 * depth * f64::EPSILON * scale)
}

/// A violating pair `(n, k)` of the total-monotonicity conditions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Witness {
    pub n: usize,
    pub k: usize,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TotalMonotonicity {
    pub holds: bool,
    pub witness: Option<Witness>,
}

/// Checks `(-1)^{n-k} Δ^{n-k} c_k ≥ -tol` for all `0 ≤ k ≤ n ≤ max_order`,
/// the Hausdorff condition for `c` to be the moment sequence of a
/// nonnegative measure.
///
/// `tol` is `1e-12·|c₀|` plus [`difference_error_bound`]. The first violation
/// in `(n, k)` lexicographic order is returned as the witness.
pub fn is_totally_monotone(
    c: &MomentSequence,
    max_order: usize,
) -> Result<TotalMonotonicity, MomentsError> {
    if max_order >= c.values.len() {
        return Err(MomentsError::Index(format!(
            "order {max_order} beyond the {} stored moments",
            c.values.len()
        )));
    }
    let base = TOTAL_MONOTONE_TOL * c.values[0].abs();
    for n in 0..=max_order {
        for k in 0..=n {
            let value = hausdorff_differences(c, n, k)?;
            let tolerance = base + difference_error_bound(c, n, k)?;
            if value < -tolerance {
                return Ok(TotalMonotonicity {
                    holds: false,
                    witness: Some(Witness {
                        n,
                        k,
                        value,
                        tolerance,
                    }),
                });
            }
        }
    }
    Ok(TotalMonotonicity {
        holds: true,
        witness: None,
    })
}

/// Bernstein-type reconstruction of the distribution function of the measure
/// on `(0, 1]` with moments `c`:
/// `Σ_{k ≤ K} C(n, k) (-1)^{n-k} Δ^{n-k} c_k` with `K = ⌊n x⌋`.
///
/// Evaluated as the equivalent `c₀ + Σ_{m > K} (-1)^{m-K} C(n, m) C(m-1, K) c_m`
/// in exact rational arithmetic and rounded once, so `x = 1` returns `c₀`
/// exactly. Exact moments of the source atoms are used when `c` carries them.
pub fn reconstruct_cdf(c: &MomentSequence, n: usize, x: f64) -> Result<f64, MomentsError> {
    if n >= c.values.len() {
        return Err(MomentsError::Index(format!(
            "order {n} beyond the {} stored moments",
            c.values.len()
        )));
    }
    if n > MAX_DIFFERENCE_ORDER {
        return Err(MomentsError::Index(format!(
            "order {n} exceeds {MAX_DIFFERENCE_ORDER}"
        )));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(MomentsError::InvalidArgument(format!("x = {x} outside [0, 1]")));
    }
    if let Some(v) = c.values[..=n].iter().find(|v| !v.is_finite()) {
        return Err(MomentsError::InvalidArgument(format!("moment {v} is not finite")));
    }
    let upper = ((n as f64 * x).floor() as usize).min(n);

    let mut total = DyadicSum::default();
    let (m0, e0) = DyadicSum::decode(c.values[0]);
    total.push(m0, e0);
    let decoded: Option<Vec<_>> = c.source.as_ref().map(|atoms| {
        atoms
            .iter()
            .map(|&(s, w)| (DyadicSum::decode(s), DyadicSum::decode(w)))
            .collect()
    });
    for m in upper + 1..=n {
        let mut coeff = BigInt::from(binomial(n, m)) * BigInt::from(binomial(m - 1, upper));
        if (m - upper) % 2 == 1 {
            coeff = -coeff;
        }
        match &decoded {
            Some(atoms) => {
                for ((sm, se), (wm, we)) in atoms {
                    total.push(&coeff * wm * num::pow(sm.clone(), m), we + se * m as i64);
                }
            }
            None => {
                let (cm, ce) = DyadicSum::decode(c.values[m]);
                total.push(coeff * cm, ce);
            }
        }
    }
    total
        .to_f64()
        .ok_or_else(|| MomentsError::InvalidArgument("reconstruction overflows".into()))
}

/// The continuous piecewise-linear bump `I_δ`: `0` off `[a-δ, b+δ]`, `1` on
/// `[a, b]`, linear on the two ramps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct IndicatorProfile {
    a: f64,
    b: f64,
    delta: f64,
}

impl IndicatorProfile {
    /// Requires `0 < a ≤ b ≤ 1`, `δ > 0` and `a - δ > 0`.
    pub fn new(a: f64, b: f64, delta: f64) -> Result<Self, MomentsError> {
        if !(a > 0.0 && a <= b && b <= 1.0) {
            return Err(MomentsError::InvalidProfile(format!(
                "need 0 < a <= b <= 1, got a = {a}, b = {b}"
            )));
        }
        if !(delta > 0.0 && a - delta > 0.0) {
            return Err(MomentsError::InvalidProfile(format!(
                "need 0 < delta < a, got delta = {delta}"
            )));
        }
        Ok(Self { a, b, delta })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn eval(&self, s: f64) -> f64 {
        let Self { a, b, delta } = *self;
        if a <= s && s <= b {
            1.0
        } else if a - delta <= s && s < a {
            (s - (a - delta)) / delta
        } else if b < s && s <= b + delta {
            (b + delta - s) / delta
        } else {
            0.0
        }
    }
}

/// `∫ I_δ dμ_s = Σ wᵢ I_δ(sᵢ)`.
pub fn integrate_indicator(mu_s: &DiscreteSignedMeasure, profile: &IndicatorProfile) -> f64 {
    mu_s.atoms
        .iter()
        .map(|a| a.weight * profile.eval(a.location))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use num::{One, Signed};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::f64::consts::LN_2;

    fn measure(pairs: &[(f64, f64)]) -> DiscreteSignedMeasure {
        DiscreteSignedMeasure::new(pairs.iter().copied()).unwrap()
    }

    /// `Σ_j (-1)^j C(r, j) c_{k+j}` over the exact rational values of `c`.
    fn exact_difference(c: &[f64], n: usize, k: usize) -> BigRational {
        let r = n - k;
        let mut binom = BigInt::one();
        let mut acc = BigRational::zero();
        for j in 0..=r {
            let v = BigRational::from_float(c[k + j]).unwrap()
                * BigRational::from_integer(binom.clone());
            if j % 2 == 0 {
                acc += v;
            } else {
                acc -= v;
            }
            binom = binom * BigInt::from(r - j) / BigInt::from(j + 1);
        }
        acc
    }

    #[test]
    fn constructor_sorts_merges_and_drops() {
        let m = measure(&[(2.0, 1.0), (0.5, 3.0), (2.0, -1.0), (1.0, 0.0), (0.5, 1.0)]);
        assert_eq!(
            m.atoms(),
            &[Atom {
                location: 0.5,
                weight: 4.0
            }]
        );
        assert!(DiscreteSignedMeasure::new([(-1.0, 1.0)]).is_err());
        assert!(DiscreteSignedMeasure::new([(f64::NAN, 1.0)]).is_err());
        assert!(DiscreteSignedMeasure::new([(1.0, f64::INFINITY)]).is_err());
        assert!(DiscreteSignedMeasure::zero().is_empty());
        assert_eq!(measure(&[(1.0, 2.0), (3.0, -5.0)]).total_variation(), 7.0);
    }

    #[test]
    fn exp_moment_examples() {
        let c = exp_moments(&measure(&[(0.0, 1.0)]), 10);
        assert!(c.values.iter().all(|&v| v == 1.0));
        assert_eq!(c.domain, MomentDomain::ExponentialT);

        let c = exp_moments(&measure(&[(LN_2, 1.0)]), 10);
        for (n, v) in c.values.iter().enumerate() {
            assert!((v - 0.5f64.powi(n as i32)).abs() < 1e-15);
        }
        let c = exp_moments(&measure(&[(0.0, 1.0), (LN_2, -1.0)]), 10);
        for (n, v) in c.values.iter().enumerate() {
            assert!((v - (1.0 - 0.5f64.powi(n as i32))).abs() < 1e-15);
        }
    }

    #[test]
    fn moments_of_nonnegative_measure_are_bounded_by_c0() {
        let c = exp_moments(&measure(&[(0.1, 1.0), (2.0, 0.3), (4.0, 2.0)]), 30);
        assert!(c.values.iter().all(|v| v.abs() <= c.values[0]));
    }

    #[test]
    fn pushforward_examples() {
        assert_eq!(pushforward(&measure(&[(0.0, 1.0)])), measure(&[(1.0, 1.0)]));
        let p = pushforward(&measure(&[(LN_2, 3.0)]));
        assert!((p.atoms()[0].location - 0.5).abs() < 1e-16);
        assert_eq!(p.atoms()[0].weight, 3.0);
        let mu = measure(&[(0.0, 1.0), (1.0, -2.5), (3.0, 0.25)]);
        assert_eq!(pushforward(&mu).total_variation(), mu.total_variation());
    }

    #[test]
    fn first_differing_examples() {
        let d0 = measure(&[(0.0, 1.0)]);
        let dl = measure(&[(LN_2, 1.0)]);
        assert_eq!(first_differing_moment(&d0, &dl, 16).unwrap(), Some(1));
        assert_eq!(first_differing_moment(&d0, &d0.clone(), 16).unwrap(), None);
        assert!(matches!(
            first_differing_moment(&d0, &dl, 1),
            Err(MomentsError::OrderTooSmall { required: 2, given: 1 })
        ));
        let zero = DiscreteSignedMeasure::zero();
        assert_eq!(first_differing_moment(&zero, &zero, 0).unwrap(), None);
    }

    fn random_measure(rng: &mut ChaCha8Rng, max_atoms: usize) -> DiscreteSignedMeasure {
        let k = rng.gen_range(1..=max_atoms);
        let pairs: Vec<(f64, f64)> = (0..k)
            .map(|_| {
                let w = loop {
                    let w: f64 = rng.gen_range(-3.0..3.0);
                    if w.abs() > 1e-3 {
                        break w;
                    }
                };
                (rng.gen_range(0.0..5.0), w)
            })
            .collect();
        DiscreteSignedMeasure::new(pairs).unwrap()
    }

    #[test]
    fn distinct_measures_differ_early() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for _ in 0..100 {
            let mu = random_measure(&mut rng, 6);
            let nu = random_measure(&mut rng, 6);
            let n = first_differing_moment(&mu, &nu, 12).unwrap();
            assert!(matches!(n, Some(n) if n < 12), "{mu:?} {nu:?}");
        }
    }

    #[test]
    fn differences_of_constant_and_geometric() {
        let ones = MomentSequence::new(vec![1.0; 11], MomentDomain::HausdorffS);
        for n in 0..=10 {
            for k in 0..=n {
                let d = hausdorff_differences(&ones, n, k).unwrap();
                assert_eq!(d, if n == k { 1.0 } else { 0.0 });
            }
        }
        let geo = MomentSequence::new(
            (0..=10).map(|n| 0.5f64.powi(n)).collect(),
            MomentDomain::HausdorffS,
        );
        for n in 0..=10 {
            for k in 0..=n {
                // ∫ s^k (1-s)^{n-k} dδ_{1/2} = 2^{-n}
                let exact = exact_difference(&geo.values, n, k);
                assert_eq!(exact, BigRational::from_float(0.5f64.powi(n as i32)).unwrap());
                assert_eq!(hausdorff_differences(&geo, n, k).unwrap(), 0.5f64.powi(n as i32));
            }
        }
        assert!(hausdorff_differences(&geo, 11, 0).is_err());
        assert!(hausdorff_differences(&geo, 3, 4).is_err());
    }

    #[test]
    fn differences_match_exact_oracle_for_signed_measure() {
        let c = power_moments(&measure(&[(1.0, 1.0), (0.5, -1.0)]), 10);
        for n in 0..=10 {
            for k in 0..=n {
                let exact = exact_difference(&c.values, n, k).to_f64().unwrap();
                let got = hausdorff_differences(&c, n, k).unwrap();
                assert!((got - exact).abs() <= difference_error_bound(&c, n, k).unwrap());
            }
        }
    }

    #[test]
    fn total_monotonicity_examples() {
        let pos = power_moments(&measure(&[(0.3, 1.0), (0.9, 2.0)]), 20);
        assert!(is_totally_monotone(&pos, 20).unwrap().holds);

        let signed = power_moments(&measure(&[(0.3, 1.0), (0.9, -2.0)]), 20);
        let r = is_totally_monotone(&signed, 20).unwrap();
        assert!(!r.holds);
        let w = r.witness.unwrap();
        assert!(exact_difference(&signed.values, w.n, w.k).is_negative());

        // c₀ > 0, but c₁ = 0.6 - 0.9 < 0.
        let subtle = power_moments(&measure(&[(0.3, 2.0), (0.9, -1.0)]), 20);
        let w = is_totally_monotone(&subtle, 20).unwrap().witness.unwrap();
        assert_eq!((w.n, w.k), (1, 1));

        let ones = MomentSequence::new(vec![1.0; 21], MomentDomain::HausdorffS);
        assert!(is_totally_monotone(&ones, 20).unwrap().holds);
        assert!(is_totally_monotone(&ones, 21).is_err());
    }

    #[test]
    fn reconstruction_examples() {
        let c = power_moments(&measure(&[(0.5, 1.0)]), 40);
        assert!((reconstruct_cdf(&c, 40, 0.75).unwrap() - 1.0).abs() < 0.05);
        assert!(reconstruct_cdf(&c, 40, 0.25).unwrap().abs() < 0.05);

        let zero = power_moments(&DiscreteSignedMeasure::zero(), 40);
        for &x in &[0.0, 0.3, 1.0] {
            assert_eq!(reconstruct_cdf(&zero, 40, x).unwrap(), 0.0);
        }

        let two = power_moments(&measure(&[(0.25, 1.0), (0.75, 1.0)]), 60);
        assert!((reconstruct_cdf(&two, 60, 0.5).unwrap() - 1.0).abs() < 0.1);

        let mixed = exp_moments(&measure(&[(0.05, 0.7), (1.3, -0.2), (2.0, 1.1)]), 40);
        for n in 1..=40 {
            assert_eq!(reconstruct_cdf(&mixed, n, 1.0).unwrap(), mixed.values[0]);
        }
        assert!(reconstruct_cdf(&mixed, 41, 0.5).is_err());
        assert!(reconstruct_cdf(&mixed, 10, 1.5).is_err());
    }

    #[test]
    fn reconstruction_matches_double_sum_oracle() {
        let mu = measure(&[(0.1, 0.5), (0.35, -0.25), (0.8, 1.5)]);
        for &n in &[1usize, 5, 12, 20] {
            // Both sides on the rounded moment values.
            let c = MomentSequence::new(power_moments(&mu, n).values, MomentDomain::HausdorffS);
            for &x in &[0.0, 0.2, 0.5, 0.77, 1.0] {
                let upper = (n as f64 * x).floor() as usize;
                let mut oracle = BigRational::zero();
                for k in 0..=upper {
                    oracle += exact_difference(&c.values, n, k)
                        * BigRational::from_integer(BigInt::from(binomial(n, k)));
                }
                assert_eq!(reconstruct_cdf(&c, n, x).unwrap(), oracle.to_f64().unwrap());
            }
        }
    }

    #[test]
    fn exact_moments_tame_conditioning() {
        let mu = measure(&[(0.25, 1.0), (0.75, 1.0)]);
        let c = power_moments(&mu, 60);
        assert!(c.has_source());
        let rounded = MomentSequence::new(c.values.clone(), MomentDomain::HausdorffS);
        let good = reconstruct_cdf(&c, 60, 0.5).unwrap();
        let bad = reconstruct_cdf(&rounded, 60, 0.5).unwrap();
        assert!((good - 1.0).abs() < 1e-3);
        assert!((bad - 1.0).abs() > 1.0);
    }

    #[test]
    fn indicator_examples() {
        let prof = IndicatorProfile::new(0.4, 0.6, 0.05).unwrap();
        assert_eq!(integrate_indicator(&measure(&[(0.5, 2.0)]), &prof), 2.0);
        let ramp = integrate_indicator(&measure(&[(0.38, 1.0)]), &prof);
        assert!((ramp - 0.6).abs() < 1e-12);
        assert!((prof.eval(0.63) - 0.4).abs() < 1e-12);
        assert_eq!(prof.eval(0.7), 0.0);
        assert_eq!(prof.eval(0.3), 0.0);
        assert_eq!(prof.eval(0.4), 1.0);
        assert_eq!(prof.eval(0.6), 1.0);

        assert!(IndicatorProfile::new(0.0, 0.5, 0.01).is_err());
        assert!(IndicatorProfile::new(0.5, 0.4, 0.01).is_err());
        assert!(IndicatorProfile::new(0.4, 1.1, 0.01).is_err());
        assert!(IndicatorProfile::new(0.4, 0.5, 0.4).is_err());
    }

    #[test]
    fn indicator_limit_is_interval_mass() {
        let mu = measure(&[(0.2, 1.0), (0.45, -2.0), (0.5, 3.0), (0.61, 0.5), (0.9, 4.0)]);
        let mut delta = 1e-2;
        while delta > 1e-7 {
            let prof = IndicatorProfile::new(0.45, 0.6, delta).unwrap();
            if delta < 0.01 {
                assert_eq!(integrate_indicator(&mu, &prof), mu.mass_in(0.45, 0.6));
            }
            delta /= 2.0;
        }
    }

    #[test]
    fn text_format_roundtrip_and_errors() {
        let text = "# weights\n0 1.5\n\n0.6931471805599453   -2 # ln 2\n";
        let m: DiscreteSignedMeasure = text.parse().unwrap();
        assert_eq!(m.len(), 2);
        assert_eq!(m.to_text().parse::<DiscreteSignedMeasure>().unwrap(), m);

        let err = "0 1\n1 2 3\n".parse::<DiscreteSignedMeasure>().unwrap_err();
        assert!(matches!(err, MomentsError::Parse { line: 2, .. }));
        let err = "0 abc\n".parse::<DiscreteSignedMeasure>().unwrap_err();
        assert!(matches!(err, MomentsError::Parse { line: 1, .. }));
        assert!("-1 1\n".parse::<DiscreteSignedMeasure>().is_err());
    }

    #[test]
    fn moments_csv() {
        let c = exp_moments(&measure(&[(LN_2, 1.0)]), 2);
        assert_eq!(
            c.to_csv(),
            "n,c_n\n0,1.0000000000000000e0\n1,5.0000000000000000e-1\n2,2.5000000000000000e-1\n"
        );
    }

    #[test]
    fn binomials_are_exact() {
        assert_eq!(binomial(60, 30), 118_264_581_564_861_424);
        assert_eq!(binomial(10, 3), 120);
        assert_eq!(binomial(5, 6), 0);
        let mut row = vec![1u64];
        for n in 1..=60 {
            let mut next = vec![1u64; n + 1];
            for k in 1..n {
                next[k] = row[k - 1] + row[k];
            }
            row = next;
            for (k, &v) in row.iter().enumerate() {
                assert_eq!(binomial(n, k), v);
            }
        }
    }

    fn arb_measure() -> impl Strategy<Value = DiscreteSignedMeasure> {
        prop::collection::vec((0.0f64..8.0, -3.0f64..3.0), 0..8)
            .prop_map(|pairs| DiscreteSignedMeasure::new(pairs).unwrap())
    }

    proptest! {
        #[test]
        fn change_of_variables(mu in arb_measure()) {
            let n_max = 50;
            let a = exp_moments(&mu, n_max);
            let b = power_moments(&pushforward(&mu), n_max);
            let tv = mu.total_variation();
            for n in 0..=n_max {
                // s = e^{-t} carries half an ulp, raised to the n-th power.
                let tol = (n as f64 + 2.0) * f64::EPSILON * tv;
                prop_assert!((a.values[n] - b.values[n]).abs() <= tol, "n={}", n);
            }
        }

        #[test]
        fn nonnegative_measures_are_totally_monotone(
            pairs in prop::collection::vec((0.0f64..5.0, 0.01f64..3.0), 1..7)
        ) {
            let mu = DiscreteSignedMeasure::new(pairs).unwrap();
            let c = exp_moments(&mu, 20);
            prop_assert!(is_totally_monotone(&c, 20).unwrap().holds);
        }

        #[test]
        fn reconstruction_total_mass(mu in arb_measure(), n in 1usize..40) {
            let c = exp_moments(&mu, n);
            prop_assert_eq!(reconstruct_cdf(&c, n, 1.0).unwrap(), c.values[0]);
        }
    }
}
