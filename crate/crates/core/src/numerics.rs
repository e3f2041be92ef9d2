//! Scalar and vector kernels shared by every solver.
//!
//! All reductions run in index-ascending order so results are reproducible
//! bit for bit.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use crate::error::{check_len, domain, Result};

/// Vector with strictly positive, finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct PositiveVector(Vec<f64>);

impl PositiveVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v > 0.0))
        {
            return Err(domain(format!("entry {i} = {v} is not strictly positive and finite")));
        }
        Ok(Self(values))
    }

    pub fn constant(len: usize, value: f64) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for PositiveVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for PositiveVector {
    type Error = crate::Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<PositiveVector> for Vec<f64> {
    fn from(v: PositiveVector) -> Vec<f64> {
        v.0
    }
}

/// Vector with finite entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct RealVector(Vec<f64>);

impl RealVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some((i, v)) = values.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(domain(format!("entry {i} = {v} is not finite")));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }
}

impl Deref for RealVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl TryFrom<Vec<f64>> for RealVector {
    type Error = crate::Error;
    fn try_from(values: Vec<f64>) -> Result<Self> {
        Self::new(values)
    }
}

impl From<RealVector> for Vec<f64> {
    fn from(v: RealVector) -> Vec<f64> {
        v.0
    }
}

/// `gamma * log(sum_j exp(s_j / gamma))`, evaluated with the max shifted out.
pub fn log_sum_exp(gamma: f64, s: &[f64]) -> Result<f64> {
    if !(gamma > 0.0) {
        return Err(domain(format!("gamma must be positive, got {gamma}")));
    }
    log_sum_exp_iter(gamma, s.iter().copied())
        .ok_or_else(|| domain("log_sum_exp of an empty vector"))
}

/// Two-pass max-shifted log-sum-exp over a cloneable iterator. Returns `None`
/// on empty input.
#[inline]
pub fn log_sum_exp_iter<I>(gamma: f64, terms: I) -> Option<f64>
where
    I: Iterator<Item = f64> + Clone,
{
    let max = terms.clone().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        // empty, or every term is -inf
        return if terms.clone().next().is_none() { None } else { Some(max) };
    }
    let sum: f64 = terms.map(|t| ((t - max) / gamma).exp()).sum();
    Some(gamma * sum.ln() + max)
}

/// Nonnegative root of `s^2 + t s - u = 0`.
///
/// For `t > 0` the rationalized form `2u / (sqrt(t^2 + 4u) + t)` is used; the
/// textbook form cancels catastrophically once `t^2 >> u`.
#[inline]
pub fn phi_root(t: f64, u: f64) -> f64 {
    let disc = t.hypot(2.0 * u.sqrt());
    if t > 0.0 {
        2.0 * u / (disc + t)
    } else {
        (disc - t) / 2.0
    }
}

/// Generalized KL divergence `sum x log(x/z) - x + z`.
pub fn kl_divergence(x: &PositiveVector, z: &PositiveVector) -> Result<f64> {
    kl_divergence_nonneg(x, z)
}

/// KL divergence allowing zero entries in `x` (with `0 log 0 = 0`).
pub fn kl_divergence_nonneg(x: &[f64], z: &[f64]) -> Result<f64> {
    check_len(z.len(), x.len())?;
    Ok(x.iter()
        .zip(z)
        .map(|(&xi, &zi)| {
            if xi == 0.0 {
                zi
            } else {
                xi * (xi / zi).ln() - xi + zi
            }
        })
        .sum())
}

/// Half the oscillation `(max v - min v) / 2`.
pub fn variation_seminorm(v: &[f64]) -> Result<f64> {
    if v.is_empty() {
        return Err(domain("variation seminorm of an empty vector"));
    }
    Ok(oscillation(v) / 2.0)
}

pub(crate) fn oscillation(v: &[f64]) -> f64 {
    let (lo, hi) = v
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    hi - lo
}

/// `log(sqrt(1 + m^2) + m)`, odd-symmetric and free of cancellation.
#[inline]
pub fn arsinh_stable(m: f64) -> f64 {
    if m < 0.0 {
        return -arsinh_stable(-m);
    }
    if m > 1e150 {
        return std::f64::consts::LN_2 + m.ln();
    }
    // log1p(m + m^2 / (1 + sqrt(1 + m^2))) = log(m + sqrt(1 + m^2))
    let root = 1.0_f64.hypot(m);
    (m + m * m / (1.0 + root)).ln_1p()
}

/// `arsinh(sign * exp(log_abs))` without forming `exp(log_abs)` when it would
/// overflow.
#[inline]
pub(crate) fn arsinh_from_log(negative: bool, log_abs: f64) -> f64 {
    let magnitude = if log_abs > 300.0 {
        std::f64::consts::LN_2 + log_abs
    } else {
        arsinh_stable(log_abs.exp())
    };
    if negative {
        -magnitude
    } else {
        magnitude
    }
}

pub(crate) fn l1_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

pub(crate) fn linf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn lse_examples() {
        let v = log_sum_exp(1.0, &[0.0, 0.0]).unwrap();
        assert!((v - std::f64::consts::LN_2).abs() < 1e-15);
        assert_eq!(log_sum_exp(2.0, &[-3.25]).unwrap(), -3.25);
        let big = log_sum_exp(0.01, &[1000.0, 0.0]).unwrap();
        assert!((big - 1000.0).abs() <= 1e-12);
        assert!(log_sum_exp(1.0, &[]).is_err());
        assert!(log_sum_exp(0.0, &[1.0]).is_err());
    }

    #[test]
    fn phi_examples() {
        assert_eq!(phi_root(0.0, 4.0), 2.0);
        assert_eq!(phi_root(3.0, 4.0), 1.0);
        assert_eq!(phi_root(-3.0, 4.0), 4.0);
        assert_eq!(phi_root(5.0, 0.0), 0.0);
    }

    #[test]
    fn phi_huge_positive_t() {
        // series oracle: phi(t, u) = u/t - u^2/t^3 + 2u^3/t^5 - ...
        let (t, u) = (1e30_f64, 1.0_f64);
        let oracle = u / t - u * u / (t * t * t);
        let s = phi_root(t, u);
        assert!(((s - oracle) / oracle).abs() <= 1e-12, "{s} vs {oracle}");
        // the direct form collapses to zero here
        let naive = ((t * t + 4.0 * u).sqrt() - t) / 2.0;
        assert_eq!(naive, 0.0);
    }

    #[test]
    fn kl_examples() {
        let z = PositiveVector::new(vec![0.3, 1.7, 4.0]).unwrap();
        assert_eq!(kl_divergence(&z, &z).unwrap(), 0.0);
        let two = PositiveVector::new(vec![2.0]).unwrap();
        let one = PositiveVector::new(vec![1.0]).unwrap();
        let v = kl_divergence(&two, &one).unwrap();
        assert!((v - (2.0 * 2f64.ln() - 1.0)).abs() < 1e-15);
        let short = PositiveVector::new(vec![1.0, 1.0]).unwrap();
        assert!(kl_divergence(&one, &short).is_err());
        assert_eq!(kl_divergence_nonneg(&[0.0, 1.0], &[0.5, 1.0]).unwrap(), 0.5);
    }

    #[test]
    fn pinsker_needs_the_heavier_mass() {
        // KL(p|q) >= |p-q|^2 / (2|p|) fails once q carries more mass than p
        let p = PositiveVector::new(vec![1.0]).unwrap();
        let q = PositiveVector::new(vec![3.0]).unwrap();
        let kl = kl_divergence(&p, &q).unwrap();
        assert!(kl < 4.0 / 2.0);
        assert!(kl >= 4.0 / (2.0 * 3.0));
    }

    #[test]
    fn seminorm_examples() {
        assert_eq!(variation_seminorm(&[1.0, 3.0, 5.0]).unwrap(), 2.0);
        assert_eq!(variation_seminorm(&[7.5; 4]).unwrap(), 0.0);
        assert_eq!(variation_seminorm(&[-2.0, 2.0]).unwrap(), 2.0);
        assert!(variation_seminorm(&[]).is_err());
    }

    #[test]
    fn arsinh_examples() {
        assert_eq!(arsinh_stable(0.0), 0.0);
        // oracle: arsinh(m) = log(2m) + 1/(4m^2) - 3/(32m^4) + ...
        let m = 1e8_f64;
        let oracle = (2.0 * m).ln() + 1.0 / (4.0 * m * m);
        assert!(((arsinh_stable(m) - oracle) / oracle).abs() <= 1e-12);
        // small arguments keep full relative precision
        let tiny = 1e-12;
        assert!(((arsinh_stable(tiny) - tiny) / tiny).abs() < 1e-12);
        assert!(arsinh_stable(1e300).is_finite());
        assert_eq!(arsinh_from_log(true, 800.0), -(std::f64::consts::LN_2 + 800.0));
    }

    #[test]
    fn vector_types_validate() {
        assert!(PositiveVector::new(vec![1.0, 0.0]).is_err());
        assert!(PositiveVector::new(vec![1.0, f64::NAN]).is_err());
        assert!(RealVector::new(vec![-1.0, f64::INFINITY]).is_err());
        let v: PositiveVector = serde_json::from_str("[0.5, 2]").unwrap();
        assert_eq!(v.as_slice(), &[0.5, 2.0]);
        assert!(serde_json::from_str::<PositiveVector>("[0.5, -2]").is_err());
    }

    proptest! {
        #[test]
        fn arsinh_is_odd(m in -1e6_f64..1e6) {
            prop_assert_eq!(arsinh_stable(-m), -arsinh_stable(m));
        }

        #[test]
        fn lse_shift_invariance(
            s in prop::collection::vec(-50.0_f64..50.0, 1..20),
            c in -100.0_f64..100.0,
            gamma in 0.01_f64..5.0,
        ) {
            let shifted: Vec<f64> = s.iter().map(|x| x + c).collect();
            let a = log_sum_exp(gamma, &s).unwrap();
            let b = log_sum_exp(gamma, &shifted).unwrap() - c;
            prop_assert!((a - b).abs() <= 1e-12, "{} vs {}", a, b);
        }

        #[test]
        fn seminorm_translation_invariance(
            v in prop::collection::vec(-1e3_f64..1e3, 1..30),
            c in -1e3_f64..1e3,
        ) {
            // shift by an exactly representable amount so the identity is exact
            let c = c.round();
            let shifted: Vec<f64> = v.iter().map(|x| x + c).collect();
            let a = variation_seminorm(&v).unwrap();
            let b = variation_seminorm(&shifted).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a));
        }

        #[test]
        fn kl_nonnegative(pairs in prop::collection::vec((1e-6_f64..1e3, 1e-6_f64..1e3), 1..10)) {
            let x = PositiveVector::new(pairs.iter().map(|p| p.0).collect()).unwrap();
            let z = PositiveVector::new(pairs.iter().map(|p| p.1).collect()).unwrap();
            prop_assert!(kl_divergence(&x, &z).unwrap() >= -1e-9);
        }
    }
}
