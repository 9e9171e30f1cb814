//! Significands, significant digits, Benford probabilities and fit statistics.

use std::f64::consts::LN_10;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::numerics::{frac, split_sum};

/// χ² critical value with 8 degrees of freedom at α = 0.05.
pub const CHI2_CRIT_05: f64 = 15.507;
/// χ² critical value with 8 degrees of freedom at α = 0.01.
pub const CHI2_CRIT_01: f64 = 20.090;
/// Relative nudge applied before digit truncation.
pub const DIGIT_GUARD: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SignificandError {
    #[error("significand of zero is undefined")]
    ZeroInput,
    #[error("non-finite input {0}")]
    NonFinite(f64),
    #[error("digit {0} out of range")]
    InvalidDigit(u8),
    #[error("leading digit must be 1..=9")]
    LeadingZero,
    #[error("empty digit string")]
    NoDigits,
    #[error("empty sample")]
    EmptySample,
}

/// `log₁₀|x|` stored as `characteristic + mantissa` with mantissa in `[0, 1)`.
///
/// Keeps full mantissa precision for magnitudes far outside the `f64` range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LogValue {
    characteristic: i64,
    mantissa: f64,
}

impl LogValue {
    pub fn from_parts(characteristic: i64, mantissa: f64) -> Self {
        let (k, m) = split_sum(mantissa, 0.0);
        Self {
            characteristic: characteristic + k,
            mantissa: m,
        }
    }

    pub fn from_log10(l: f64) -> Self {
        let (k, m) = split_sum(l, 0.0);
        Self {
            characteristic: k,
            mantissa: m,
        }
    }

    /// `log₁₀|x|`, or `None` for zero and non-finite `x`.
    pub fn of(x: f64) -> Option<Self> {
        if x == 0.0 || !x.is_finite() {
            return None;
        }
        Some(Self::from_log10(x.abs().log10()))
    }

    pub fn characteristic(&self) -> i64 {
        self.characteristic
    }

    pub fn mantissa(&self) -> f64 {
        self.mantissa
    }

    /// `characteristic + mantissa` as one float (loses mantissa bits when large).
    pub fn value(&self) -> f64 {
        self.characteristic as f64 + self.mantissa
    }

    pub fn significand(&self) -> f64 {
        significand_of_mantissa(self.mantissa)
    }

    pub fn first_digit(&self) -> u8 {
        nth_digit_of_significand(self.significand(), 1)
    }
}

fn significand_of_mantissa(m: f64) -> f64 {
    let s = 10f64.powf(m);
    if s >= 10.0 {
        10f64.next_down()
    } else {
        s.max(1.0)
    }
}

/// `S(x) ∈ [1, 10)` with `|x| = 10^k · S(x)`.
pub fn significand(x: f64) -> Result<f64, SignificandError> {
    if x == 0.0 {
        return Err(SignificandError::ZeroInput);
    }
    if !x.is_finite() {
        return Err(SignificandError::NonFinite(x));
    }
    let a = x.abs();
    let mut k = a.log10().floor() as i32;
    let mut s = scale_by_pow10(a, -k);
    // log10 may be off by one next to powers of ten.
    if s >= 10.0 {
        k += 1;
        s = scale_by_pow10(a, -k);
    } else if s < 1.0 {
        k -= 1;
        s = scale_by_pow10(a, -k);
    }
    Ok(s.clamp(1.0, 10f64.next_down()))
}

// a · 10^e, split so neither factor leaves the normal range.
fn scale_by_pow10(a: f64, e: i32) -> f64 {
    if e == 0 {
        a
    } else if e.abs() <= 22 {
        if e > 0 {
            a * 10f64.powi(e)
        } else {
            a / 10f64.powi(-e)
        }
    } else {
        let half = e / 2;
        scale_by_pow10(scale_by_pow10(a, half), e - half)
    }
}

/// `10^(L mod 1)` for `L = log₁₀|x|`.
pub fn significand_from_log(l: f64) -> Result<f64, SignificandError> {
    if !l.is_finite() {
        return Err(SignificandError::NonFinite(l));
    }
    Ok(significand_of_mantissa(frac(l)))
}

/// The `n`-th significant decimal digit of `x`; every digit of 0 is 0.
///
/// # Panics
/// If `n == 0`.
pub fn nth_digit(x: f64, n: u32) -> u8 {
    assert!(n >= 1, "digit index starts at 1");
    match significand(x) {
        Ok(s) => nth_digit_of_significand(s, n),
        Err(_) => 0,
    }
}

fn nth_digit_of_significand(s: f64, n: u32) -> u8 {
    let scale = 10f64.powi(n as i32 - 1);
    let mut v = (s * scale * (1.0 + DIGIT_GUARD)).floor();
    if v >= 10.0 * scale {
        v = scale;
    }
    (v % 10.0) as u8
}

/// `P(D₁ = d) = log₁₀(1 + 1/d)`.
pub fn benford_pmf_first(d1: u8) -> Result<f64, SignificandError> {
    if !(1..=9).contains(&d1) {
        return Err(SignificandError::InvalidDigit(d1));
    }
    Ok((1.0 + 1.0 / f64::from(d1)).log10())
}

/// Joint probability of the leading digits `d₁ … dₙ`.
pub fn benford_pmf_joint(digits: &[u8]) -> Result<f64, SignificandError> {
    let &first = digits.first().ok_or(SignificandError::NoDigits)?;
    if first == 0 {
        return Err(SignificandError::LeadingZero);
    }
    let mut m: u64 = 0;
    for &d in digits {
        if d > 9 {
            return Err(SignificandError::InvalidDigit(d));
        }
        m = m * 10 + u64::from(d);
    }
    Ok((1.0 + 1.0 / m as f64).log10())
}

/// Benford first-digit probabilities for digits 1..9.
pub fn benford_first_digit_probs() -> [f64; 9] {
    std::array::from_fn(|k| ((k + 2) as f64 / (k + 1) as f64).log10())
}

/// Counts of leading digits 1..9.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DigitFrequencyTable {
    pub counts: [u64; 9],
    pub total: u64,
}

impl DigitFrequencyTable {
    pub fn from_counts(counts: [u64; 9]) -> Self {
        Self {
            counts,
            total: counts.iter().sum(),
        }
    }

    pub fn from_digits(digits: impl IntoIterator<Item = u8>) -> Self {
        let mut t = Self::default();
        for d in digits {
            t.add(d);
        }
        t
    }

    /// Records one leading digit; anything outside 1..9 is ignored.
    pub fn add(&mut self, d1: u8) {
        if (1..=9).contains(&d1) {
            self.counts[usize::from(d1 - 1)] += 1;
            self.total += 1;
        }
    }

    pub fn frequencies(&self) -> [f64; 9] {
        let t = self.total.max(1) as f64;
        self.counts.map(|c| c as f64 / t)
    }

    pub fn frequency(&self, d1: u8) -> f64 {
        self.frequencies()[usize::from(d1 - 1)]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BenfordGofResult {
    pub chi_squared: f64,
    pub degrees_of_freedom: u32,
    /// Present when the underlying log values were available.
    pub significand_discrepancy: Option<f64>,
}

impl BenfordGofResult {
    pub fn passes_05(&self) -> bool {
        self.chi_squared <= CHI2_CRIT_05
    }

    pub fn passes_01(&self) -> bool {
        self.chi_squared <= CHI2_CRIT_01
    }
}

/// Pearson χ² of the table against the first-digit law.
pub fn gof(table: &DigitFrequencyTable) -> Result<BenfordGofResult, SignificandError> {
    Ok(BenfordGofResult {
        chi_squared: chi_squared(table)?,
        degrees_of_freedom: 8,
        significand_discrepancy: None,
    })
}

/// χ² and discrepancy from a sample of `log₁₀|x|` values.
pub fn gof_from_logs(logs: &[f64]) -> Result<BenfordGofResult, SignificandError> {
    let table = DigitFrequencyTable::from_digits(
        logs.iter().map(|&l| LogValue::from_log10(l).first_digit()),
    );
    Ok(BenfordGofResult {
        chi_squared: chi_squared(&table)?,
        degrees_of_freedom: 8,
        significand_discrepancy: Some(discrepancy(logs)?),
    })
}

pub fn chi_squared(table: &DigitFrequencyTable) -> Result<f64, SignificandError> {
    if table.total == 0 {
        return Err(SignificandError::EmptySample);
    }
    let n = table.total as f64;
    Ok(benford_first_digit_probs()
        .iter()
        .zip(table.counts)
        .map(|(&p, c)| {
            let e = n * p;
            (c as f64 - e).powi(2) / e
        })
        .sum())
}

/// `sup_t |#{S ≤ t}/n − log₁₀ t|` for the sample with the given `log₁₀|x|`.
pub fn discrepancy(log_values: &[f64]) -> Result<f64, SignificandError> {
    if log_values.is_empty() {
        return Err(SignificandError::EmptySample);
    }
    let mut u: Vec<f64> = log_values.iter().map(|&l| frac(l)).collect();
    Ok(discrepancy_of_sorted({
        u.sort_by(f64::total_cmp);
        &u
    }))
}

/// Same as [`discrepancy`] for mantissas already reduced to `[0,1)`.
pub fn discrepancy_of_mantissas(mantissas: &[f64]) -> Result<f64, SignificandError> {
    if mantissas.is_empty() {
        return Err(SignificandError::EmptySample);
    }
    let mut u = mantissas.to_vec();
    u.sort_by(f64::total_cmp);
    Ok(discrepancy_of_sorted(&u))
}

fn discrepancy_of_sorted(u: &[f64]) -> f64 {
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &x)| {
            let i = i as f64;
            ((i + 1.0) / n - x).max(x - i / n)
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SignificandDistribution {
    Benford,
    Uniform,
}

/// `E[1/Y]` for a significand `Y` on `[1, 10)`.
pub fn expected_reciprocal_significand(dist: SignificandDistribution) -> f64 {
    match dist {
        SignificandDistribution::Benford => 0.9 / LN_10,
        SignificandDistribution::Uniform => LN_10 / 9.0,
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn significand_examples() {
        assert_eq!(significand(30122.0).unwrap(), 3.0122);
        assert_eq!(significand(1.0).unwrap(), 1.0);
        assert!((significand(0.030122).unwrap() - 3.0122).abs() < 1e-15);
        assert_eq!(significand(-1000.0).unwrap(), 1.0);
        assert_eq!(significand(0.0), Err(SignificandError::ZeroInput));
        assert!((significand(5e-320).unwrap() - 5.0).abs() < 1e-2);
        assert!((significand(1.7e308).unwrap() - 1.7).abs() < 1e-12);
    }

    #[test]
    fn significand_from_log_examples() {
        assert!((significand_from_log(3011f64.log10()).unwrap() - 3.011).abs() < 1e-12);
        assert_eq!(significand_from_log(-5229.0).unwrap(), 1.0);
        assert!((significand_from_log(0.5).unwrap() - 10f64.sqrt()).abs() < 1e-15);
        assert!((significand_from_log(-0.3).unwrap() - 10f64.powf(0.7)).abs() < 1e-14);
        assert!(significand_from_log(f64::NAN).is_err());
    }

    #[test]
    fn digit_examples() {
        assert_eq!(nth_digit(3.0122, 1), 3);
        assert_eq!(nth_digit(3.0122, 2), 0);
        assert_eq!(nth_digit(30122.0, 3), 1);
        assert_eq!(nth_digit(0.0, 1), 0);
        assert_eq!(nth_digit(0.0, 4), 0);
        assert_eq!(nth_digit(0.2, 1), 2);
        assert_eq!(nth_digit(2.9999999999, 1), 3);
        assert_eq!(nth_digit(9.99999999999, 1), 1);
    }

    #[test]
    fn pmf_examples() {
        let p: Vec<f64> = (1..=9).map(|d| benford_pmf_first(d).unwrap()).collect();
        assert_eq!(p[0], std::f64::consts::LOG10_2);
        assert!((p[1] - 0.17609).abs() < 5e-6);
        // Printed tables round this one down to 0.04575; the closed form is 0.0457575.
        assert!((p[8] - (10.0f64 / 9.0).log10()).abs() < 1e-16);
        assert!((p[8] - 0.04576).abs() < 5e-6);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!((benford_pmf_joint(&[3, 0, 1]).unwrap() - 0.00144).abs() < 5e-6);
        assert_eq!(benford_pmf_joint(&[7]).unwrap(), benford_pmf_first(7).unwrap());
        let total: f64 = (1..=9u8)
            .flat_map(|a| (0..=9u8).map(move |b| benford_pmf_joint(&[a, b]).unwrap()))
            .sum();
        assert!((total - 1.0).abs() < 1e-14);
        assert_eq!(benford_pmf_joint(&[0, 1]), Err(SignificandError::LeadingZero));
        assert_eq!(benford_pmf_first(0), Err(SignificandError::InvalidDigit(0)));
    }

    #[test]
    fn chi_squared_zero_for_exact_proportions() {
        // Scale chosen so every expected count is an integer up to float noise.
        let counts = benford_first_digit_probs().map(|p| (p * 1e12).round() as u64);
        let g = gof(&DigitFrequencyTable::from_counts(counts)).unwrap();
        assert!(g.chi_squared < 1e-6);
        assert_eq!(g.degrees_of_freedom, 8);
        assert!(gof(&DigitFrequencyTable::default()).is_err());
    }

    #[test]
    fn chi_squared_of_printed_pow2_column() {
        let freqs = [0.292, 0.180, 0.126, 0.098, 0.081, 0.068, 0.057, 0.053, 0.045];
        let counts = freqs.map(|f: f64| (f * 1000.0).round() as u64);
        let t = DigitFrequencyTable::from_counts(counts);
        let probs = benford_first_digit_probs();
        let mut expect = 0.0;
        for k in 0..9 {
            let e = 1000.0 * probs[k];
            expect += (counts[k] as f64 - e) * (counts[k] as f64 - e) / e;
        }
        let g = gof(&t).unwrap();
        assert!((g.chi_squared - expect).abs() < 1e-12);
        assert!(g.passes_01());
    }

    #[test]
    fn discrepancy_single_point() {
        let d = discrepancy(&[10f64.sqrt().log10()]).unwrap();
        assert!((d - 0.5).abs() < 1e-15);
        assert!(discrepancy(&[]).is_err());
    }

    #[test]
    fn expected_reciprocal() {
        let b = expected_reciprocal_significand(SignificandDistribution::Benford);
        let u = expected_reciprocal_significand(SignificandDistribution::Uniform);
        assert!((b - 0.39087).abs() < 5e-6);
        assert!((u - 0.25584).abs() < 5e-6);
        assert!((b / u - 1.5278).abs() < 5e-5);
        // Midpoint-rule integrals as an independent check.
        let m = 200_000;
        let h = 9.0 / m as f64;
        let (mut ib, mut iu) = (0.0, 0.0);
        for k in 0..m {
            let y = 1.0 + (k as f64 + 0.5) * h;
            ib += h / (y * y * LN_10);
            iu += h / (9.0 * y);
        }
        assert!((ib - b).abs() < 1e-9 && (iu - u).abs() < 1e-9);
    }

    #[test]
    fn log_value_normalizes() {
        let v = LogValue::from_log10(-0.3);
        assert_eq!(v.characteristic(), -1);
        assert!((v.mantissa() - 0.7).abs() < 1e-15);
        let v = LogValue::from_parts(5, 1.25);
        assert_eq!((v.characteristic(), v.mantissa()), (6, 0.25));
        assert_eq!(LogValue::of(0.0), None);
        assert_eq!(LogValue::of(250.0).unwrap().first_digit(), 2);
    }

    proptest! {
        #[test]
        fn significand_is_idempotent(x in prop::num::f64::NORMAL) {
            let s = significand(x).unwrap();
            prop_assert!((1.0..10.0).contains(&s));
            prop_assert_eq!(significand(s).unwrap(), s);
        }

        #[test]
        fn log_path_matches_direct(m in 1.0f64..10.0, k in -300i32..300) {
            let x = m * 10f64.powi(k);
            prop_assume!(x.is_normal());
            let a = significand(x).unwrap();
            let b = significand_from_log(x.log10()).unwrap();
            prop_assert!((a - b).abs() <= 1e-12 * a);
        }

        #[test]
        fn joint_marginalizes_to_first(d1 in 1u8..=9) {
            let s: f64 = (0..=9u8).map(|d2| benford_pmf_joint(&[d1, d2]).unwrap()).sum();
            prop_assert!((s - benford_pmf_first(d1).unwrap()).abs() < 1e-15);
        }

        #[test]
        fn frequencies_sum_to_one(digits in proptest::collection::vec(1u8..=9, 1..200)) {
            let t = DigitFrequencyTable::from_digits(digits.iter().copied());
            prop_assert_eq!(t.counts.iter().sum::<u64>(), t.total);
            prop_assert!((t.frequencies().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
