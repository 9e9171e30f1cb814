//! Certified simple continued fractions and convergents.
//!
//! A float is really an interval of width about 1e-15 relative. Both ends of
//! that interval are expanded in exact rational arithmetic, and a partial
//! quotient is reported as trustworthy only while both expansions agree.

use std::fmt;
use std::str::FromStr;

use num_bigint::{BigInt, BigUint, Sign};
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed, ToPrimitive, Zero};
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::extprec::ExtFloat;

pub const MAX_TERMS: usize = 60;
/// Relative half-width assumed for `f64` inputs.
pub const F64_RELATIVE_UNCERTAINTY: f64 = 1e-15;
/// Working precision for the named closed-form constants.
pub const NAMED_PRECISION_BITS: usize = 512;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContFracError {
    #[error("at most {MAX_TERMS} partial quotients supported, {0} requested")]
    TooManyTerms(usize),
    #[error("cannot expand non-finite value {0}")]
    NonFinite(f64),
    #[error("unknown constant '{0}'")]
    UnknownConstant(String),
    #[error("continued fraction has no terms")]
    Empty,
}

fn ser_bigint<S: Serializer>(x: &BigInt, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&x.to_string())
}

fn ser_biguints<S: Serializer>(xs: &[BigUint], s: S) -> Result<S::Ok, S::Error> {
    s.collect_seq(xs.iter().map(ToString::to_string))
}

/// `[a₀; a₁, a₂, …]` with every listed quotient certified.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ContinuedFraction {
    #[serde(serialize_with = "ser_bigint")]
    pub a0: BigInt,
    #[serde(serialize_with = "ser_biguints")]
    pub partial_quotients: Vec<BigUint>,
    /// Nearest `f64` of the expanded value.
    pub source_value: f64,
    /// Number of partial quotients after `a₀` that are trustworthy.
    pub precision_note: usize,
    /// Number of partial quotients asked for.
    pub requested: usize,
    /// True when the input is exactly rational and the expansion ended.
    pub terminated: bool,
}

impl ContinuedFraction {
    /// False when fewer quotients could be certified than were requested.
    pub fn is_complete(&self) -> bool {
        self.terminated || self.precision_note >= self.requested
    }

    /// Exact value of the (finite) expansion.
    pub fn to_rational(&self) -> BigRational {
        let mut acc: Option<BigRational> = None;
        for a in self.partial_quotients.iter().rev() {
            let a = BigRational::from_integer(BigInt::from(a.clone()));
            acc = Some(match acc {
                None => a,
                Some(t) => a + t.recip(),
            });
        }
        let a0 = BigRational::from_integer(self.a0.clone());
        match acc {
            None => a0,
            Some(t) => a0 + t.recip(),
        }
    }

    /// Quotients as machine integers, when they all fit.
    pub fn quotients_u64(&self) -> Option<Vec<u64>> {
        self.partial_quotients.iter().map(ToPrimitive::to_u64).collect()
    }
}

impl fmt::Display for ContinuedFraction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}", self.a0)?;
        for (k, a) in self.partial_quotients.iter().enumerate() {
            write!(f, "{}{}", if k == 0 { "; " } else { ", " }, a)?;
        }
        write!(f, "]")
    }
}

fn check_terms(max_terms: usize) -> Result<(), ContFracError> {
    if max_terms > MAX_TERMS {
        Err(ContFracError::TooManyTerms(max_terms))
    } else {
        Ok(())
    }
}

fn rational_of_f64(x: f64) -> BigRational {
    BigRational::from_float(x).expect("finite input")
}

/// Expands `x`, treating it as uncertain by `1e-15·|x|`.
pub fn expand(x: f64, max_terms: usize) -> Result<ContinuedFraction, ContFracError> {
    check_terms(max_terms)?;
    if !x.is_finite() {
        return Err(ContFracError::NonFinite(x));
    }
    let center = rational_of_f64(x);
    let delta = rational_of_f64(F64_RELATIVE_UNCERTAINTY) * center.abs();
    let mut cf = expand_interval(&(&center - &delta), &(&center + &delta), max_terms)?;
    cf.source_value = x;
    Ok(cf)
}

/// Expands an extended-precision value, uncertain by a few units in its last place.
pub fn expand_ext(x: &ExtFloat, max_terms: usize) -> Result<ContinuedFraction, ContFracError> {
    check_terms(max_terms)?;
    let center = x.to_rational();
    let delta = match x.exponent() {
        None => BigRational::zero(),
        Some(e) => {
            // 16 ulps at the working precision.
            let shift = e - x.precision() as i64 + 4;
            pow2(shift)
        }
    };
    let mut cf = expand_interval(&(&center - &delta), &(&center + &delta), max_terms)?;
    cf.source_value = x.to_f64();
    Ok(cf)
}

fn pow2(e: i64) -> BigRational {
    if e >= 0 {
        BigRational::from_integer(BigInt::one() << e as usize)
    } else {
        BigRational::new(BigInt::one(), BigInt::one() << (-e) as usize)
    }
}

/// Exact expansion of a rational number (terminates).
pub fn expand_rational(r: &BigRational, max_terms: usize) -> Result<ContinuedFraction, ContFracError> {
    check_terms(max_terms)?;
    let mut cf = expand_interval(r, r, max_terms)?;
    cf.source_value = r.to_f64().unwrap_or(f64::NAN);
    Ok(cf)
}

/// Expands every number in `[lo, hi]` simultaneously and keeps the common prefix.
pub fn expand_interval(
    lo: &BigRational,
    hi: &BigRational,
    max_terms: usize,
) -> Result<ContinuedFraction, ContFracError> {
    check_terms(max_terms)?;
    let (mut x, mut y) = if lo <= hi {
        (lo.clone(), hi.clone())
    } else {
        (hi.clone(), lo.clone())
    };
    let a0 = x.floor().to_integer();
    let b0 = y.floor().to_integer();
    let mut cf = ContinuedFraction {
        a0: a0.clone(),
        partial_quotients: Vec::new(),
        source_value: f64::NAN,
        precision_note: 0,
        requested: max_terms,
        terminated: false,
    };
    if a0 != b0 {
        // Even the integer part is uncertain; report the lower one.
        return Ok(cf);
    }
    x -= BigRational::from_integer(a0.clone());
    y -= BigRational::from_integer(a0);
    while cf.partial_quotients.len() < max_terms {
        if x.is_zero() && y.is_zero() {
            cf.terminated = true;
            break;
        }
        if x.is_zero() || y.is_zero() {
            break;
        }
        // The Gauss map reverses order, so the interval endpoints swap.
        let nx = y.recip();
        let ny = x.recip();
        let ax = nx.floor().to_integer();
        let ay = ny.floor().to_integer();
        if ax != ay {
            break;
        }
        x = nx - BigRational::from_integer(ax.clone());
        y = ny - BigRational::from_integer(ax.clone());
        cf.partial_quotients.push(ax.to_biguint().expect("quotients after the first are positive"));
    }
    cf.precision_note = cf.partial_quotients.len();
    Ok(cf)
}

/// `p_n / q_n`, the `n`-th convergent.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Convergent {
    #[serde(serialize_with = "ser_bigint")]
    pub p: BigInt,
    #[serde(serialize_with = "ser_bigint")]
    pub q: BigInt,
    pub index: usize,
}

impl Convergent {
    pub fn value(&self) -> BigRational {
        BigRational::new(self.p.clone(), self.q.clone())
    }
}

pub fn convergents(cf: &ContinuedFraction) -> Vec<Convergent> {
    let mut out = Vec::with_capacity(cf.partial_quotients.len() + 1);
    let (mut p_prev, mut q_prev) = (BigInt::one(), BigInt::zero());
    let (mut p, mut q) = (cf.a0.clone(), BigInt::one());
    out.push(Convergent {
        p: p.clone(),
        q: q.clone(),
        index: 0,
    });
    for (k, a) in cf.partial_quotients.iter().enumerate() {
        let a = BigInt::from_biguint(Sign::Plus, a.clone());
        let pn = &a * &p + &p_prev;
        let qn = &a * &q + &q_prev;
        p_prev = std::mem::replace(&mut p, pn);
        q_prev = std::mem::replace(&mut q, qn);
        out.push(Convergent {
            p: p.clone(),
            q: q.clone(),
            index: k + 1,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApproximationGap {
    /// `|x − p/q|`
    pub gap: f64,
    /// `1 / (a_{n+1} q²)`
    pub bound: f64,
    /// `gap < bound`, decided exactly.
    pub satisfied: bool,
}

pub fn approximation_gap(x: &BigRational, c: &Convergent, next_quotient: &BigUint) -> ApproximationGap {
    let gap = (x - c.value()).abs();
    let a = BigInt::from_biguint(Sign::Plus, next_quotient.clone());
    let bound = if a.is_zero() {
        None
    } else {
        Some(BigRational::new(BigInt::one(), a * &c.q * &c.q))
    };
    ApproximationGap {
        gap: ratio_to_f64(&gap),
        bound: bound.as_ref().map_or(f64::INFINITY, ratio_to_f64),
        satisfied: bound.is_none_or(|b| gap < b),
    }
}

// Ratio::to_f64 overflows on huge numerators and denominators; scale first.
fn ratio_to_f64(r: &BigRational) -> f64 {
    if r.is_zero() {
        return 0.0;
    }
    let nb = r.numer().bits() as i64;
    let db = r.denom().bits() as i64;
    let shift = 60 - (nb - db);
    let scaled = if shift >= 0 {
        (r.numer() << shift as usize).div_floor(r.denom())
    } else {
        r.numer().div_floor(&(r.denom() << (-shift) as usize))
    };
    scaled.to_f64().unwrap_or(f64::NAN) * 2f64.powi(-(shift as i32))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IrrationalityProfile {
    #[serde(serialize_with = "ser_bigint")]
    pub max_quotient: BigInt,
    /// 1-based position of the first maximal quotient.
    pub index_of_max: usize,
    pub geometric_mean: f64,
    pub terms: usize,
}

/// Summary of the first `terms` partial quotients.
pub fn irrationality_profile(cf: &ContinuedFraction, terms: usize) -> Result<IrrationalityProfile, ContFracError> {
    let qs = &cf.partial_quotients[..terms.min(cf.partial_quotients.len())];
    if qs.is_empty() {
        return Err(ContFracError::Empty);
    }
    let (mut best, mut at) = (&qs[0], 0);
    let mut log_sum = 0.0;
    for (k, a) in qs.iter().enumerate() {
        if a > best {
            best = a;
            at = k;
        }
        log_sum += ratio_to_f64(&BigRational::from_integer(BigInt::from(a.clone()))).ln();
    }
    Ok(IrrationalityProfile {
        max_quotient: BigInt::from(best.clone()),
        index_of_max: at + 1,
        geometric_mean: (log_sum / qs.len() as f64).exp(),
        terms: qs.len(),
    })
}

/// Closed-form constants available to the command line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NamedConstant {
    /// `log₁₀ 0.3`
    Log10Of03,
    /// `log₁₀ |−(1+√21)/20|`
    Ex12LogAbsLambda2,
    /// `(1+√5)/2`
    GoldenRatio,
    /// `atan(√3/7) / 2π`
    Ex13ArgLambda2Over2Pi,
    /// `½ log₁₀ 0.13`
    Ex13LogAbsLambda2,
}

impl NamedConstant {
    pub const ALL: [NamedConstant; 5] = [
        NamedConstant::Log10Of03,
        NamedConstant::Ex12LogAbsLambda2,
        NamedConstant::GoldenRatio,
        NamedConstant::Ex13ArgLambda2Over2Pi,
        NamedConstant::Ex13LogAbsLambda2,
    ];

    pub fn name(self) -> &'static str {
        match self {
            NamedConstant::Log10Of03 => "log10(0.3)",
            NamedConstant::Ex12LogAbsLambda2 => "ex12.log_abs_lambda2",
            NamedConstant::GoldenRatio => "golden_ratio",
            NamedConstant::Ex13ArgLambda2Over2Pi => "ex13.arg_lambda2_over_2pi",
            NamedConstant::Ex13LogAbsLambda2 => "ex13.log_abs_lambda2",
        }
    }

    pub fn value(self, prec: usize) -> ExtFloat {
        let int = |k: i64| ExtFloat::from_i64(k, prec);
        match self {
            NamedConstant::Log10Of03 => ExtFloat::from_ratio(3, 10, prec).log10(),
            NamedConstant::Ex12LogAbsLambda2 => int(1).add(&int(21).sqrt()).div(&int(20)).log10(),
            NamedConstant::GoldenRatio => int(1).add(&int(5).sqrt()).div(&int(2)),
            NamedConstant::Ex13ArgLambda2Over2Pi => {
                let t = int(3).sqrt().div(&int(7)).atan();
                t.div(&ExtFloat::pi(prec).mul(&int(2)))
            }
            NamedConstant::Ex13LogAbsLambda2 => ExtFloat::from_ratio(13, 100, prec).log10().div(&int(2)),
        }
    }

    pub fn expand(self, max_terms: usize) -> Result<ContinuedFraction, ContFracError> {
        expand_ext(&self.value(NAMED_PRECISION_BITS), max_terms)
    }
}

impl FromStr for NamedConstant {
    type Err = ContFracError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|c| c.name() == s)
            .ok_or_else(|| ContFracError::UnknownConstant(s.to_string()))
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn int(k: i64) -> BigInt {
        BigInt::from(k)
    }

    fn quotients(cf: &ContinuedFraction) -> Vec<u64> {
        cf.quotients_u64().unwrap()
    }

    #[test]
    fn golden_ratio_is_all_ones() {
        let cf = NamedConstant::GoldenRatio.expand(60).unwrap();
        assert_eq!(cf.a0, int(1));
        assert_eq!(quotients(&cf), vec![1; 60]);
        let cf = expand((1.0 + 5f64.sqrt()) / 2.0, 60).unwrap();
        assert!(!cf.is_complete());
        assert!(cf.precision_note >= 30);
        assert!(quotients(&cf).iter().all(|&a| a == 1));
    }

    #[test]
    fn float_input_certifies_a_prefix_only() {
        let x = 0.3f64.log10();
        let cf = expand(x, 40).unwrap();
        let exact = NamedConstant::Log10Of03.expand(40).unwrap();
        assert_eq!(cf.a0, exact.a0);
        assert_eq!(cf.partial_quotients[..], exact.partial_quotients[..cf.precision_note]);
        assert!(cf.precision_note < 40);
    }

    #[test]
    fn too_many_terms() {
        assert_eq!(expand(0.5, 61), Err(ContFracError::TooManyTerms(61)));
        assert!(expand(f64::NAN, 5).is_err());
    }

    #[test]
    fn rational_terminates() {
        let r = BigRational::new(int(-7), int(10));
        let cf = expand_rational(&r, 20).unwrap();
        assert!(cf.terminated);
        assert_eq!(cf.a0, int(-1));
        assert_eq!(quotients(&cf), vec![3, 3]);
        assert_eq!(cf.to_rational(), r);
        let last = convergents(&cf).pop().unwrap();
        let g = approximation_gap(&r, &last, &BigUint::from(1u32));
        assert_eq!(g.gap, 0.0);
        assert!(g.satisfied);
    }

    #[test]
    fn convergent_examples() {
        let cf = NamedConstant::GoldenRatio.expand(4).unwrap();
        let cs: Vec<(i64, i64)> = convergents(&cf)
            .iter()
            .map(|c| (c.p.to_i64().unwrap(), c.q.to_i64().unwrap()))
            .collect();
        assert_eq!(cs, vec![(1, 1), (2, 1), (3, 2), (5, 3), (8, 5)]);

        let arg = NamedConstant::Ex13ArgLambda2Over2Pi.expand(3).unwrap();
        assert_eq!(arg.a0, int(0));
        let c1 = &convergents(&arg)[1];
        assert_eq!((c1.p.clone(), c1.q.clone()), (int(1), int(25)));

        let cf = ContinuedFraction {
            a0: int(-1),
            partial_quotients: vec![BigUint::from(2u32)],
            source_value: -0.5,
            precision_note: 1,
            requested: 1,
            terminated: true,
        };
        let cs = convergents(&cf);
        assert_eq!((cs[0].p.clone(), cs[0].q.clone()), (int(-1), int(1)));
        assert_eq!((cs[1].p.clone(), cs[1].q.clone()), (int(-1), int(2)));
    }

    #[test]
    fn golden_ratio_gap_bound_holds() {
        let x = NamedConstant::GoldenRatio.value(NAMED_PRECISION_BITS).to_rational();
        let cf = NamedConstant::GoldenRatio.expand(40).unwrap();
        let cs = convergents(&cf);
        for n in 2..39 {
            let g = approximation_gap(&x, &cs[n], &cf.partial_quotients[n]);
            assert!(g.satisfied, "n={n}");
        }
    }

    #[test]
    fn large_quotient_gives_fast_approximation() {
        let x = NamedConstant::Ex13ArgLambda2Over2Pi.value(NAMED_PRECISION_BITS).to_rational();
        let cf = NamedConstant::Ex13ArgLambda2Over2Pi.expand(10).unwrap();
        assert_eq!(cf.partial_quotients[4], BigUint::from(168u32));
        let cs = convergents(&cf);
        // Convergent p₄/q₄ is followed by a₅ = 168.
        let g = approximation_gap(&x, &cs[4], &cf.partial_quotients[4]);
        assert!(g.satisfied);
        let neighbour = approximation_gap(&x, &cs[3], &cf.partial_quotients[3]);
        assert!(g.gap * 100.0 < neighbour.bound);
        // Compared with 1/q² alone, the gap is two orders smaller.
        let q = cs[4].q.to_f64().unwrap();
        assert!(g.gap * q * q < 1e-2);
    }

    #[test]
    fn profile_of_named_constant() {
        let cf = NamedConstant::Ex13ArgLambda2Over2Pi.expand(50).unwrap();
        let p = irrationality_profile(&cf, 50).unwrap();
        assert_eq!(p.max_quotient, int(168));
        assert_eq!(p.index_of_max, 5);
        assert!(p.geometric_mean > 1.0);
    }

    #[test]
    fn constant_names_round_trip() {
        for c in NamedConstant::ALL {
            assert_eq!(c.name().parse::<NamedConstant>().unwrap(), c);
        }
        assert!("pi".parse::<NamedConstant>().is_err());
    }

    #[test]
    fn display_format() {
        let cf = expand_rational(&BigRational::new(int(43), int(19)), 10).unwrap();
        assert_eq!(cf.to_string(), "[2; 3, 1, 4]");
    }

    proptest! {
        #[test]
        fn determinant_and_alternation(x in -1000.0f64..1000.0) {
            let cf = expand(x, 40).unwrap();
            let cs = convergents(&cf);
            let xr = rational_of_f64(x);
            for n in 1..cs.len() {
                let det = &cs[n].p * &cs[n - 1].q - &cs[n - 1].p * &cs[n].q;
                let sign = if n % 2 == 1 { int(1) } else { int(-1) };
                prop_assert_eq!(det, sign);
                prop_assert!(cs[n].p.gcd(&cs[n].q).is_one());
            }
            for (n, c) in cs.iter().enumerate() {
                let diff = c.value() - xr.clone();
                if !diff.is_zero() && n + 1 < cs.len() {
                    // Even convergents lie below, odd ones above.
                    prop_assert_eq!(diff.is_negative(), n % 2 == 0);
                }
            }
        }

        #[test]
        fn round_trip_within_bound(x in -100.0f64..100.0) {
            let cf = expand(x, 30).unwrap();
            let last = convergents(&cf).pop().unwrap();
            let r = cf.to_rational();
            prop_assert_eq!(r.clone(), last.value());
            let q2 = BigRational::from_integer(&last.q * &last.q);
            prop_assert!((r - rational_of_f64(x)).abs() * q2 <= BigRational::one());
        }
    }
}
