//! Software extended-precision scalars and small dense matrices.
//!
//! Backed by `astro-float`. Only the handful of operations the oracles and
//! the certified continued-fraction code need are exposed here, plus exact
//! conversions to `f64`, [`LogValue`] and `BigRational`.

use std::cell::RefCell;

use astro_float::{BigFloat, Consts, Radix, RoundingMode, Sign, WORD_BIT_SIZE};
use num_bigint::{BigInt, BigUint};
use num_rational::BigRational;
use num_traits::{One, Zero};

use crate::chains::StochasticMatrix;
use crate::significand::LogValue;

const RM: RoundingMode = RoundingMode::ToEven;

thread_local! {
    static CONSTS: RefCell<Consts> =
        RefCell::new(Consts::new().expect("astro-float constant cache allocation"));
}

fn with_consts<R>(f: impl FnOnce(&mut Consts) -> R) -> R {
    CONSTS.with(|c| f(&mut c.borrow_mut()))
}

/// An extended-precision real number carrying its working precision in bits.
#[derive(Debug, Clone)]
pub struct ExtFloat {
    value: BigFloat,
    prec: usize,
}

impl ExtFloat {
    pub fn zero(prec: usize) -> Self {
        Self::from_f64(0.0, prec)
    }

    pub fn from_f64(x: f64, prec: usize) -> Self {
        Self {
            value: BigFloat::from_f64(x, prec),
            prec,
        }
    }

    /// The decimal number `x` prints as, e.g. `0.1` rather than its binary
    /// neighbour.
    pub fn from_f64_decimal(x: f64, prec: usize) -> Self {
        let text = format!("{x:e}");
        let value = with_consts(|cc| BigFloat::parse(&text, Radix::Dec, prec, RM, cc));
        Self { value, prec }
    }

    pub fn from_i64(x: i64, prec: usize) -> Self {
        Self {
            value: BigFloat::from_i64(x, prec),
            prec,
        }
    }

    /// `num / den` rounded to `prec` bits.
    pub fn from_ratio(num: i64, den: i64, prec: usize) -> Self {
        let n = BigFloat::from_i64(num, prec);
        let d = BigFloat::from_i64(den, prec);
        Self {
            value: n.div(&d, prec, RM),
            prec,
        }
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    pub fn add(&self, other: &Self) -> Self {
        Self {
            value: self.value.add(&other.value, self.prec, RM),
            prec: self.prec,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        Self {
            value: self.value.sub(&other.value, self.prec, RM),
            prec: self.prec,
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        Self {
            value: self.value.mul(&other.value, self.prec, RM),
            prec: self.prec,
        }
    }

    pub fn div(&self, other: &Self) -> Self {
        Self {
            value: self.value.div(&other.value, self.prec, RM),
            prec: self.prec,
        }
    }

    pub fn neg(&self) -> Self {
        Self {
            value: self.value.neg(),
            prec: self.prec,
        }
    }

    pub fn abs(&self) -> Self {
        Self {
            value: self.value.abs(),
            prec: self.prec,
        }
    }

    pub fn sqrt(&self) -> Self {
        Self {
            value: self.value.sqrt(self.prec, RM),
            prec: self.prec,
        }
    }

    pub fn log10(&self) -> Self {
        let value = with_consts(|cc| self.value.log10(self.prec, RM, cc));
        Self {
            value,
            prec: self.prec,
        }
    }

    pub fn atan(&self) -> Self {
        let value = with_consts(|cc| self.value.atan(self.prec, RM, cc));
        Self {
            value,
            prec: self.prec,
        }
    }

    pub fn pi(prec: usize) -> Self {
        let value = with_consts(|cc| cc.pi(prec, RM));
        Self { value, prec }
    }

    pub fn is_zero(&self) -> bool {
        self.value.is_zero()
    }

    pub fn is_finite(&self) -> bool {
        !(self.value.is_nan() || self.value.is_inf())
    }

    /// Binary exponent `e` with `2^(e-1) ≤ |x| < 2^e`, or `None` for zero.
    pub fn exponent(&self) -> Option<i64> {
        if self.is_zero() {
            return None;
        }
        self.value.exponent().map(i64::from)
    }

    /// Nearest `f64` (underflows to zero, overflows to infinity).
    pub fn to_f64(&self) -> f64 {
        let Some((words, _, sign, exp, _)) = self.value.as_raw_parts() else {
            return f64::NAN;
        };
        if self.value.is_zero() {
            return 0.0;
        }
        let top = words.len();
        // The two most significant words carry far more than 53 bits.
        let w1 = words[top - 1] as f64;
        let w0 = if top >= 2 { words[top - 2] as f64 } else { 0.0 };
        let mant = (w1 + w0 / 2f64.powi(WORD_BIT_SIZE as i32)) / 2f64.powi(WORD_BIT_SIZE as i32);
        let v = ldexp(mant, i64::from(exp));
        match sign {
            Sign::Neg => -v,
            Sign::Pos => v,
        }
    }

    /// Exact rational value of the stored binary number.
    pub fn to_rational(&self) -> BigRational {
        let Some((words, _, sign, exp, _)) = self.value.as_raw_parts() else {
            return BigRational::zero();
        };
        if self.value.is_zero() {
            return BigRational::zero();
        }
        let mut m = BigUint::zero();
        for w in words.iter().rev() {
            m = (m << WORD_BIT_SIZE) + BigUint::from(*w);
        }
        let shift = i64::from(exp) - (words.len() * WORD_BIT_SIZE) as i64;
        let mut num = BigInt::from(m);
        if matches!(sign, Sign::Neg) {
            num = -num;
        }
        if shift >= 0 {
            BigRational::from_integer(num << (shift as usize))
        } else {
            BigRational::new(num, BigInt::one() << ((-shift) as usize))
        }
    }

    /// `log₁₀|x|` split into characteristic and mantissa, or `None` for zero.
    pub fn log10_abs(&self) -> Option<LogValue> {
        if self.is_zero() {
            return None;
        }
        const LOG_PREC: usize = 192;
        let mut a = self.value.abs();
        // Rounding the argument first keeps the logarithm cheap for very wide
        // mantissas; 192 bits is far beyond what f64 results can carry.
        let _ = a.set_precision(LOG_PREC, RM);
        let l = with_consts(|cc| a.log10(LOG_PREC, RM, cc));
        let k = l.floor();
        let f = l.sub(&k, LOG_PREC, RM);
        let kf = ExtFloat {
            value: k,
            prec: LOG_PREC,
        }
        .to_f64();
        let ff = ExtFloat {
            value: f,
            prec: LOG_PREC,
        }
        .to_f64();
        Some(LogValue::from_parts(kf as i64, ff))
    }
}

fn ldexp(x: f64, e: i64) -> f64 {
    let mut v = x;
    let mut e = e;
    while e > 1000 {
        v *= 2f64.powi(1000);
        e -= 1000;
    }
    while e < -1000 {
        v *= 2f64.powi(-1000);
        e += 1000;
        if v == 0.0 {
            return 0.0;
        }
    }
    v * 2f64.powi(e as i32)
}

/// Dense square matrix of [`ExtFloat`] entries, row-major.
#[derive(Debug, Clone)]
pub struct ExtMatrix {
    dim: usize,
    prec: usize,
    data: Vec<ExtFloat>,
}

impl ExtMatrix {
    pub fn identity(dim: usize, prec: usize) -> Self {
        let data = (0..dim * dim)
            .map(|k| ExtFloat::from_f64(if k / dim == k % dim { 1.0 } else { 0.0 }, prec))
            .collect();
        Self { dim, prec, data }
    }

    /// Entries read as their shortest decimal form, then each row divided by
    /// its sum, so that rows sum to one at this precision. Raw binary entries
    /// can leave the spectral radius off one by ~1e-15, which repeated
    /// squaring amplifies.
    pub fn from_stochastic(p: &StochasticMatrix, prec: usize) -> Self {
        let dim = p.dim();
        let mut data = Vec::with_capacity(dim * dim);
        for row in p.entries().chunks(dim) {
            let xs: Vec<ExtFloat> = row.iter().map(|&x| ExtFloat::from_f64_decimal(x, prec)).collect();
            let sum = xs.iter().fold(ExtFloat::zero(prec), |a, b| a.add(b));
            data.extend(xs.iter().map(|x| x.div(&sum)));
        }
        Self { dim, prec, data }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn precision(&self) -> usize {
        self.prec
    }

    pub fn get(&self, i: usize, j: usize) -> &ExtFloat {
        &self.data[i * self.dim + j]
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim, "dimension mismatch");
        let d = self.dim;
        let mut data = Vec::with_capacity(d * d);
        for i in 0..d {
            for j in 0..d {
                let mut acc = ExtFloat::zero(self.prec);
                for k in 0..d {
                    let a = &self.data[i * d + k];
                    let b = &other.data[k * d + j];
                    if a.is_zero() || b.is_zero() {
                        continue;
                    }
                    acc = acc.add(&a.mul(b));
                }
                data.push(acc);
            }
        }
        Self {
            dim: d,
            prec: self.prec,
            data,
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.sub(b))
            .collect();
        Self {
            dim: self.dim,
            prec: self.prec,
            data,
        }
    }

    /// `selfⁿ` by binary powering.
    pub fn pow(&self, n: u64) -> Self {
        let mut result = Self::identity(self.dim, self.prec);
        let mut base = self.clone();
        let mut e = n;
        while e > 0 {
            if e & 1 == 1 {
                result = result.mul(&base);
            }
            e >>= 1;
            if e > 0 {
                base = base.mul(&base);
            }
        }
        result
    }

    /// Largest absolute entry difference, as `f64`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.sub(other)
            .data
            .iter()
            .map(|x| x.to_f64().abs())
            .fold(0.0, f64::max)
    }

    /// Binary exponent of the largest entry of `self − other`; `None` when
    /// they are equal. Unlike [`Self::max_abs_diff`] this does not underflow.
    pub fn max_diff_exponent(&self, other: &Self) -> Option<i64> {
        self.sub(other).data.iter().filter_map(ExtFloat::exponent).max()
    }

    pub fn to_f64_rows(&self) -> Vec<Vec<f64>> {
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self.get(i, j).to_f64()).collect())
            .collect()
    }
}

#[cfg(test)]
#[allow(clippy::needless_range_loop)]
mod tests {
    use super::*;

    #[test]
    fn f64_round_trip() {
        for x in [3.0, 0.5, -0.3, 1e-300, 12345.678, -7.25e100] {
            assert_eq!(ExtFloat::from_f64(x, 128).to_f64(), x);
        }
    }

    #[test]
    fn rational_conversion_is_exact() {
        let r = ExtFloat::from_f64(0.75, 128).to_rational();
        assert_eq!(r, BigRational::new(BigInt::from(3), BigInt::from(4)));
        let r = ExtFloat::from_f64(-6.0, 128).to_rational();
        assert_eq!(r, BigRational::from_integer(BigInt::from(-6)));
    }

    #[test]
    fn log10_of_tiny_product() {
        let a = ExtFloat::from_f64(1e-300, 256);
        let v = a.mul(&a).mul(&ExtFloat::from_f64(3.0, 256));
        let l = v.log10_abs().unwrap();
        // 3e-600 is not exactly representable from binary 1e-300, so compare loosely.
        assert_eq!(l.characteristic(), -600);
        assert!((l.mantissa() - 3f64.log10()).abs() < 1e-12);
    }

    #[test]
    fn pow_matches_repeated_multiplication() {
        let p = StochasticMatrix::new(&[vec![0.7, 0.3], vec![0.4, 0.6]]).unwrap();
        let m = ExtMatrix::from_stochastic(&p, 128);
        let mut direct = ExtMatrix::identity(2, 128);
        for _ in 0..7 {
            direct = direct.mul(&m);
        }
        assert!(m.pow(7).max_abs_diff(&direct) < 1e-35);
    }
}
