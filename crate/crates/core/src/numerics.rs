//! Small floating-point helpers shared by the log-domain code paths.

/// A value stored as an unevaluated sum `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const fn new(hi: f64, lo: f64) -> Self {
        Self { hi, lo }
    }

    pub fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    /// Splits `n · self` into an integer part and a fraction in `[0, 1)`.
    ///
    /// The product `n · hi` is formed exactly with a fused multiply-add, so
    /// the only rounding in the fraction comes from the final additions.
    pub fn split_scaled(self, n: u64) -> (i64, f64) {
        let nf = n as f64;
        let p = nf * self.hi;
        let e = nf.mul_add(self.hi, -p);
        let t = nf * self.lo + e;
        split_sum(p, t)
    }
}

/// Error-free transformation of `a + b` into `(s, err)`.
#[inline]
pub(crate) fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Returns `(k, f)` with `k` integer, `f ∈ [0,1)` and `k + f ≈ big + small`.
///
/// `big` may be large; `small` should be of moderate size. The integer part of
/// `big` is removed exactly before `small` is added.
pub(crate) fn split_sum(big: f64, small: f64) -> (i64, f64) {
    let kb = big.floor();
    let fb = big - kb;
    let t = fb + small;
    let kt = t.floor();
    let mut f = t - kt;
    let mut k = kb as i64 + kt as i64;
    if f >= 1.0 {
        f -= 1.0;
        k += 1;
    }
    if f < 0.0 {
        f += 1.0;
        k -= 1;
    }
    (k, f)
}

/// Neumaier compensated summation.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, x: f64) {
        let (s, e) = two_sum(self.sum, x);
        self.sum = s;
        self.comp += e;
    }

    pub fn hi_lo(&self) -> (f64, f64) {
        two_sum(self.sum, self.comp)
    }
}

/// `x mod 1` in `[0, 1)`.
#[inline]
pub(crate) fn frac(x: f64) -> f64 {
    let f = x - x.floor();
    if f >= 1.0 {
        0.0
    } else {
        f
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_sum_handles_negative_values() {
        let (k, f) = split_sum(-0.3, 0.0);
        assert_eq!(k, -1);
        assert!((f - 0.7).abs() < 1e-15);
        let (k, f) = split_sum(-5229.0, 0.0);
        assert_eq!((k, f), (-5229, 0.0));
    }

    #[test]
    fn split_scaled_matches_integer_products() {
        let x = DoubleDouble::from_f64(0.25);
        assert_eq!(x.split_scaled(7), (1, 0.75));
        let x = DoubleDouble::from_f64(-0.5);
        assert_eq!(x.split_scaled(3), (-2, 0.5));
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = CompensatedSum::default();
        s.add(1e16);
        for _ in 0..10 {
            s.add(1.0);
        }
        s.add(-1e16);
        let (hi, lo) = s.hi_lo();
        assert_eq!(hi + lo, 10.0);
    }
}
