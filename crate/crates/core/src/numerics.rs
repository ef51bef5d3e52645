//! Small numeric kernels shared by the cover, cost and estimation modules:
//! error-free transformations, a double-double accumulator, least-squares
//! slopes and the Wilson score interval.

use std::ops::{Add, AddAssign};

/// `a + b = s + err` exactly.
#[inline]
pub fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// `a * b = p + err` exactly (barring overflow/underflow).
#[inline]
pub fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

/// Unevaluated sum `hi + lo` with `|lo| <= ulp(hi) / 2`; roughly 106 bits of
/// significand.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct DoubleDouble {
    pub hi: f64,
    pub lo: f64,
}

impl DoubleDouble {
    pub const ZERO: DoubleDouble = DoubleDouble { hi: 0.0, lo: 0.0 };

    pub fn from_f64(v: f64) -> Self {
        DoubleDouble { hi: v, lo: 0.0 }
    }

    pub fn value(self) -> f64 {
        self.hi + self.lo
    }

    pub fn mul_f64(self, b: f64) -> Self {
        let (p, e) = two_prod(self.hi, b);
        let e = e + self.lo * b;
        let (hi, lo) = two_sum(p, e);
        DoubleDouble { hi, lo }
    }

    /// Strict comparison `self < b` using both limbs.
    pub fn lt_f64(self, b: f64) -> bool {
        self.hi < b || (self.hi == b && self.lo < 0.0)
    }
}

impl Add<f64> for DoubleDouble {
    type Output = DoubleDouble;

    fn add(self, b: f64) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, b);
        let e = e + self.lo;
        let (hi, lo) = two_sum(s, e);
        DoubleDouble { hi, lo }
    }
}

impl Add for DoubleDouble {
    type Output = DoubleDouble;

    fn add(self, b: DoubleDouble) -> DoubleDouble {
        let (s, e) = two_sum(self.hi, b.hi);
        let e = e + self.lo + b.lo;
        let (hi, lo) = two_sum(s, e);
        DoubleDouble { hi, lo }
    }
}

impl AddAssign<f64> for DoubleDouble {
    fn add_assign(&mut self, b: f64) {
        *self = *self + b;
    }
}

impl std::iter::Sum<f64> for DoubleDouble {
    fn sum<I: Iterator<Item = f64>>(iter: I) -> Self {
        iter.fold(DoubleDouble::ZERO, |acc, x| acc + x)
    }
}

/// Largest integer `k` with `0 < v <= 2^-k`. Exact for every positive finite `v`.
pub fn largest_dyadic_exponent(v: f64) -> i64 {
    debug_assert!(v > 0.0 && v.is_finite());
    let (mantissa_is_half, exp) = frexp_is_half(v);
    // v = m * 2^exp with m in [1/2, 1)
    if mantissa_is_half {
        1 - exp
    } else {
        -exp
    }
}

fn frexp_is_half(v: f64) -> (bool, i64) {
    let mut v = v;
    let mut shift = 0i64;
    if v < f64::MIN_POSITIVE {
        v *= 2f64.powi(64);
        shift = -64;
    }
    let bits = v.to_bits();
    let biased = ((bits >> 52) & 0x7ff) as i64;
    let frac = bits & ((1u64 << 52) - 1);
    // v = 1.frac * 2^(biased-1023) = 0.1frac * 2^(biased-1022)
    (frac == 0, biased - 1022 + shift)
}

/// Ordinary least-squares slope of `ys` against `xs`.
pub fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    if xs.len() < 2 {
        return f64::NAN;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    sxy / sxx
}

/// Two-sided 95% normal quantile.
pub const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `successes` out of `trials`.
pub fn wilson_interval(successes: u64, trials: u64, z: f64) -> (f64, f64) {
    if trials == 0 {
        return (0.0, 1.0);
    }
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

/// Binomial coefficient, `None` on overflow.
pub fn binomial(n: u64, k: u64) -> Option<u128> {
    if k > n {
        return Some(0);
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc.checked_mul((n - i) as u128)? / (i as u128 + 1);
    }
    Some(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dyadic_exponent_exact_on_powers_and_between() {
        assert_eq!(largest_dyadic_exponent(1.0), 0);
        assert_eq!(largest_dyadic_exponent(0.5), 1);
        assert_eq!(largest_dyadic_exponent(0.3), 1);
        assert_eq!(largest_dyadic_exponent(0.02), 5);
        assert_eq!(largest_dyadic_exponent(2f64.powi(-40)), 40);
        assert_eq!(largest_dyadic_exponent(2f64.powi(-40) * 1.000001), 39);
        assert_eq!(largest_dyadic_exponent(1.5), -1);
        assert_eq!(largest_dyadic_exponent(f64::MIN_POSITIVE / 8.0), 1025);
    }

    #[test]
    fn compensated_sum_recovers_small_terms() {
        let mut s = DoubleDouble::from_f64(1e200);
        for _ in 0..1000 {
            s += 1.0;
        }
        s += -1e200;
        assert_eq!(s.value(), 1000.0);
    }

    #[test]
    fn slope_of_line() {
        let xs: Vec<f64> = (0..10).map(|i| i as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 * x - 2.0).collect();
        assert!((least_squares_slope(&xs, &ys) - 3.0).abs() < 1e-12);
    }

    #[test]
    fn wilson_brackets_estimate() {
        let (lo, hi) = wilson_interval(50, 100, Z_95);
        assert!(lo < 0.5 && hi > 0.5);
        let (lo, hi) = wilson_interval(100, 100, Z_95);
        assert!(lo > 0.95 && hi == 1.0);
    }

    #[test]
    fn binomials() {
        assert_eq!(binomial(9, 2), Some(36));
        assert_eq!(binomial(4, 1), Some(4));
        assert_eq!(binomial(3, 5), Some(0));
    }
}
