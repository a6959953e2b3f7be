//! Double-double scalars: unevaluated sums hi + lo of two f64s giving
//! roughly 32 significant digits.
//!
//! The adversarial construction in [`crate::adversary`] drives the
//! covariance condition number up geometrically, so quantities like hᵀS†h
//! lose ~cond·ε of relative accuracy when evaluated in plain f64. The
//! certificates there are pinned to 1e−9, which only survives if the
//! bookkeeping is carried in extended precision. The error-free transforms
//! below are the classical TwoSum / TwoProd building blocks (TwoProd via
//! FMA).

use std::ops::{Add, Div, Mul, Neg, Sub};

/// An unevaluated f64 pair `hi + lo` with |lo| ≤ ulp(hi)/2.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dd {
    pub hi: f64,
    pub lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

/// Requires |a| ≥ |b| (or a == 0).
#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let err = b - (s - a);
    (s, err)
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    let err = a.mul_add(b, -p);
    (p, err)
}

impl Dd {
    pub const ZERO: Dd = Dd { hi: 0.0, lo: 0.0 };
    pub const ONE: Dd = Dd { hi: 1.0, lo: 0.0 };

    #[inline]
    pub fn new(hi: f64, lo: f64) -> Dd {
        let (s, e) = quick_two_sum(hi, lo);
        Dd { hi: s, lo: e }
    }

    #[inline]
    pub fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    /// Exact product of two f64 values.
    #[inline]
    pub fn prod(a: f64, b: f64) -> Dd {
        let (p, e) = two_prod(a, b);
        Dd { hi: p, lo: e }
    }

    pub fn abs(self) -> Dd {
        if self.hi < 0.0 || (self.hi == 0.0 && self.lo < 0.0) {
            -self
        } else {
            self
        }
    }

    /// √x to double-double accuracy (Karp's method); requires x ≥ 0.
    pub fn sqrt(self) -> Dd {
        if self.hi == 0.0 && self.lo == 0.0 {
            return Dd::ZERO;
        }
        debug_assert!(self.hi > 0.0, "sqrt of negative double-double");
        let approx = self.hi.sqrt();
        // one Newton correction: s + (x − s²)/(2s), with the residual formed
        // exactly
        let residual = self - Dd::prod(approx, approx);
        Dd::from(approx) + Dd::from(residual.to_f64() / (2.0 * approx))
    }
}

impl From<f64> for Dd {
    #[inline]
    fn from(v: f64) -> Dd {
        Dd { hi: v, lo: 0.0 }
    }
}

impl Neg for Dd {
    type Output = Dd;
    #[inline]
    fn neg(self) -> Dd {
        Dd {
            hi: -self.hi,
            lo: -self.lo,
        }
    }
}

impl Add for Dd {
    type Output = Dd;
    #[inline]
    fn add(self, rhs: Dd) -> Dd {
        let (s1, s2) = two_sum(self.hi, rhs.hi);
        let (t1, t2) = two_sum(self.lo, rhs.lo);
        let (s1, s2) = quick_two_sum(s1, s2 + t1);
        let (hi, lo) = quick_two_sum(s1, s2 + t2);
        Dd { hi, lo }
    }
}

impl Sub for Dd {
    type Output = Dd;
    #[inline]
    fn sub(self, rhs: Dd) -> Dd {
        self + (-rhs)
    }
}

impl Mul for Dd {
    type Output = Dd;
    #[inline]
    fn mul(self, rhs: Dd) -> Dd {
        let (p1, p2) = two_prod(self.hi, rhs.hi);
        let p2 = p2 + self.hi * rhs.lo + self.lo * rhs.hi;
        let (hi, lo) = quick_two_sum(p1, p2);
        Dd { hi, lo }
    }
}

impl Div for Dd {
    type Output = Dd;
    fn div(self, rhs: Dd) -> Dd {
        let q1 = self.hi / rhs.hi;
        let r = self - rhs * Dd::from(q1);
        let q2 = r.hi / rhs.hi;
        let r = r - rhs * Dd::from(q2);
        let q3 = r.hi / rhs.hi;
        let (s, e) = quick_two_sum(q1, q2);
        Dd::new(s, e + q3)
    }
}

/// Dot product of double-double vectors.
pub fn dot(a: &[Dd], b: &[Dd]) -> Dd {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).fold(Dd::ZERO, |acc, (&x, &y)| acc + x * y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_product_splits() {
        let p = Dd::prod(1.0 + 2f64.powi(-30), 1.0 + 2f64.powi(-30));
        // (1+u)² = 1 + 2u + u²; u² = 2^-60 is below f64 resolution of hi
        assert_eq!(p.hi, 1.0 + 2f64.powi(-29));
        assert_eq!(p.lo, 2f64.powi(-60));
    }

    #[test]
    fn addition_keeps_small_terms() {
        let big = Dd::from(1e20);
        let one = Dd::from(1.0);
        let back = (big + one) - big;
        assert_eq!(back.to_f64(), 1.0);
    }

    #[test]
    fn division_and_sqrt_roundtrip() {
        let x = Dd::from(2.0);
        let r = x.sqrt();
        let err = (r * r - x).to_f64().abs();
        assert!(err < 1e-30);

        let q = Dd::from(1.0) / Dd::from(3.0);
        let err = (q * Dd::from(3.0) - Dd::ONE).to_f64().abs();
        assert!(err < 1e-30);
    }

    #[test]
    fn dot_cancellation() {
        // sum of products that cancels to 1 despite 1e16-scale terms
        let a = [Dd::from(1e16), Dd::from(1.0), Dd::from(-1e16)];
        let b = [Dd::from(1.0), Dd::from(1.0), Dd::from(1.0)];
        assert_eq!(dot(&a, &b).to_f64(), 1.0);
    }
}
