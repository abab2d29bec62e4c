//! Double-double arithmetic for the log-weight recursion.
//!
//! Near the fixed point the deviation from it is many orders of magnitude
//! smaller than the log-weights themselves; plain `f64` loses the deviation
//! to rounding after a dozen contractive steps. Only the handful of
//! operations the recursion needs are provided.

use std::ops::{Add, Mul, Sub};

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct Twofold {
    hi: f64,
    lo: f64,
}

#[inline]
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let bb = s - a;
    let err = (a - (s - bb)) + (b - bb);
    (s, err)
}

#[inline]
fn quick_two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    (s, b - (s - a))
}

#[inline]
fn two_prod(a: f64, b: f64) -> (f64, f64) {
    let p = a * b;
    (p, a.mul_add(b, -p))
}

impl Twofold {
    pub(crate) const ZERO: Twofold = Twofold { hi: 0.0, lo: 0.0 };

    pub(crate) fn from_f64(x: f64) -> Self {
        Self { hi: x, lo: 0.0 }
    }

    pub(crate) fn to_f64(self) -> f64 {
        self.hi + self.lo
    }

    pub(crate) fn product(a: f64, b: f64) -> Self {
        let (hi, lo) = two_prod(a, b);
        Self { hi, lo }
    }

    pub(crate) fn difference(a: f64, b: f64) -> Self {
        let (hi, lo) = two_sum(a, -b);
        Self { hi, lo }
    }

    pub(crate) fn scale(self, k: f64) -> Self {
        let (p, e) = two_prod(self.hi, k);
        let e = e + self.lo * k;
        let (hi, lo) = quick_two_sum(p, e);
        Self { hi, lo }
    }

    pub(crate) fn div(self, other: Twofold) -> Self {
        let q1 = self.hi / other.hi;
        let r = self - other.scale(q1);
        let q2 = r.hi / other.hi;
        let r = r - other.scale(q2);
        let q3 = r.hi / other.hi;
        let (hi, lo) = quick_two_sum(q1, q2);
        Twofold { hi, lo } + Twofold::from_f64(q3)
    }
}

impl Add for Twofold {
    type Output = Twofold;

    fn add(self, o: Twofold) -> Twofold {
        let (s, e) = two_sum(self.hi, o.hi);
        let (t, f) = two_sum(self.lo, o.lo);
        let e = e + t;
        let (s, e) = quick_two_sum(s, e);
        let e = e + f;
        let (hi, lo) = quick_two_sum(s, e);
        Twofold { hi, lo }
    }
}

impl Sub for Twofold {
    type Output = Twofold;

    fn sub(self, o: Twofold) -> Twofold {
        self + Twofold {
            hi: -o.hi,
            lo: -o.lo,
        }
    }
}

impl Mul<f64> for Twofold {
    type Output = Twofold;

    fn mul(self, k: f64) -> Twofold {
        self.scale(k)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn keeps_bits_lost_by_f64() {
        let big = Twofold::from_f64(1e16);
        let sum = big + Twofold::from_f64(1.0);
        assert_eq!((sum - big).to_f64(), 1.0);
        assert_eq!((1e16 + 1.0) - 1e16, 0.0);
    }

    #[test]
    fn division_is_accurate() {
        let third = Twofold::from_f64(1.0).div(Twofold::from_f64(3.0));
        let back = third * 3.0 - Twofold::from_f64(1.0);
        assert!(back.to_f64().abs() < 1e-30);

        let num = Twofold::product(0.3, -std::f64::consts::LN_10);
        let den = Twofold::difference(1.0, 0.3);
        let q = num.div(den);
        let check = q.scale(0.7) - num;
        // den is exactly 0.7 only up to the representation of 0.3
        assert!((q.to_f64() - 0.3 * -std::f64::consts::LN_10 / 0.7).abs() < 1e-15);
        assert!(check.to_f64().abs() < 1e-15);
    }
}
