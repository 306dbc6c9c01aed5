//! Double-double arithmetic on top of [`TwoFloat`], with a corrected
//! quotient: the upstream `TwoFloat / TwoFloat` drops the low word of the
//! reciprocal residual and only reaches double precision.

use std::cmp::Ordering;
use std::fmt;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_traits::{One, Zero};
use twofloat::TwoFloat;

/// About 106 bits of significand, as an unevaluated sum `hi + lo`.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DoubleDouble(TwoFloat);

impl DoubleDouble {
    pub fn new_add(a: f64, b: f64) -> Self {
        DoubleDouble(TwoFloat::new_add(a, b))
    }

    pub fn hi(self) -> f64 {
        self.0.hi()
    }

    pub fn lo(self) -> f64 {
        self.0.lo()
    }

    pub fn is_finite(self) -> bool {
        self.0.hi().is_finite() && self.0.lo().is_finite()
    }
}

impl From<f64> for DoubleDouble {
    fn from(x: f64) -> Self {
        DoubleDouble(TwoFloat::from(x))
    }
}

impl From<DoubleDouble> for f64 {
    fn from(x: DoubleDouble) -> f64 {
        x.hi() + x.lo()
    }
}

impl PartialOrd for DoubleDouble {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        match self.hi().partial_cmp(&other.hi())? {
            Ordering::Equal => self.lo().partial_cmp(&other.lo()),
            o => Some(o),
        }
    }
}

impl Add for DoubleDouble {
    type Output = Self;
    fn add(self, rhs: Self) -> Self {
        DoubleDouble(self.0 + rhs.0)
    }
}

impl Sub for DoubleDouble {
    type Output = Self;
    fn sub(self, rhs: Self) -> Self {
        DoubleDouble(self.0 - rhs.0)
    }
}

impl Mul for DoubleDouble {
    type Output = Self;
    fn mul(self, rhs: Self) -> Self {
        DoubleDouble(self.0 * rhs.0)
    }
}

impl Div for DoubleDouble {
    type Output = Self;
    fn div(self, rhs: Self) -> Self {
        let b = rhs.0;
        let q1 = self.0.hi() / b.hi();
        if !q1.is_finite() || q1 == 0.0 {
            return DoubleDouble::from(q1);
        }
        let r = self.0 - b * q1;
        let q2 = r.hi() / b.hi();
        let r = r - b * q2;
        let q3 = r.hi() / b.hi();
        DoubleDouble(TwoFloat::new_add(q1, q2) + q3)
    }
}

impl Neg for DoubleDouble {
    type Output = Self;
    fn neg(self) -> Self {
        DoubleDouble(-self.0)
    }
}

impl Zero for DoubleDouble {
    fn zero() -> Self {
        DoubleDouble::from(0.0)
    }
    fn is_zero(&self) -> bool {
        self.hi() == 0.0 && self.lo() == 0.0
    }
}

impl One for DoubleDouble {
    fn one() -> Self {
        DoubleDouble::from(1.0)
    }
}

impl fmt::Display for DoubleDouble {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:e}", f64::from(*self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quotients_keep_the_low_word() {
        let one = DoubleDouble::from(1.0);
        let three = DoubleDouble::from(3.0);
        let third = one / three;
        assert!(third.lo() != 0.0);
        assert!(f64::from(third * three - one).abs() < 1e-31);

        let a = DoubleDouble::new_add(7.0, 1e-20);
        let b = DoubleDouble::new_add(0.3, -2e-18);
        let back = (a / b) * b - a;
        assert!(f64::from(back).abs() < 1e-30, "{back:?}");
    }

    #[test]
    fn ordering_uses_both_words() {
        let a = DoubleDouble::new_add(1.0, 1e-20);
        let b = DoubleDouble::from(1.0);
        assert!(a > b);
        assert!(-a < -b);
    }
}
