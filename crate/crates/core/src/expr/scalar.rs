use std::collections::HashMap;
use std::fmt::Debug;
use std::ops::{Add, Div, Mul, Neg, Sub};

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{FromPrimitive, One, Signed, ToPrimitive, Zero};

use super::{DoubleDouble, Var};

/// Numeric field expressions can be evaluated in: `f64`,
/// [`DoubleDouble`], or exact [`BigRational`].
pub trait Scalar:
    Clone
    + Debug
    + PartialEq
    + PartialOrd
    + Add<Output = Self>
    + Sub<Output = Self>
    + Mul<Output = Self>
    + Div<Output = Self>
    + Neg<Output = Self>
    + Zero
    + One
{
    fn from_bigint(n: &BigInt) -> Self;
    fn from_rational(r: &BigRational) -> Self;
    fn from_f64(x: f64) -> Self;
    fn as_f64(&self) -> f64;
    fn magnitude(&self) -> Self;

    fn from_i64(n: i64) -> Self {
        Self::from_bigint(&BigInt::from(n))
    }

    fn powi(&self, e: i32) -> Self {
        let mut result = Self::one();
        let mut base = if e < 0 {
            Self::one() / self.clone()
        } else {
            self.clone()
        };
        let mut k = e.unsigned_abs();
        while k > 0 {
            if k & 1 == 1 {
                result = result * base.clone();
            }
            k >>= 1;
            if k > 0 {
                base = base.clone() * base;
            }
        }
        result
    }
}

impl Scalar for f64 {
    fn from_bigint(n: &BigInt) -> Self {
        n.to_f64().unwrap_or(f64::NAN)
    }
    fn from_rational(r: &BigRational) -> Self {
        ToPrimitive::to_f64(r).unwrap_or(f64::NAN)
    }
    fn from_f64(x: f64) -> Self {
        x
    }
    fn as_f64(&self) -> f64 {
        *self
    }
    fn magnitude(&self) -> Self {
        f64::abs(*self)
    }
    fn powi(&self, e: i32) -> Self {
        f64::powi(*self, e)
    }
}

fn bigint_to_double(n: &BigInt) -> DoubleDouble {
    let hi = n.to_f64().unwrap_or(f64::NAN);
    if !hi.is_finite() {
        return DoubleDouble::from(hi);
    }
    let rest = n - BigInt::from_f64(hi).expect("finite");
    DoubleDouble::new_add(hi, rest.to_f64().unwrap_or(0.0))
}

impl Scalar for DoubleDouble {
    fn from_bigint(n: &BigInt) -> Self {
        bigint_to_double(n)
    }
    fn from_rational(r: &BigRational) -> Self {
        bigint_to_double(r.numer()) / bigint_to_double(r.denom())
    }
    fn from_f64(x: f64) -> Self {
        DoubleDouble::from(x)
    }
    fn as_f64(&self) -> f64 {
        f64::from(*self)
    }
    fn magnitude(&self) -> Self {
        if self.hi() < 0.0 {
            -*self
        } else {
            *self
        }
    }
}

impl Scalar for BigRational {
    fn from_bigint(n: &BigInt) -> Self {
        BigRational::from_integer(n.clone())
    }
    fn from_rational(r: &BigRational) -> Self {
        r.clone()
    }
    fn from_f64(x: f64) -> Self {
        BigRational::from_float(x).unwrap_or_else(<BigRational as Zero>::zero)
    }
    fn as_f64(&self) -> f64 {
        ToPrimitive::to_f64(self).unwrap_or(f64::NAN)
    }
    fn magnitude(&self) -> Self {
        Signed::abs(self)
    }
}

/// Values for the variables of an expression.
#[derive(Clone, Debug, PartialEq)]
pub struct Binding<T> {
    values: HashMap<Var, T>,
}

impl<T> Default for Binding<T> {
    fn default() -> Self {
        Binding {
            values: HashMap::new(),
        }
    }
}

impl<T> Binding<T> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, v: Var, value: T) -> Option<T> {
        self.values.insert(v, value)
    }

    pub fn with(mut self, v: Var, value: T) -> Self {
        self.values.insert(v, value);
        self
    }

    pub fn get(&self, v: &Var) -> Option<&T> {
        self.values.get(v)
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.values.contains_key(v)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Var, &T)> {
        self.values.iter()
    }
}

impl<T> FromIterator<(Var, T)> for Binding<T> {
    fn from_iter<I: IntoIterator<Item = (Var, T)>>(iter: I) -> Self {
        Binding {
            values: iter.into_iter().collect(),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn double_double_keeps_extra_digits() {
        let third = <DoubleDouble as Scalar>::from_rational(&BigRational::new(1.into(), 3.into()));
        let back = third * DoubleDouble::from(3.0) - DoubleDouble::from(1.0);
        assert!(back.as_f64().abs() < 1e-30, "{back:?}");
        let big = BigInt::from(10).pow(20) + BigInt::from(1);
        let t = <DoubleDouble as Scalar>::from_bigint(&big);
        assert_eq!(t.lo(), 1.0);
    }

    #[test]
    fn powi_negative() {
        let r = BigRational::new(2.into(), 3.into());
        assert_eq!(Scalar::powi(&r, -2), BigRational::new(9.into(), 4.into()));
    }
}
