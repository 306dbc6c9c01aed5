//! Canonical rational functions.
//!
//! A [`RationalFunction`] is `num / den` with `gcd(num, den) = 1`, integer
//! coefficients whose overall integer content is 1, and a denominator with
//! positive leading coefficient. Under these rules every rational function
//! has exactly one representation, so structural equality is mathematical
//! equality.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use num_bigint::BigInt;
use num_integer::Integer;
use num_rational::BigRational;
use num_traits::{One, Signed};

use super::gcd::gcd;
use super::poly::Poly;
use super::{product, quotient, sum, Binding, ExprError, Expression, Scalar, Var};

#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct RationalFunction {
    num: Poly,
    den: Poly,
}

impl RationalFunction {
    pub fn zero() -> Self {
        RationalFunction {
            num: Poly::zero(),
            den: Poly::one(),
        }
    }

    pub fn one() -> Self {
        RationalFunction {
            num: Poly::one(),
            den: Poly::one(),
        }
    }

    pub fn int(n: i64) -> Self {
        RationalFunction {
            num: Poly::constant(n.into()),
            den: Poly::one(),
        }
    }

    pub fn var(v: Var) -> Self {
        RationalFunction {
            num: Poly::var(v),
            den: Poly::one(),
        }
    }

    pub fn from_rational(r: &BigRational) -> Self {
        RationalFunction {
            num: Poly::constant(r.numer().clone()),
            den: Poly::constant(r.denom().clone()),
        }
    }

    pub fn from_poly(p: Poly) -> Self {
        RationalFunction {
            num: p,
            den: Poly::one(),
        }
    }

    /// `num / den` reduced to canonical form; `None` if `den` is zero.
    pub fn new(num: Poly, den: Poly) -> Option<Self> {
        if den.is_zero() {
            return None;
        }
        if num.is_zero() {
            return Some(RationalFunction::zero());
        }
        let g = gcd(&num, &den);
        if g.is_one() {
            Some(Self::canonical(num, den))
        } else {
            Some(Self::canonical(
                num.div_exact(&g).expect("gcd divides numerator"),
                den.div_exact(&g).expect("gcd divides denominator"),
            ))
        }
    }

    /// Fixes integer content and sign of an already coprime pair.
    fn canonical(num: Poly, den: Poly) -> Self {
        if num.is_zero() {
            return RationalFunction::zero();
        }
        if let Some(c) = den.as_constant() {
            // constant denominators: keep integer numerator over positive integer
            let cn = num.content().abs();
            let g = cn.gcd(&c);
            let mut num = num.div_scalar_exact(&g);
            let mut d = c / &g;
            if d.is_negative() {
                num = -&num;
                d = -d;
            }
            return RationalFunction {
                num,
                den: Poly::constant(d),
            };
        }
        let g = num.content().abs().gcd(&den.content().abs());
        let (mut num, mut den) = if g.is_one() {
            (num, den)
        } else {
            (num.div_scalar_exact(&g), den.div_scalar_exact(&g))
        };
        if den.leading().is_some_and(|(_, c)| c.is_negative()) {
            num = -&num;
            den = -&den;
        }
        RationalFunction { num, den }
    }

    pub fn numerator(&self) -> &Poly {
        &self.num
    }

    pub fn denominator(&self) -> &Poly {
        &self.den
    }

    pub fn is_zero(&self) -> bool {
        self.num.is_zero()
    }

    pub fn is_one(&self) -> bool {
        self.num.is_one() && self.den.is_one()
    }

    /// The value if no variable occurs.
    pub fn as_constant(&self) -> Option<BigRational> {
        let n = self.num.as_constant()?;
        let d = self.den.as_constant()?;
        Some(BigRational::new(n, d))
    }

    pub fn vars(&self) -> BTreeSet<Var> {
        let mut v = self.num.vars();
        v.extend(self.den.vars());
        v
    }

    pub fn contains(&self, v: &Var) -> bool {
        self.num.contains(v) || self.den.contains(v)
    }

    pub fn checked_div(&self, rhs: &RationalFunction) -> Option<RationalFunction> {
        Some(self * &rhs.recip()?)
    }

    pub fn recip(&self) -> Option<RationalFunction> {
        if self.is_zero() {
            return None;
        }
        Some(Self::canonical(self.den.clone(), self.num.clone()))
    }

    pub fn powi(&self, e: i32) -> Option<RationalFunction> {
        let base = if e < 0 { self.recip()? } else { self.clone() };
        let k = e.unsigned_abs();
        Some(RationalFunction {
            num: base.num.pow(k),
            den: base.den.pow(k),
        })
    }

    pub fn scale(&self, c: &BigRational) -> RationalFunction {
        self * &RationalFunction::from_rational(c)
    }

    /// Partial derivative with respect to `v`.
    pub fn diff(&self, v: &Var) -> RationalFunction {
        let dn = self.num.diff(v);
        let dd = self.den.diff(v);
        if dd.is_zero() {
            return Self::new(dn, self.den.clone()).expect("nonzero denominator");
        }
        let top = &(&dn * &self.den) - &(&self.num * &dd);
        // gcd(top, den^2) only involves factors of den
        Self::new(top, self.den.pow(2)).expect("nonzero denominator")
    }

    /// Index shift by `k`: `m -> m + k`, stencil offsets `j -> j + k`.
    pub fn shift(&self, k: i32) -> RationalFunction {
        if k == 0 {
            return self.clone();
        }
        let m_plus_k = &Poly::var(Var::Index) + &Poly::constant(k.into());
        let f = |p: &Poly| p.map_vars(|v| v.shifted(k)).compose(&Var::Index, &m_plus_k);
        Self::canonical(f(&self.num), f(&self.den))
    }

    /// Renames variables; `rename` must be injective on the variables present.
    pub fn rename(&self, rename: impl Fn(&Var) -> Var + Copy) -> RationalFunction {
        Self::canonical(self.num.map_vars(rename), self.den.map_vars(rename))
    }

    /// Replaces `v` by `with`. `None` if the result has a zero denominator.
    pub fn substitute(&self, v: &Var, with: &RationalFunction) -> Option<RationalFunction> {
        if !self.contains(v) {
            return Some(self.clone());
        }
        let (p, q) = (&with.num, &with.den);
        let dn = self.num.degree_in(v);
        let dd = self.den.degree_in(v);
        let num = homogenized(&self.num, v, p, q, dn);
        let den = homogenized(&self.den, v, p, q, dd);
        if dd >= dn {
            Self::new(&num * &q.pow(dd - dn), den)
        } else {
            Self::new(num, &den * &q.pow(dn - dd))
        }
    }

    /// Substitutes every key of `map`. The replacement expressions must not
    /// contain any of the keys.
    pub fn substitute_all(
        &self,
        map: &BTreeMap<Var, RationalFunction>,
    ) -> Option<RationalFunction> {
        let mut out = self.clone();
        for (v, r) in map {
            debug_assert!(map.keys().all(|k| !r.contains(k)));
            out = out.substitute(v, r)?;
        }
        Some(out)
    }

    pub fn eval<T: Scalar>(&self, b: &Binding<T>) -> Result<T, ExprError> {
        let d = self.den.eval(b)?;
        if d.is_zero() {
            return Err(ExprError::DivisionByZero(self.to_string()));
        }
        Ok(self.num.eval(b)? / d)
    }

    pub fn to_expression(&self) -> Expression {
        let num = poly_to_expression(&self.num);
        match self.den.as_constant() {
            Some(d) if d.is_one() => num,
            Some(d) => match self.num.as_constant() {
                Some(n) => Expression::Rational(BigRational::new(n, d)),
                None => quotient(num, Expression::Rational(BigRational::from_integer(d))),
            },
            None => quotient(num, poly_to_expression(&self.den)),
        }
    }
}

/// `Σ a_k p^k q^(d-k)` for `poly = Σ a_k v^k`.
fn homogenized(poly: &Poly, v: &Var, p: &Poly, q: &Poly, d: u32) -> Poly {
    let coeffs = poly.coeffs_in(v);
    let mut p_pows = vec![Poly::one()];
    let mut q_pows = vec![Poly::one()];
    for _ in 0..d {
        let next_p = p_pows.last().expect("seeded") * p;
        p_pows.push(next_p);
        let next_q = q_pows.last().expect("seeded") * q;
        q_pows.push(next_q);
    }
    let mut acc = Poly::zero();
    for (k, a) in coeffs {
        let k = k as usize;
        let term = &(&a * &p_pows[k]) * &q_pows[d as usize - k];
        acc = &acc + &term;
    }
    acc
}

fn poly_to_expression(p: &Poly) -> Expression {
    if p.is_zero() {
        return Expression::zero();
    }
    let terms = p
        .terms()
        .rev()
        .map(|(m, c)| {
            let mut factors = vec![Expression::Rational(BigRational::from_integer(c.clone()))];
            for (v, e) in m.factors() {
                factors.push(Expression::var(v).pow(e as i32));
            }
            product(factors)
        })
        .collect();
    sum(terms)
}

impl std::ops::Add<&RationalFunction> for &RationalFunction {
    type Output = RationalFunction;
    fn add(self, rhs: &RationalFunction) -> RationalFunction {
        if self.is_zero() {
            return rhs.clone();
        }
        if rhs.is_zero() {
            return self.clone();
        }
        if self.den.is_one() && rhs.den.is_one() {
            return RationalFunction::canonical(&self.num + &rhs.num, Poly::one());
        }
        // a/b + c/d with g = gcd(b, d): the sum's gcd can only involve g
        let g = gcd(&self.den, &rhs.den);
        let b1 = self.den.div_exact(&g).expect("gcd divides");
        let d1 = rhs.den.div_exact(&g).expect("gcd divides");
        let num = &(&self.num * &d1) + &(&rhs.num * &b1);
        if num.is_zero() {
            return RationalFunction::zero();
        }
        let den = &(&b1 * &d1) * &g;
        if g.as_constant().is_some() {
            return RationalFunction::canonical(num, den);
        }
        let h = gcd(&num, &g);
        if h.is_one() {
            RationalFunction::canonical(num, den)
        } else {
            RationalFunction::canonical(
                num.div_exact(&h).expect("gcd divides"),
                den.div_exact(&h).expect("gcd divides"),
            )
        }
    }
}

impl std::ops::Neg for &RationalFunction {
    type Output = RationalFunction;
    fn neg(self) -> RationalFunction {
        RationalFunction {
            num: -&self.num,
            den: self.den.clone(),
        }
    }
}

impl std::ops::Sub<&RationalFunction> for &RationalFunction {
    type Output = RationalFunction;
    fn sub(self, rhs: &RationalFunction) -> RationalFunction {
        self + &(-rhs)
    }
}

impl std::ops::Mul<&RationalFunction> for &RationalFunction {
    type Output = RationalFunction;
    fn mul(self, rhs: &RationalFunction) -> RationalFunction {
        if self.is_zero() || rhs.is_zero() {
            return RationalFunction::zero();
        }
        let g1 = gcd(&self.num, &rhs.den);
        let g2 = gcd(&rhs.num, &self.den);
        let a = self.num.div_exact(&g1).expect("gcd divides");
        let d = rhs.den.div_exact(&g1).expect("gcd divides");
        let c = rhs.num.div_exact(&g2).expect("gcd divides");
        let b = self.den.div_exact(&g2).expect("gcd divides");
        RationalFunction::canonical(&a * &c, &b * &d)
    }
}

impl fmt::Display for RationalFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.to_expression())
    }
}

impl From<BigInt> for RationalFunction {
    fn from(n: BigInt) -> Self {
        RationalFunction::from_poly(Poly::constant(n))
    }
}
