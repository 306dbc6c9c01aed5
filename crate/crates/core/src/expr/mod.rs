//! Symbolic expressions over jet variables, stencil variables, the lattice
//! index `m` and named constants.
//!
//! [`Expression`] is a plain syntax tree: it keeps whatever shape it was
//! built with, which matters for numerics (a factored difference quotient
//! evaluates far more accurately than its expanded normal form). Exact
//! algebra happens on [`RationalFunction`], the canonical quotient of two
//! integer polynomials; [`normalize`] and [`equivalent`] bridge the two.

mod double;
mod equiv;
mod gcd;
mod parse;
mod poly;
mod rational;
mod scalar;

use std::collections::BTreeSet;
use std::fmt;
use std::sync::Arc;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed, Zero};
use thiserror::Error;

pub use double::DoubleDouble;
pub use equiv::{equivalent, sample_point, EquivalenceCheck};
pub use gcd::gcd;
pub use parse::{parse, ParseError, ParseErrorKind};
pub use poly::{Monomial, Poly};
pub use rational::RationalFunction;
pub use scalar::{Binding, Scalar};

/// Dependent-variable family. `X` and `U` are the independent and dependent
/// variables; `V` and `W` are the adjoint variables attached to the equation
/// and to the mesh equation respectively.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Family {
    X,
    U,
    V,
    W,
}

impl Family {
    pub fn letter(self) -> char {
        match self {
            Family::X => 'x',
            Family::U => 'u',
            Family::V => 'v',
            Family::W => 'w',
        }
    }
}

/// A symbol an expression can depend on.
///
/// The derived ordering (index, constants by name, stencil variables by
/// family and offset, jet variables by family and order) is the variable
/// order used for canonical forms.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Index,
    Const(Arc<str>),
    Stencil(Family, i32),
    Jet(Family, u32),
}

impl Var {
    pub fn constant(name: &str) -> Var {
        Var::Const(Arc::from(name))
    }

    pub fn x(offset: i32) -> Var {
        Var::Stencil(Family::X, offset)
    }

    pub fn u(offset: i32) -> Var {
        Var::Stencil(Family::U, offset)
    }

    /// The independent variable of jet space.
    pub fn jet_x() -> Var {
        Var::Jet(Family::X, 0)
    }

    pub fn jet_u(order: u32) -> Var {
        Var::Jet(Family::U, order)
    }

    pub fn jet_v(order: u32) -> Var {
        Var::Jet(Family::V, order)
    }

    pub fn stencil_family(&self) -> Option<(Family, i32)> {
        match self {
            Var::Stencil(f, k) => Some((*f, *k)),
            _ => None,
        }
    }

    pub fn jet_family(&self) -> Option<(Family, u32)> {
        match self {
            Var::Jet(f, k) => Some((*f, *k)),
            _ => None,
        }
    }

    /// Image of the variable under a shift of the lattice index by `k`,
    /// for variables that shift by renaming (everything except `m`).
    pub(crate) fn shifted(&self, k: i32) -> Var {
        match self {
            Var::Stencil(f, j) => Var::Stencil(*f, j + k),
            other => other.clone(),
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Var::Index => write!(f, "m"),
            Var::Const(name) => write!(f, "{name}"),
            Var::Stencil(fam, k) => write!(f, "{}[{}]", fam.letter(), k),
            Var::Jet(fam, k) => {
                write!(f, "{}", fam.letter())?;
                for _ in 0..*k {
                    write!(f, "'")?;
                }
                Ok(())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ExprError {
    #[error("unbound variable {0}")]
    Unbound(Var),
    #[error("division by zero in {0}")]
    DivisionByZero(String),
    #[error("{0} has no polynomial solution for {1}")]
    NotSolvable(String, Var),
}

/// Immutable symbolic expression tree.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum Expression {
    Rational(BigRational),
    Const(Arc<str>),
    Index,
    Jet(Family, u32),
    Stencil(Family, i32),
    Sum(Vec<Expression>),
    Product(Vec<Expression>),
    Power(Box<Expression>, i32),
    Quotient(Box<Expression>, Box<Expression>),
}

impl Expression {
    pub fn zero() -> Self {
        Expression::Rational(BigRational::zero())
    }

    pub fn one() -> Self {
        Expression::Rational(BigRational::one())
    }

    pub fn int(n: i64) -> Self {
        Expression::Rational(BigRational::from_integer(BigInt::from(n)))
    }

    pub fn rational(num: i64, den: i64) -> Self {
        Expression::Rational(BigRational::new(num.into(), den.into()))
    }

    pub fn var(v: &Var) -> Self {
        match v {
            Var::Index => Expression::Index,
            Var::Const(name) => Expression::Const(name.clone()),
            Var::Stencil(f, k) => Expression::Stencil(*f, *k),
            Var::Jet(f, k) => Expression::Jet(*f, *k),
        }
    }

    pub fn u(offset: i32) -> Self {
        Expression::Stencil(Family::U, offset)
    }

    pub fn x(offset: i32) -> Self {
        Expression::Stencil(Family::X, offset)
    }

    pub fn pow(self, e: i32) -> Self {
        match (self, e) {
            (_, 0) => Expression::one(),
            (b, 1) => b,
            (Expression::Rational(r), e) if !(r.is_zero() && e < 0) => {
                Expression::Rational(num_traits::pow::Pow::pow(&r, e))
            }
            (b, e) => Expression::Power(Box::new(b), e),
        }
    }

    pub fn as_rational(&self) -> Option<&BigRational> {
        match self {
            Expression::Rational(r) => Some(r),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expression::Rational(r) if r.is_zero())
    }

    fn is_one(&self) -> bool {
        matches!(self, Expression::Rational(r) if r.is_one())
    }

    /// Every variable occurring in the tree.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match self {
            Expression::Rational(_) => {}
            Expression::Const(n) => {
                out.insert(Var::Const(n.clone()));
            }
            Expression::Index => {
                out.insert(Var::Index);
            }
            Expression::Jet(f, k) => {
                out.insert(Var::Jet(*f, *k));
            }
            Expression::Stencil(f, k) => {
                out.insert(Var::Stencil(*f, *k));
            }
            Expression::Sum(xs) | Expression::Product(xs) => {
                xs.iter().for_each(|x| x.collect_vars(out));
            }
            Expression::Power(b, _) => b.collect_vars(out),
            Expression::Quotient(n, d) => {
                n.collect_vars(out);
                d.collect_vars(out);
            }
        }
    }

    /// Numeric value under `b` in double precision.
    pub fn evaluate(&self, b: &Binding<f64>) -> Result<f64, ExprError> {
        self.eval(b)
    }

    /// Numeric value in any [`Scalar`] type.
    pub fn eval<T: Scalar>(&self, b: &Binding<T>) -> Result<T, ExprError> {
        match self {
            Expression::Rational(r) => Ok(T::from_rational(r)),
            Expression::Const(_)
            | Expression::Index
            | Expression::Jet(..)
            | Expression::Stencil(..) => {
                let v = self.as_var().expect("atom");
                b.get(&v).cloned().ok_or(ExprError::Unbound(v))
            }
            Expression::Sum(xs) => {
                let mut acc = T::zero();
                for x in xs {
                    acc = acc + x.eval(b)?;
                }
                Ok(acc)
            }
            Expression::Product(xs) => {
                let mut acc = T::one();
                for x in xs {
                    acc = acc * x.eval(b)?;
                }
                Ok(acc)
            }
            Expression::Power(base, e) => {
                let v = base.eval(b)?;
                if *e < 0 && v.is_zero() {
                    return Err(ExprError::DivisionByZero(self.to_string()));
                }
                Ok(v.powi(*e))
            }
            Expression::Quotient(n, d) => {
                let dv = d.eval(b)?;
                if dv.is_zero() {
                    return Err(ExprError::DivisionByZero(d.to_string()));
                }
                Ok(n.eval(b)? / dv)
            }
        }
    }

    fn as_var(&self) -> Option<Var> {
        match self {
            Expression::Const(n) => Some(Var::Const(n.clone())),
            Expression::Index => Some(Var::Index),
            Expression::Jet(f, k) => Some(Var::Jet(*f, *k)),
            Expression::Stencil(f, k) => Some(Var::Stencil(*f, *k)),
            _ => None,
        }
    }

    /// Structural partial derivative; every variable other than `v` is held
    /// fixed. Trivial zeros and ones are folded, nothing else is simplified.
    pub fn differentiate(&self, v: &Var) -> Expression {
        match self {
            Expression::Rational(_) => Expression::zero(),
            Expression::Const(_)
            | Expression::Index
            | Expression::Jet(..)
            | Expression::Stencil(..) => {
                if self.as_var().as_ref() == Some(v) {
                    Expression::one()
                } else {
                    Expression::zero()
                }
            }
            Expression::Sum(xs) => sum(xs.iter().map(|x| x.differentiate(v)).collect()),
            Expression::Product(xs) => {
                let mut terms = Vec::new();
                for (i, xi) in xs.iter().enumerate() {
                    let d = xi.differentiate(v);
                    if d.is_zero() {
                        continue;
                    }
                    let mut factors: Vec<Expression> = xs
                        .iter()
                        .enumerate()
                        .filter(|(j, _)| *j != i)
                        .map(|(_, x)| x.clone())
                        .collect();
                    factors.push(d);
                    terms.push(product(factors));
                }
                sum(terms)
            }
            Expression::Power(b, e) => {
                let d = b.differentiate(v);
                if d.is_zero() {
                    return Expression::zero();
                }
                product(vec![
                    Expression::int(*e as i64),
                    (**b).clone().pow(e - 1),
                    d,
                ])
            }
            Expression::Quotient(n, d) => {
                let dn = n.differentiate(v);
                let dd = d.differentiate(v);
                if dd.is_zero() {
                    return quotient(dn, (**d).clone());
                }
                let top = sum(vec![
                    product(vec![dn, (**d).clone()]),
                    product(vec![Expression::int(-1), (**n).clone(), dd]),
                ]);
                quotient(top, (**d).clone().pow(2))
            }
        }
    }

    /// Shifts the lattice index by `k`: `m` becomes `m + k` and every stencil
    /// offset `j` becomes `j + k`. `k = -1` is the backward shift.
    pub fn shift(&self, k: i32) -> Expression {
        if k == 0 {
            return self.clone();
        }
        match self {
            Expression::Index => sum(vec![Expression::Index, Expression::int(k as i64)]),
            Expression::Stencil(f, j) => Expression::Stencil(*f, j + k),
            Expression::Rational(_) | Expression::Const(_) | Expression::Jet(..) => self.clone(),
            Expression::Sum(xs) => Expression::Sum(xs.iter().map(|x| x.shift(k)).collect()),
            Expression::Product(xs) => Expression::Product(xs.iter().map(|x| x.shift(k)).collect()),
            Expression::Power(b, e) => Expression::Power(Box::new(b.shift(k)), *e),
            Expression::Quotient(n, d) => {
                Expression::Quotient(Box::new(n.shift(k)), Box::new(d.shift(k)))
            }
        }
    }

    /// Replaces every occurrence of `v` by `with`.
    pub fn substitute(&self, v: &Var, with: &Expression) -> Expression {
        match self {
            Expression::Rational(_) => self.clone(),
            Expression::Const(_)
            | Expression::Index
            | Expression::Jet(..)
            | Expression::Stencil(..) => {
                if self.as_var().as_ref() == Some(v) {
                    with.clone()
                } else {
                    self.clone()
                }
            }
            Expression::Sum(xs) => {
                Expression::Sum(xs.iter().map(|x| x.substitute(v, with)).collect())
            }
            Expression::Product(xs) => {
                Expression::Product(xs.iter().map(|x| x.substitute(v, with)).collect())
            }
            Expression::Power(b, e) => Expression::Power(Box::new(b.substitute(v, with)), *e),
            Expression::Quotient(n, d) => Expression::Quotient(
                Box::new(n.substitute(v, with)),
                Box::new(d.substitute(v, with)),
            ),
        }
    }

    /// Exact canonical form of the expression.
    pub fn to_rational_function(&self) -> Result<RationalFunction, ExprError> {
        match self {
            Expression::Rational(r) => Ok(RationalFunction::from_rational(r)),
            Expression::Const(_)
            | Expression::Index
            | Expression::Jet(..)
            | Expression::Stencil(..) => Ok(RationalFunction::var(self.as_var().expect("atom"))),
            Expression::Sum(xs) => {
                let mut acc = RationalFunction::zero();
                for x in xs {
                    acc = &acc + &x.to_rational_function()?;
                }
                Ok(acc)
            }
            Expression::Product(xs) => {
                let mut acc = RationalFunction::one();
                for x in xs {
                    acc = &acc * &x.to_rational_function()?;
                }
                Ok(acc)
            }
            Expression::Power(b, e) => b
                .to_rational_function()?
                .powi(*e)
                .ok_or_else(|| ExprError::DivisionByZero(self.to_string())),
            Expression::Quotient(n, d) => {
                let den = d.to_rational_function()?;
                let num = n.to_rational_function()?;
                num.checked_div(&den)
                    .ok_or_else(|| ExprError::DivisionByZero(d.to_string()))
            }
        }
    }
}

/// Canonical rational normal form of `e`, as an expression tree.
pub fn normalize(e: &Expression) -> Result<Expression, ExprError> {
    Ok(e.to_rational_function()?.to_expression())
}

/// Sum with zero terms dropped and nested sums flattened.
pub fn sum(terms: Vec<Expression>) -> Expression {
    let mut out = Vec::with_capacity(terms.len());
    for t in terms {
        match t {
            Expression::Sum(inner) => out.extend(inner),
            t if t.is_zero() => {}
            t => out.push(t),
        }
    }
    match out.len() {
        0 => Expression::zero(),
        1 => out.pop().expect("one term"),
        _ => Expression::Sum(out),
    }
}

/// Product with unit factors dropped, nested products flattened and a zero
/// factor absorbing everything.
pub fn product(factors: Vec<Expression>) -> Expression {
    let mut out = Vec::with_capacity(factors.len());
    let mut coeff = BigRational::one();
    for f in factors {
        match f {
            Expression::Product(inner) => {
                for g in inner {
                    match g {
                        Expression::Rational(r) => coeff *= r,
                        g => out.push(g),
                    }
                }
            }
            Expression::Rational(r) => coeff *= r,
            f => out.push(f),
        }
    }
    if coeff.is_zero() {
        return Expression::zero();
    }
    if !coeff.is_one() {
        out.insert(0, Expression::Rational(coeff));
    }
    match out.len() {
        0 => Expression::one(),
        1 => out.pop().expect("one factor"),
        _ => Expression::Product(out),
    }
}

pub fn quotient(num: Expression, den: Expression) -> Expression {
    if den.is_one() {
        return num;
    }
    if num.is_zero() && den.as_rational().is_none_or(|r| !r.is_zero()) {
        return Expression::zero();
    }
    match (&num, &den) {
        (Expression::Rational(a), Expression::Rational(b)) if !b.is_zero() => {
            Expression::Rational(a / b)
        }
        _ => Expression::Quotient(Box::new(num), Box::new(den)),
    }
}

impl std::ops::Add for Expression {
    type Output = Expression;
    fn add(self, rhs: Expression) -> Expression {
        sum(vec![self, rhs])
    }
}

impl std::ops::Sub for Expression {
    type Output = Expression;
    fn sub(self, rhs: Expression) -> Expression {
        sum(vec![self, -rhs])
    }
}

impl std::ops::Mul for Expression {
    type Output = Expression;
    fn mul(self, rhs: Expression) -> Expression {
        product(vec![self, rhs])
    }
}

impl std::ops::Div for Expression {
    type Output = Expression;
    fn div(self, rhs: Expression) -> Expression {
        quotient(self, rhs)
    }
}

impl std::ops::Neg for Expression {
    type Output = Expression;
    fn neg(self) -> Expression {
        product(vec![Expression::int(-1), self])
    }
}

// ---- printing ----

const PREC_SUM: u8 = 1;
const PREC_PRODUCT: u8 = 2;
const PREC_POWER: u8 = 3;
const PREC_ATOM: u8 = 4;

fn precedence(e: &Expression) -> u8 {
    match e {
        Expression::Sum(_) => PREC_SUM,
        Expression::Product(xs) => {
            if leading_negative(xs) {
                PREC_SUM
            } else {
                PREC_PRODUCT
            }
        }
        Expression::Quotient(n, _) => {
            if split_sign(n).0 {
                PREC_SUM
            } else {
                PREC_PRODUCT
            }
        }
        Expression::Rational(r) => {
            if r.is_negative() {
                PREC_SUM
            } else if r.is_integer() {
                PREC_ATOM
            } else {
                PREC_PRODUCT
            }
        }
        Expression::Power(..) => PREC_POWER,
        _ => PREC_ATOM,
    }
}

fn leading_negative(xs: &[Expression]) -> bool {
    matches!(xs.first(), Some(Expression::Rational(r)) if r.is_negative())
}

/// Splits a term into (is_negative, absolute value) for sum printing.
fn split_sign(e: &Expression) -> (bool, Expression) {
    match e {
        Expression::Rational(r) if r.is_negative() => (true, Expression::Rational(-r)),
        Expression::Product(xs) if leading_negative(xs) => {
            let mut ys = xs.clone();
            let r = match &ys[0] {
                Expression::Rational(r) => -r,
                _ => unreachable!(),
            };
            if r.is_one() {
                ys.remove(0);
            } else {
                ys[0] = Expression::Rational(r);
            }
            let abs = match ys.len() {
                1 => ys.pop().expect("one"),
                _ => Expression::Product(ys),
            };
            (true, abs)
        }
        Expression::Quotient(n, d) => {
            let (neg, n_abs) = split_sign(n);
            if neg {
                (true, Expression::Quotient(Box::new(n_abs), d.clone()))
            } else {
                (false, e.clone())
            }
        }
        _ => (false, e.clone()),
    }
}

fn write_with(f: &mut fmt::Formatter<'_>, e: &Expression, min_prec: u8) -> fmt::Result {
    if precedence(e) < min_prec {
        write!(f, "(")?;
        write_expr(f, e)?;
        write!(f, ")")
    } else {
        write_expr(f, e)
    }
}

fn write_expr(f: &mut fmt::Formatter<'_>, e: &Expression) -> fmt::Result {
    match e {
        Expression::Rational(r) => {
            if r.is_integer() {
                write!(f, "{}", r.numer())
            } else {
                write!(f, "{}/{}", r.numer(), r.denom())
            }
        }
        Expression::Const(n) => write!(f, "{n}"),
        Expression::Index => write!(f, "m"),
        Expression::Jet(fam, k) => write!(f, "{}", Var::Jet(*fam, *k)),
        Expression::Stencil(fam, k) => write!(f, "{}", Var::Stencil(*fam, *k)),
        Expression::Sum(xs) => {
            for (i, x) in xs.iter().enumerate() {
                if i == 0 {
                    write_with(f, x, PREC_SUM)?;
                    continue;
                }
                let (neg, abs) = split_sign(x);
                write!(f, "{}", if neg { " - " } else { " + " })?;
                // the subtracted term must bind tighter than the sum
                write_with(f, &abs, PREC_PRODUCT)?;
            }
            Ok(())
        }
        Expression::Product(xs) => {
            if xs.len() > 1 && leading_negative(xs) {
                let (_, abs) = split_sign(e);
                write!(f, "-")?;
                return write_with(f, &abs, PREC_PRODUCT);
            }
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    write!(f, "*")?;
                }
                let min = if i == 0 { PREC_PRODUCT } else { PREC_POWER };
                write_with(f, x, min)?;
            }
            Ok(())
        }
        Expression::Power(b, e) => {
            write_with(f, b, PREC_ATOM)?;
            if *e < 0 {
                write!(f, "^({e})")
            } else {
                write!(f, "^{e}")
            }
        }
        Expression::Quotient(n, d) => {
            let (neg, n_abs) = split_sign(n);
            if neg {
                write!(f, "-")?;
            }
            write_with(f, &n_abs, PREC_PRODUCT)?;
            write!(f, "/")?;
            write_with(f, d, PREC_POWER)
        }
    }
}

/// Prints in the input DSL; the output parses back to an equal normal form.
impl fmt::Display for Expression {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write_expr(f, self)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expression {
        parse(s).unwrap()
    }

    #[test]
    fn shift_examples() {
        assert_eq!(p("u[0]").shift(-1), Expression::u(-1));
        assert_eq!(p("K").shift(-3), p("K"));
        let e = p("m^2*u[1] - x[0]/(u[2]-u[0])");
        assert_eq!(
            e.shift(-2).shift(2).to_rational_function(),
            e.to_rational_function()
        );
    }

    #[test]
    fn evaluate_examples() {
        let mut b = Binding::new();
        b.insert(Var::u(0), 1.0);
        b.insert(Var::u(1), 3.0);
        assert_eq!(p("u[1]-u[0]").evaluate(&b).unwrap(), 2.0);
        let mut b = Binding::new();
        b.insert(Var::Index, 3.0);
        assert_eq!(p("m^2").evaluate(&b).unwrap(), 9.0);
    }

    #[test]
    fn evaluate_reports_unbound_and_zero_division() {
        let b = Binding::<f64>::new();
        assert_eq!(p("u[0]").evaluate(&b), Err(ExprError::Unbound(Var::u(0))));
        let mut b = Binding::new();
        b.insert(Var::u(0), 1.0);
        b.insert(Var::u(1), 1.0);
        match p("1/(u[1]-u[0])").evaluate(&b) {
            Err(ExprError::DivisionByZero(s)) => assert_eq!(s, "u[1] - u[0]"),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn cross_ratio_vanishes_on_reciprocal_sequence() {
        let f = p("(u[3]-u[1])*(u[2]-u[0])/((u[3]-u[2])*(u[1]-u[0])) - K");
        let mut b = Binding::new();
        for k in 0..4 {
            b.insert(Var::u(k), 1.0 / (k as f64 + 1.0));
        }
        b.insert(Var::constant("K"), 4.0);
        assert!(f.evaluate(&b).unwrap().abs() < 1e-14);
    }

    #[test]
    fn differentiate_examples() {
        let f = p("u'''/u' - (3/2)*u''^2/u'^2");
        let d = f.differentiate(&Var::jet_u(3));
        assert!(equivalent(&d, &p("1/u'")).unwrap());
        assert!(p("u[0]*u[2]").differentiate(&Var::u(1)).is_zero());
    }

    #[test]
    fn normalize_examples() {
        assert_eq!(normalize(&p("u[1]/u[1]")).unwrap(), Expression::one());
        assert_eq!(normalize(&p("2*(1/2)")).unwrap(), Expression::one());
        assert_eq!(normalize(&p("0")).unwrap(), Expression::zero());
        let e = p("(u[3]-u[1])/(x[2]-x[0]) + m*K");
        assert_eq!(normalize(&(e.clone() - e)).unwrap(), Expression::zero());
    }

    #[test]
    fn normalize_reports_zero_divisor() {
        assert!(matches!(
            normalize(&p("u[0]/(u[1]-u[1])")),
            Err(ExprError::DivisionByZero(_))
        ));
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "u'''/u' - (3/2)*u''^2/u'^2",
            "-v'''/u'",
            "2*(4/(u[2]-u[0]) - 1/(u[2]-u[1]) - 1/(u[1]-u[0]))",
            "x[0]^(-2)*m - -3",
            "a",
        ] {
            let Ok(e) = parse(s) else { continue };
            let printed = e.to_string();
            let back = parse(&printed).unwrap();
            assert_eq!(
                back.to_rational_function().unwrap(),
                e.to_rational_function().unwrap(),
                "{s} -> {printed}"
            );
        }
    }

    #[test]
    fn canonical_printing() {
        let e = normalize(&p("u''^2/(2*u'^3)")).unwrap();
        assert_eq!(e.to_string(), "u''^2/(2*u'^3)");
        let e = normalize(&p("-(v''')/u'")).unwrap();
        assert_eq!(e.to_string(), "-v'''/u'");
    }
}
