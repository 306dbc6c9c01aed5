//! Linear adjoint recurrences with constant coefficients: characteristic
//! polynomials, polynomial-in-`m` solutions, and verification that an
//! adjoint substitution solves the adjoint system along orbits of a scheme.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::binomial;
use num_rational::BigRational;
use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::discrete::{
    adjoint_multiplier_forms, recurrence_coefficients, recurrence_expression, AdjointSolution,
    DiscreteError, MultiplierForm, SchemeSystem,
};
use crate::expr::{
    sample_point, Binding, DoubleDouble, ExprError, Expression, Family, RationalFunction, Scalar,
    Var,
};
use crate::linalg::{determinant, nullspace, Matrix};
use crate::scheme_runtime::{generate_orbit, Orbit, RuntimeError, Stepper};

/// Largest residual accepted by [`verify_substitution`].
pub const SUBSTITUTION_TOLERANCE: f64 = 1e-9;

const MAX_REDRAWS: usize = 100;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SolverError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Discrete(#[from] DiscreteError),
    #[error(transparent)]
    Runtime(#[from] RuntimeError),
    #[error("invalid recurrence: {0}")]
    InvalidRecurrence(String),
    #[error("the coefficients still contain {0}; bind the constants first")]
    Symbolic(String),
    #[error("could not generate a nondegenerate orbit: {0}")]
    Orbit(String),
}

type Result<T> = std::result::Result<T, SolverError>;

/// `Σ_k c_k f[-k] = 0` for `k = 0..n`, with coefficients free of lattice
/// variables.
#[derive(Clone, Debug, PartialEq)]
pub struct LinearRecurrence {
    coefficients: Vec<RationalFunction>,
    family: Family,
}

impl LinearRecurrence {
    pub fn new(coefficients: Vec<RationalFunction>, family: Family) -> Result<Self> {
        if coefficients.len() < 2 {
            return Err(SolverError::InvalidRecurrence(
                "order must be at least 1".into(),
            ));
        }
        for c in &coefficients {
            if let Some(v) = c.vars().into_iter().find(|v| !matches!(v, Var::Const(_))) {
                return Err(SolverError::InvalidRecurrence(format!(
                    "coefficient {c} depends on {v}"
                )));
            }
        }
        if coefficients[0].is_zero() || coefficients.last().is_some_and(RationalFunction::is_zero) {
            return Err(SolverError::InvalidRecurrence(
                "the first and last coefficients must not vanish".into(),
            ));
        }
        Ok(LinearRecurrence {
            coefficients,
            family,
        })
    }

    pub fn from_integers(coefficients: &[i64], family: Family) -> Result<Self> {
        Self::new(
            coefficients
                .iter()
                .map(|&c| RationalFunction::int(c))
                .collect(),
            family,
        )
    }

    /// The recurrence satisfied by `family` in an adjoint expression of `s`.
    pub fn from_adjoint(
        s: &SchemeSystem,
        adjoint: &RationalFunction,
        family: Family,
    ) -> Result<Self> {
        Self::new(recurrence_coefficients(s, adjoint, family)?, family)
    }

    pub fn order(&self) -> usize {
        self.coefficients.len() - 1
    }

    pub fn coefficients(&self) -> &[RationalFunction] {
        &self.coefficients
    }

    pub fn family(&self) -> Family {
        self.family
    }

    pub fn bind(&self, constants: &BTreeMap<String, BigRational>) -> Result<Self> {
        let subs: BTreeMap<Var, RationalFunction> = constants
            .iter()
            .map(|(k, v)| (Var::constant(k), RationalFunction::from_rational(v)))
            .collect();
        let coefficients = self
            .coefficients
            .iter()
            .map(|c| {
                c.substitute_all(&subs)
                    .expect("constant substitution has no poles")
            })
            .collect();
        Self::new(coefficients, self.family)
    }

    pub fn numeric_coefficients(&self) -> Result<Vec<BigRational>> {
        self.coefficients
            .iter()
            .map(|c| {
                c.as_constant()
                    .ok_or_else(|| SolverError::Symbolic(c.to_string()))
            })
            .collect()
    }

    /// `Σ_k c_k g.shift(-k)` for a function `g` of the index.
    pub fn apply(&self, g: &RationalFunction) -> RationalFunction {
        let mut acc = RationalFunction::zero();
        for (k, c) in self.coefficients.iter().enumerate() {
            acc = &acc + &(c * &g.shift(-(k as i32)));
        }
        acc
    }

    pub fn to_expression(&self) -> Expression {
        recurrence_expression(&self.coefficients, self.family)
    }
}

impl std::fmt::Display for LinearRecurrence {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} = 0", self.to_expression())
    }
}

/// The variable of characteristic polynomials.
pub fn lambda() -> Var {
    Var::constant("λ")
}

/// `Σ_k (c_k / c_0) λ^(n-k)`, monic of degree `n`.
pub fn characteristic_polynomial(r: &LinearRecurrence) -> RationalFunction {
    let n = r.order();
    let lead = &r.coefficients[0];
    let l = RationalFunction::var(lambda());
    let mut acc = RationalFunction::zero();
    for (k, c) in r.coefficients.iter().enumerate() {
        let term = c.checked_div(lead).expect("nonzero leading coefficient");
        acc = &acc + &(&term * &l.powi((n - k) as i32).expect("nonnegative power"));
    }
    acc
}

/// Multiplicity of `λ = 1` as a root, identically in any remaining
/// constants.
pub fn root_one_multiplicity(r: &LinearRecurrence) -> usize {
    let l = lambda();
    let mut p = characteristic_polynomial(r);
    let mut mult = 0;
    while !p.is_zero() {
        let at_one = p
            .substitute(&l, &RationalFunction::one())
            .expect("polynomial in λ");
        if !at_one.is_zero() {
            break;
        }
        mult += 1;
        p = p.diff(&l);
    }
    mult
}

/// Polynomial solutions in the index.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionBasis {
    pub elements: Vec<Expression>,
    forms: Vec<RationalFunction>,
    pub root_one_multiplicity: usize,
}

impl SolutionBasis {
    pub fn forms(&self) -> &[RationalFunction] {
        &self.forms
    }

    pub fn len(&self) -> usize {
        self.forms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.forms.is_empty()
    }

    /// Casorati determinant `det [b_j(m0 + i)]`.
    pub fn casorati(&self, m0: i64) -> BigRational {
        let matrix: Matrix = (0..self.forms.len())
            .map(|i| {
                let b: Binding<BigRational> = Binding::new().with(
                    Var::Index,
                    BigRational::from_integer((m0 + i as i64).into()),
                );
                self.forms
                    .iter()
                    .map(|f| f.eval(&b).expect("polynomial in m"))
                    .collect()
            })
            .collect();
        determinant(&matrix)
    }
}

/// All solutions `Σ_{d ≤ max_degree} a_d m^d`, by undetermined coefficients
/// over the rationals. Each element has a 1 at its own degree and zeros at
/// the degrees of the other elements.
#[allow(clippy::needless_range_loop)]
pub fn polynomial_solutions(r: &LinearRecurrence, max_degree: usize) -> Result<SolutionBasis> {
    let c = r.numeric_coefficients()?;
    let cols = max_degree + 1;
    // row p: coefficient of m^p in Σ_k c_k (m - k)^d, column d
    let mut matrix: Matrix = vec![vec![BigRational::zero(); cols]; cols];
    for d in 0..cols {
        for p in 0..=d {
            let mut entry = BigRational::zero();
            for (k, ck) in c.iter().enumerate() {
                let minus_k = BigInt::from(-(k as i64));
                let power = num_traits::pow(minus_k, d - p);
                entry += ck
                    * BigRational::from_integer(binomial(BigInt::from(d), BigInt::from(p)) * power);
            }
            matrix[p][d] = entry;
        }
    }
    let m = RationalFunction::var(Var::Index);
    let mut forms = Vec::new();
    for v in nullspace(&matrix, cols) {
        let mut poly = RationalFunction::zero();
        for (d, a) in v.iter().enumerate() {
            if !a.is_zero() {
                poly = &poly + &m.powi(d as i32).expect("nonnegative power").scale(a);
            }
        }
        if !r.apply(&poly).is_zero() {
            return Err(SolverError::InvalidRecurrence(format!(
                "{poly} failed the normal-form check"
            )));
        }
        forms.push(poly);
    }
    forms.sort_by_key(|f| f.numerator().degree_in(&Var::Index));
    Ok(SolutionBasis {
        elements: forms.iter().map(RationalFunction::to_expression).collect(),
        forms,
        root_one_multiplicity: root_one_multiplicity(r),
    })
}

/// [`polynomial_solutions`] up to the order of the recurrence.
pub fn polynomial_solutions_default(r: &LinearRecurrence) -> Result<SolutionBasis> {
    polynomial_solutions(r, r.order())
}

/// Outcome of [`verify_substitution`].
#[derive(Clone, Debug, PartialEq)]
pub struct SubstitutionReport {
    /// Whether the substituted adjoint system reduces to zero on the
    /// scheme; `None` when the scheme has no symbolic solution.
    pub symbolic: Option<bool>,
    /// Largest relative residual of `F*` and `Ω*` over the sampled windows.
    pub max_residual: f64,
    pub windows: usize,
    pub tolerance: f64,
    pub pass: bool,
}

/// Value and `Σ|terms|` of a multiplier form with the multipliers replaced
/// by the shifted solution.
fn substituted_terms(
    form: &MultiplierForm,
    a: &AdjointSolution,
    b: &Binding<DoubleDouble>,
) -> std::result::Result<(DoubleDouble, DoubleDouble), ExprError> {
    let mut value = DoubleDouble::zero();
    let mut scale = DoubleDouble::zero();
    for (mult, c) in form.terms() {
        let phi = match mult.stencil_family() {
            Some((Family::V, k)) => a.v_form().shift(k),
            Some((Family::W, k)) => a.w_form().shift(k),
            _ => unreachable!("multipliers are v or w stencil variables"),
        };
        let t = phi.eval(b)? * c.eval(b)?;
        scale = scale + t.magnitude();
        value = value + t;
    }
    Ok((value, scale))
}

fn random_window(rng: &mut impl Rng, n: usize) -> Orbit<DoubleDouble> {
    let base: i64 = rng.gen_range(-5..=5);
    let mut x = sample_point(rng).as_f64();
    let mut points = Vec::with_capacity(n);
    for _ in 0..n {
        let u = sample_point(rng).as_f64();
        points.push((DoubleDouble::from(x), DoubleDouble::from(u)));
        x += sample_point(rng).as_f64().abs();
    }
    Orbit::new(base, points)
}

/// Checks that `(v, w)` solves the adjoint system on solutions of `s`:
/// symbolically when the scheme can be solved for its end points, and by
/// evaluating the substituted `F*`, `Ω*` on windows of `samples` orbits
/// grown from random initial points. All constants of `s` must be bound.
pub fn verify_substitution(
    s: &SchemeSystem,
    a: &AdjointSolution,
    samples: usize,
    seed: u64,
) -> Result<SubstitutionReport> {
    let (fs, os) = adjoint_multiplier_forms(s);
    let symbolic = if s.is_solvable() {
        let reduce = |f: &MultiplierForm| s.reduce(&a.apply(f)).map(|r| r.is_zero());
        Some(reduce(&fs)? && reduce(&os)?)
    } else {
        None
    };

    let stepper = Stepper::new(s)?;
    let n = s.order() as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_residual = 0f64;
    let mut windows = 0;
    let mut orbits = 0;
    let mut redraws = 0;
    while orbits < samples {
        let init = random_window(&mut rng, n);
        let orbit = match generate_orbit(&stepper, &init, 2 * n + 2) {
            Ok(o) => o,
            Err(e) => {
                redraws += 1;
                if redraws > MAX_REDRAWS {
                    return Err(SolverError::Orbit(e.to_string()));
                }
                continue;
            }
        };
        let mut sampled = Vec::new();
        let first = orbit.base + n as i64;
        let last = orbit.last_index() - n as i64;
        let mut failed = None;
        for m in first..=last {
            let b = orbit
                .window(m, -(n as i32), n as i32)
                .expect("window inside the orbit");
            for form in [&fs, &os] {
                match substituted_terms(form, a, &b) {
                    Ok((value, scale)) => {
                        let rel = value.magnitude().as_f64() / 1f64.max(scale.as_f64());
                        sampled.push(if rel.is_nan() { f64::INFINITY } else { rel });
                    }
                    Err(e) => failed = Some(e),
                }
            }
        }
        if let Some(e) = failed {
            redraws += 1;
            if redraws > MAX_REDRAWS {
                return Err(SolverError::Orbit(e.to_string()));
            }
            continue;
        }
        windows += sampled.len() / 2;
        max_residual = sampled.into_iter().fold(max_residual, f64::max);
        orbits += 1;
    }
    let pass = max_residual <= SUBSTITUTION_TOLERANCE && symbolic != Some(false);
    Ok(SubstitutionReport {
        symbolic,
        max_residual,
        windows,
        tolerance: SUBSTITUTION_TOLERANCE,
        pass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::discrete::adjoint_forms;
    use crate::expr::parse;

    const F: &str = "(u[3]-u[1])*(u[2]-u[0])/((u[3]-u[2])*(u[1]-u[0])) - K";
    const OMEGA: &str = "(x[3]-x[1])*(x[2]-x[0])/((x[3]-x[2])*(x[1]-x[0])) - K";

    fn rf(s: &str) -> RationalFunction {
        parse(s).unwrap().to_rational_function().unwrap()
    }

    fn k(value: i64) -> BTreeMap<String, BigRational> {
        BTreeMap::from([("K".to_string(), BigRational::from_integer(value.into()))])
    }

    fn cross_ratio_recurrence() -> LinearRecurrence {
        let s = SchemeSystem::parse(F, OMEGA, 3).unwrap();
        let (fs, _) = adjoint_forms(&s);
        LinearRecurrence::from_adjoint(&s, &fs, Family::V).unwrap()
    }

    fn with_lambda(s: &str) -> RationalFunction {
        rf(s).rename(|v| {
            if *v == Var::constant("L") {
                lambda()
            } else {
                v.clone()
            }
        })
    }

    #[test]
    fn characteristic_polynomials() {
        let r = cross_ratio_recurrence();
        assert_eq!(
            characteristic_polynomial(&r),
            with_lambda("(L - 1)*(L^2 + (2 - K)*L + 1)")
        );
        let r4 = r.bind(&k(4)).unwrap();
        assert_eq!(characteristic_polynomial(&r4), with_lambda("(L - 1)^3"));
        let trivial = LinearRecurrence::from_integers(&[1, -1], Family::V).unwrap();
        assert_eq!(characteristic_polynomial(&trivial), with_lambda("L - 1"));
        assert_eq!(root_one_multiplicity(&r), 1);
        assert_eq!(root_one_multiplicity(&r4), 3);
    }

    #[test]
    fn polynomial_basis_for_k4() {
        let r = cross_ratio_recurrence().bind(&k(4)).unwrap();
        let expected = [rf("1"), rf("m"), rf("m^2")];
        for max_degree in [2, 3, 5] {
            let basis = polynomial_solutions(&r, max_degree).unwrap();
            assert_eq!(basis.forms(), &expected[..]);
            assert!(!basis.casorati(0).is_zero());
        }
        let geometric = LinearRecurrence::from_integers(&[1, -2], Family::V).unwrap();
        assert!(polynomial_solutions(&geometric, 2).unwrap().is_empty());
    }

    #[test]
    fn basis_size_tracks_root_multiplicity() {
        for value in [2, 3, 4, 5] {
            let r = cross_ratio_recurrence().bind(&k(value)).unwrap();
            let mult = root_one_multiplicity(&r);
            for max_degree in 0..4 {
                let basis = polynomial_solutions(&r, max_degree).unwrap();
                assert_eq!(basis.len(), mult.min(max_degree + 1), "K = {value}");
            }
        }
    }

    #[test]
    fn symbolic_coefficients_need_binding() {
        assert!(matches!(
            polynomial_solutions(&cross_ratio_recurrence(), 2),
            Err(SolverError::Symbolic(_))
        ));
        assert!(LinearRecurrence::from_integers(&[0, 1], Family::V).is_err());
        assert!(LinearRecurrence::new(vec![rf("1"), rf("u[0]")], Family::V).is_err());
    }

    #[test]
    fn substitutions_on_the_k4_scheme() {
        let s = SchemeSystem::parse(F, OMEGA, 3)
            .unwrap()
            .bind_constants(&k(4))
            .unwrap();
        let good = AdjointSolution::parse("m^2", "0", 3).unwrap();
        let rep = verify_substitution(&s, &good, 5, 7).unwrap();
        assert!(rep.pass && rep.symbolic == Some(true), "{rep:?}");
        let bad = AdjointSolution::parse("m^3", "0", 3).unwrap();
        let rep = verify_substitution(&s, &bad, 5, 7).unwrap();
        assert!(
            !rep.pass && rep.max_residual > 1e-3 && rep.symbolic == Some(false),
            "{rep:?}"
        );
    }
}
