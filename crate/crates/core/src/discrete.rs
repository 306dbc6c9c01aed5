//! Stencil calculus for difference schemes `F = 0, Ω = 0` on `n + 1`
//! points: discrete variational operators, the adjoint system, first
//! integrals from a symmetry and an adjoint solution, and the telescoping
//! identity relating them.

use std::collections::{BTreeMap, BTreeSet};

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::continuous::PointSymmetry;
use crate::expr::{
    sample_point, sum, Binding, ExprError, Expression, Family, RationalFunction, Scalar, Var,
};
use crate::independence::{classify, IntegralClass};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DiscreteError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid scheme: {0}")]
    InvalidScheme(String),
    #[error("invalid adjoint solution: {0}")]
    InvalidAdjoint(String),
    #[error("the scheme cannot be solved symbolically for its {0} point")]
    NotSolvable(&'static str),
    #[error("reduction on the scheme failed: {0}")]
    Reduction(String),
}

type Result<T> = std::result::Result<T, DiscreteError>;

/// Which lattice function an operator acts on.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Wrt {
    X,
    U,
}

impl Wrt {
    fn family(self) -> Family {
        match self {
            Wrt::X => Family::X,
            Wrt::U => Family::U,
        }
    }
}

fn stencil_range(vars: impl IntoIterator<Item = Var>, families: &[Family]) -> Option<(i32, i32)> {
    vars.into_iter()
        .filter_map(|v| match v {
            Var::Stencil(f, k) if families.contains(&f) => Some(k),
            _ => None,
        })
        .fold(None, |acc, k| match acc {
            None => Some((k, k)),
            Some((lo, hi)) => Some((lo.min(k), hi.max(k))),
        })
}

// ---- variational operators ----

/// `Σ_{k=0}^{M} S_-^k ∂e/∂wrt[j + k]` with `M` the largest offset present.
pub fn higher_discrete_el(e: &Expression, j: i32, wrt: Wrt) -> Expression {
    let fam = wrt.family();
    let Some((_, hi)) = stencil_range(e.vars(), &[fam]) else {
        return Expression::zero();
    };
    let terms = (0..=(hi - j).max(-1))
        .map(|k| e.differentiate(&Var::Stencil(fam, j + k)).shift(-k))
        .collect();
    sum(terms)
}

/// `δe/δwrt_m = Σ_k S_-^k ∂e/∂wrt[k]`.
pub fn discrete_variational(e: &Expression, wrt: Wrt) -> Expression {
    higher_discrete_el(e, 0, wrt)
}

// ---- forms linear in the multipliers ----

/// `Σ c_k μ_k` over the opaque multipliers `μ = v[k], w[k]`, kept as one
/// coefficient per multiplier.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct MultiplierForm(BTreeMap<Var, RationalFunction>);

impl MultiplierForm {
    fn single(mult: Var, c: RationalFunction) -> Self {
        let mut out = MultiplierForm::default();
        out.add_term(mult, c);
        out
    }

    fn add_term(&mut self, mult: Var, c: RationalFunction) {
        if c.is_zero() {
            return;
        }
        match self.0.get_mut(&mult) {
            None => {
                self.0.insert(mult, c);
            }
            Some(e) => {
                *e = &*e + &c;
                if e.is_zero() {
                    self.0.remove(&mult);
                }
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Var, &RationalFunction)> {
        self.0.iter()
    }

    pub fn coefficient(&self, mult: &Var) -> RationalFunction {
        self.0
            .get(mult)
            .cloned()
            .unwrap_or_else(RationalFunction::zero)
    }

    pub fn scale(&self, r: &RationalFunction) -> Self {
        let mut out = MultiplierForm::default();
        for (m, c) in &self.0 {
            out.add_term(m.clone(), c * r);
        }
        out
    }

    pub fn shift(&self, k: i32) -> Self {
        MultiplierForm(
            self.0
                .iter()
                .map(|(m, c)| (m.shifted(k), c.shift(k)))
                .collect(),
        )
    }

    /// Variables of the coefficients together with the multipliers.
    pub fn vars(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        for (m, c) in &self.0 {
            out.insert(m.clone());
            out.extend(c.vars());
        }
        out
    }

    pub fn eval<T: Scalar>(&self, b: &Binding<T>) -> std::result::Result<T, ExprError> {
        let mut acc = T::zero();
        for (m, c) in &self.0 {
            let mv = b
                .get(m)
                .cloned()
                .ok_or_else(|| ExprError::Unbound(m.clone()))?;
            acc = acc + mv * c.eval(b)?;
        }
        Ok(acc)
    }

    /// The sum as a single rational function. May be expensive when the
    /// coefficients carry many distinct shifts.
    pub fn to_rational_function(&self) -> RationalFunction {
        let mut acc = RationalFunction::zero();
        for (m, c) in &self.0 {
            acc = &acc + &(&RationalFunction::var(m.clone()) * c);
        }
        acc
    }
}

impl std::ops::Add<&MultiplierForm> for &MultiplierForm {
    type Output = MultiplierForm;
    fn add(self, rhs: &MultiplierForm) -> MultiplierForm {
        let mut out = self.clone();
        for (m, c) in &rhs.0 {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl std::ops::Sub<&MultiplierForm> for &MultiplierForm {
    type Output = MultiplierForm;
    fn sub(self, rhs: &MultiplierForm) -> MultiplierForm {
        let mut out = self.clone();
        for (m, c) in &rhs.0 {
            out.add_term(m.clone(), -c);
        }
        out
    }
}

fn higher_el_multiplier(l: &MultiplierForm, j: i32, fam: Family) -> MultiplierForm {
    let mut out = MultiplierForm::default();
    for (mult, c) in &l.0 {
        let Some((_, hi)) = stencil_range(c.vars(), &[fam]) else {
            continue;
        };
        for k in 0..=(hi - j) {
            let d = c.diff(&Var::Stencil(fam, j + k));
            if !d.is_zero() {
                out.add_term(mult.shifted(-k), d.shift(-k));
            }
        }
    }
    out
}

// ---- the scheme ----

fn solve_affine(r: &RationalFunction, v: &Var) -> Option<RationalFunction> {
    let coeffs = r.numerator().coeffs_in(v);
    if coeffs.keys().any(|&d| d > 1) {
        return None;
    }
    let c1 = coeffs.get(&1)?.clone();
    let c0 = coeffs.get(&0).cloned().unwrap_or_default();
    RationalFunction::new(-&c0, c1)
}

/// Solves `F = Ω = 0` for the stencil point at `offset`, trying each
/// equation for each coordinate.
fn solve_point(
    f: &RationalFunction,
    omega: &RationalFunction,
    offset: i32,
) -> Option<(RationalFunction, RationalFunction)> {
    let xv = Var::x(offset);
    let uv = Var::u(offset);
    let orders = [
        (omega, &xv, f, &uv),
        (f, &uv, omega, &xv),
        (f, &xv, omega, &uv),
        (omega, &uv, f, &xv),
    ];
    for (e1, v1, e2, v2) in orders {
        if !e1.contains(v1) {
            continue;
        }
        let Some(s1) = solve_affine(e1, v1) else {
            continue;
        };
        let Some(e2s) = e2.substitute(v1, &s1) else {
            continue;
        };
        if !e2s.contains(v2) {
            continue;
        }
        let Some(s2) = solve_affine(&e2s, v2) else {
            continue;
        };
        let Some(s1) = s1.substitute(v2, &s2) else {
            continue;
        };
        let (x, u) = if v1 == &xv { (s1, s2) } else { (s2, s1) };
        if x.contains(&xv) || x.contains(&uv) || u.contains(&xv) || u.contains(&uv) {
            continue;
        }
        return Some((x, u));
    }
    None
}

#[derive(Clone, Debug)]
struct Elimination {
    /// `x[n], u[n]` in terms of offsets `0..n`.
    forward: (RationalFunction, RationalFunction),
    /// `x[-1], u[-1]` in terms of offsets `0..n`.
    backward: (RationalFunction, RationalFunction),
    /// Expansions for offsets outside the window, in window variables.
    rules: BTreeMap<Var, RationalFunction>,
}

/// A difference equation `F = 0` with mesh equation `Ω = 0` on the stencil
/// of offsets `0..=n`.
#[derive(Clone, Debug)]
pub struct SchemeSystem {
    f: Expression,
    omega: Expression,
    n: u32,
    f_form: RationalFunction,
    omega_form: RationalFunction,
    elimination: Option<Elimination>,
}

impl SchemeSystem {
    pub fn new(f: Expression, omega: Expression, n: u32) -> Result<Self> {
        if n == 0 {
            return Err(DiscreteError::InvalidScheme(
                "the stencil order must be at least 1".into(),
            ));
        }
        for (name, e) in [("F", &f), ("Ω", &omega)] {
            if let Some(bad) = e.vars().into_iter().find(|v| match v {
                Var::Index | Var::Const(_) => false,
                Var::Stencil(Family::X | Family::U, k) => *k < 0 || *k > n as i32,
                _ => true,
            }) {
                return Err(DiscreteError::InvalidScheme(format!(
                    "{name} contains {bad}; only x[0..{n}], u[0..{n}], m and constants are allowed"
                )));
            }
        }
        let f_form = f.to_rational_function()?;
        let omega_form = omega.to_rational_function()?;
        let mut s = SchemeSystem {
            f,
            omega,
            n,
            f_form,
            omega_form,
            elimination: None,
        };
        s.elimination = s.build_elimination();
        Ok(s)
    }

    pub fn parse(f: &str, omega: &str, n: u32) -> Result<Self> {
        let p = |s: &str| {
            crate::expr::parse(s).map_err(|e| DiscreteError::InvalidScheme(e.to_string()))
        };
        Self::new(p(f)?, p(omega)?, n)
    }

    /// The scheme with named constants replaced by the given values.
    pub fn bind_constants(&self, constants: &BTreeMap<String, BigRational>) -> Result<Self> {
        let bind = |e: &Expression| {
            constants.iter().fold(e.clone(), |acc, (name, value)| {
                acc.substitute(&Var::constant(name), &Expression::Rational(value.clone()))
            })
        };
        Self::new(bind(&self.f), bind(&self.omega), self.n)
    }

    /// Named constants occurring in `F` or `Ω`.
    pub fn constants(&self) -> BTreeSet<String> {
        let mut vars = self.f_form.vars();
        vars.extend(self.omega_form.vars());
        vars.into_iter()
            .filter_map(|v| match v {
                Var::Const(name) => Some(name.to_string()),
                _ => None,
            })
            .collect()
    }

    fn build_elimination(&self) -> Option<Elimination> {
        let n = self.n as i32;
        let forward = solve_point(&self.f_form, &self.omega_form, n)?;
        let (bx, bu) = solve_point(&self.f_form, &self.omega_form, 0)?;
        let backward = (bx.shift(-1), bu.shift(-1));
        let mut e = Elimination {
            forward,
            backward,
            rules: BTreeMap::new(),
        };
        self.extend_rules(&mut e, -n, 2 * n - 1).ok()?;
        Some(e)
    }

    fn extend_rules(&self, e: &mut Elimination, lo: i32, hi: i32) -> Result<()> {
        let n = self.n as i32;
        let pole = || DiscreteError::Reduction("an elimination step divides by zero".into());
        let mut t = n;
        while t <= hi {
            if !e.rules.contains_key(&Var::u(t)) {
                let k = t - n;
                let x = e
                    .forward
                    .0
                    .shift(k)
                    .substitute_all(&e.rules)
                    .ok_or_else(pole)?;
                let u = e
                    .forward
                    .1
                    .shift(k)
                    .substitute_all(&e.rules)
                    .ok_or_else(pole)?;
                e.rules.insert(Var::x(t), x);
                e.rules.insert(Var::u(t), u);
            }
            t += 1;
        }
        let mut t = -1;
        while t >= lo {
            if !e.rules.contains_key(&Var::u(t)) {
                let k = t + 1;
                let x = e
                    .backward
                    .0
                    .shift(k)
                    .substitute_all(&e.rules)
                    .ok_or_else(pole)?;
                let u = e
                    .backward
                    .1
                    .shift(k)
                    .substitute_all(&e.rules)
                    .ok_or_else(pole)?;
                e.rules.insert(Var::x(t), x);
                e.rules.insert(Var::u(t), u);
            }
            t -= 1;
        }
        Ok(())
    }

    pub fn f(&self) -> &Expression {
        &self.f
    }

    pub fn omega(&self) -> &Expression {
        &self.omega
    }

    pub fn order(&self) -> u32 {
        self.n
    }

    pub fn f_form(&self) -> &RationalFunction {
        &self.f_form
    }

    pub fn omega_form(&self) -> &RationalFunction {
        &self.omega_form
    }

    pub fn is_solvable(&self) -> bool {
        self.elimination.is_some()
    }

    /// `(x[n], u[n])` as functions of the window `0..n`.
    pub fn forward_solution(&self) -> Option<(&RationalFunction, &RationalFunction)> {
        self.elimination
            .as_ref()
            .map(|e| (&e.forward.0, &e.forward.1))
    }

    /// `(x[-1], u[-1])` as functions of the window `0..n`.
    pub fn backward_solution(&self) -> Option<(&RationalFunction, &RationalFunction)> {
        self.elimination
            .as_ref()
            .map(|e| (&e.backward.0, &e.backward.1))
    }

    /// Rewrites `r` on the solution manifold so that only the window
    /// offsets `0..n` of `x` and `u` remain.
    pub fn reduce(&self, r: &RationalFunction) -> Result<RationalFunction> {
        let n = self.n as i32;
        let Some((lo, hi)) = stencil_range(r.vars(), &[Family::X, Family::U]) else {
            return Ok(r.clone());
        };
        if lo >= 0 && hi < n {
            return Ok(r.clone());
        }
        let elim = self.elimination.as_ref().ok_or(if hi >= n {
            DiscreteError::NotSolvable("rightmost")
        } else {
            DiscreteError::NotSolvable("leftmost")
        })?;
        let present = r.vars();
        let missing = present.iter().any(|v| {
            matches!(v, Var::Stencil(Family::X | Family::U, k) if *k < 0 || *k >= n)
                && !elim.rules.contains_key(v)
        });
        let extended;
        let rules = if missing {
            let mut e = elim.clone();
            self.extend_rules(&mut e, lo.min(-1), hi.max(n))?;
            extended = e.rules;
            &extended
        } else {
            &elim.rules
        };
        let mut out = r.clone();
        for (v, with) in rules.iter().filter(|(v, _)| present.contains(v)) {
            out = out
                .substitute(v, with)
                .ok_or_else(|| DiscreteError::Reduction(format!("{r} has a pole on the scheme")))?;
        }
        Ok(out)
    }

    pub fn reduce_expression(&self, e: &Expression) -> Result<Expression> {
        Ok(self.reduce(&e.to_rational_function()?)?.to_expression())
    }

    /// `v[0] F + w[0] Ω` with opaque multipliers.
    fn lagrange_form(&self) -> MultiplierForm {
        &MultiplierForm::single(Var::Stencil(Family::V, 0), self.f_form.clone())
            + &MultiplierForm::single(Var::Stencil(Family::W, 0), self.omega_form.clone())
    }

    /// Prolonged generator `Σ_j ξ(x[j],u[j]) ∂/∂x[j] + η(x[j],u[j]) ∂/∂u[j]`
    /// applied to `r`.
    fn apply_prolonged(&self, s: &PointSymmetry, r: &RationalFunction) -> RationalFunction {
        let mut acc = RationalFunction::zero();
        let Some((lo, hi)) = stencil_range(r.vars(), &[Family::X, Family::U]) else {
            return acc;
        };
        for j in lo..=hi {
            let (xi, eta) = symmetry_at(s, j);
            acc = &acc + &(&(&xi * &r.diff(&Var::x(j))) + &(&eta * &r.diff(&Var::u(j))));
        }
        acc
    }
}

/// `(ξ, η)` evaluated at the stencil point `offset`.
fn symmetry_at(s: &PointSymmetry, offset: i32) -> (RationalFunction, RationalFunction) {
    let place = move |v: &Var| match v {
        Var::Jet(Family::X, 0) => Var::x(offset),
        Var::Jet(Family::U, 0) => Var::u(offset),
        other => other.clone(),
    };
    (s.xi_form().rename(place), s.eta_form().rename(place))
}

// ---- adjoint system ----

/// `(F*, Ω*) = (δL/δu_m, δL/δx_m)` for `L = v_m F + w_m Ω`, with `v`, `w`
/// opaque lattice functions.
pub fn adjoint_forms(s: &SchemeSystem) -> (RationalFunction, RationalFunction) {
    let (fs, os) = adjoint_multiplier_forms(s);
    (fs.to_rational_function(), os.to_rational_function())
}

/// `F*` and `Ω*` with one coefficient per multiplier.
pub fn adjoint_multiplier_forms(s: &SchemeSystem) -> (MultiplierForm, MultiplierForm) {
    let l = s.lagrange_form();
    (
        higher_el_multiplier(&l, 0, Family::U),
        higher_el_multiplier(&l, 0, Family::X),
    )
}

pub fn adjoint_system(s: &SchemeSystem) -> (Expression, Expression) {
    let (a, b) = adjoint_forms(s);
    (a.to_expression(), b.to_expression())
}

/// Coefficients `c_0 .. c_n` of `family[0], family[-1], ..., family[-n]`
/// in an adjoint expression, reduced on the scheme and scaled so that
/// `c_0 = -1`.
pub fn recurrence_coefficients(
    s: &SchemeSystem,
    adjoint: &RationalFunction,
    family: Family,
) -> Result<Vec<RationalFunction>> {
    let raw: Vec<RationalFunction> = (0..=s.order() as i32)
        .map(|k| adjoint.diff(&Var::Stencil(family, -k)))
        .collect::<Vec<_>>();
    let reduced = raw
        .iter()
        .map(|c| s.reduce(c))
        .collect::<Result<Vec<_>>>()?;
    let lead = reduced[0].clone();
    if lead.is_zero() {
        return Err(DiscreteError::Reduction(format!(
            "{} does not occur in the adjoint expression",
            Var::Stencil(family, 0)
        )));
    }
    let minus_lead = -&lead;
    Ok(reduced
        .iter()
        .map(|c| {
            c.checked_div(&minus_lead)
                .expect("nonzero leading coefficient")
        })
        .collect())
}

/// `Σ c_k family[-k]` as an expression.
pub fn recurrence_expression(coeffs: &[RationalFunction], family: Family) -> Expression {
    let terms = coeffs
        .iter()
        .enumerate()
        .map(|(k, c)| c.to_expression() * Expression::Stencil(family, -(k as i32)))
        .collect();
    sum(terms)
}

// ---- adjoint solutions ----

/// Substitution `v_m = φ_1`, `w_m = φ_2` in `m` and the window `0..n-1`.
#[derive(Clone, Debug)]
pub struct AdjointSolution {
    pub v: Expression,
    pub w: Expression,
    v_form: RationalFunction,
    w_form: RationalFunction,
}

impl AdjointSolution {
    pub fn new(v: Expression, w: Expression, n: u32) -> Result<Self> {
        for (name, e) in [("v", &v), ("w", &w)] {
            if let Some(bad) = e.vars().into_iter().find(|var| match var {
                Var::Index | Var::Const(_) => false,
                Var::Stencil(Family::X | Family::U, k) => *k < 0 || *k >= n as i32,
                _ => true,
            }) {
                return Err(DiscreteError::InvalidAdjoint(format!(
                    "{name} = {e} depends on {bad}"
                )));
            }
        }
        let v_form = v.to_rational_function()?;
        let w_form = w.to_rational_function()?;
        if v_form.is_zero() && w_form.is_zero() {
            return Err(DiscreteError::InvalidAdjoint(
                "v and w are both identically zero".into(),
            ));
        }
        Ok(AdjointSolution {
            v,
            w,
            v_form,
            w_form,
        })
    }

    pub fn parse(v: &str, w: &str, n: u32) -> Result<Self> {
        let p = |s: &str| {
            crate::expr::parse(s).map_err(|e| DiscreteError::InvalidAdjoint(e.to_string()))
        };
        Self::new(p(v)?, p(w)?, n)
    }

    pub fn v_form(&self) -> &RationalFunction {
        &self.v_form
    }

    pub fn w_form(&self) -> &RationalFunction {
        &self.w_form
    }

    /// `Σ c_k φ(μ_k)` with each multiplier replaced by the shifted solution.
    pub fn apply(&self, form: &MultiplierForm) -> RationalFunction {
        let mut acc = RationalFunction::zero();
        for (m, c) in form.terms() {
            let phi = match m.stencil_family() {
                Some((Family::V, k)) => self.v_form.shift(k),
                Some((Family::W, k)) => self.w_form.shift(k),
                _ => unreachable!("multipliers are v or w stencil variables"),
            };
            if !phi.is_zero() {
                acc = &acc + &(&phi * c);
            }
        }
        acc
    }

    /// Replaces `v[k]`, `w[k]` by the shifted solution expressions.
    pub fn substitute_into(&self, r: &RationalFunction) -> Result<RationalFunction> {
        let mut out = r.clone();
        for (fam, form) in [(Family::V, &self.v_form), (Family::W, &self.w_form)] {
            let Some((lo, hi)) = stencil_range(out.vars(), &[fam]) else {
                continue;
            };
            for k in lo..=hi {
                out = out
                    .substitute(&Var::Stencil(fam, k), &form.shift(k))
                    .ok_or_else(|| {
                        DiscreteError::InvalidAdjoint(format!(
                            "substituting {form} divides by zero"
                        ))
                    })?;
            }
        }
        Ok(out)
    }
}

// ---- first integrals ----

#[derive(Clone, Debug)]
pub struct DiscreteIntegral {
    pub raw: Expression,
    /// `None` when the scheme cannot be solved symbolically for its end
    /// points.
    pub reduced: Option<Expression>,
    raw_form: RationalFunction,
    reduced_form: Option<RationalFunction>,
}

impl DiscreteIntegral {
    pub fn raw_form(&self) -> &RationalFunction {
        &self.raw_form
    }

    pub fn reduced_form(&self) -> Option<&RationalFunction> {
        self.reduced_form.as_ref()
    }

    /// The reduced form when available, the raw form otherwise.
    pub fn best_form(&self) -> &RationalFunction {
        self.reduced_form.as_ref().unwrap_or(&self.raw_form)
    }

    pub fn is_trivial(&self) -> bool {
        self.reduced_form
            .as_ref()
            .is_some_and(|r| r.as_constant().is_some())
    }
}

/// `J = Σ_{j=1}^{n} (ξ_{m+j} δ/δx_{m(j)} + η_{m+j} δ/δu_{m(j)}) (v_m F + w_m Ω)`
/// with opaque `v`, `w`.
pub fn integral_form_opaque(s: &SchemeSystem, sym: &PointSymmetry) -> MultiplierForm {
    let l = s.lagrange_form();
    let mut acc = MultiplierForm::default();
    for j in 1..=s.order() as i32 {
        let (xi, eta) = symmetry_at(sym, j);
        if !xi.is_zero() {
            acc = &acc + &higher_el_multiplier(&l, j, Family::X).scale(&xi);
        }
        if !eta.is_zero() {
            acc = &acc + &higher_el_multiplier(&l, j, Family::U).scale(&eta);
        }
    }
    acc
}

pub fn first_integral_discrete(
    s: &SchemeSystem,
    sym: &PointSymmetry,
    a: &AdjointSolution,
) -> Result<DiscreteIntegral> {
    let raw_form = a.apply(&integral_form_opaque(s, sym));
    let reduced_form = match s.reduce(&raw_form) {
        Ok(r) => Some(r),
        Err(DiscreteError::NotSolvable(_)) => None,
        Err(e) => return Err(e),
    };
    Ok(DiscreteIntegral {
        raw: raw_form.to_expression(),
        reduced: reduced_form.as_ref().map(RationalFunction::to_expression),
        raw_form,
        reduced_form,
    })
}

/// Whether the prolonged generator annihilates `F` and `Ω` on solutions of
/// the scheme. Schemes without a symbolic solution are checked on sampled
/// solutions.
pub fn discrete_symmetry_check(s: &SchemeSystem, sym: &PointSymmetry) -> Result<bool> {
    if sym.is_zero() {
        return Ok(true);
    }
    let xf = s.apply_prolonged(sym, s.f_form());
    let xo = s.apply_prolonged(sym, s.omega_form());
    if s.is_solvable() {
        return Ok(s.reduce(&xf)?.is_zero() && s.reduce(&xo)?.is_zero());
    }
    Err(DiscreteError::NotSolvable("rightmost"))
}

// ---- the telescoping identity ----

/// Both sides of `v_m X(F) + w_m X(Ω) = η_m F* + ξ_m Ω* + (1 - S_-) J`
/// with opaque `v`, `w`.
pub fn main_identity_sides(
    s: &SchemeSystem,
    sym: &PointSymmetry,
) -> (MultiplierForm, MultiplierForm) {
    let lhs = &MultiplierForm::single(
        Var::Stencil(Family::V, 0),
        s.apply_prolonged(sym, s.f_form()),
    ) + &MultiplierForm::single(
        Var::Stencil(Family::W, 0),
        s.apply_prolonged(sym, s.omega_form()),
    );
    let (fs, os) = adjoint_multiplier_forms(s);
    let (xi0, eta0) = symmetry_at(sym, 0);
    let j = integral_form_opaque(s, sym);
    let rhs = &(&fs.scale(&eta0) + &os.scale(&xi0)) + &(&j - &j.shift(-1));
    (lhs, rhs)
}

/// `v_m X(F) + w_m X(Ω)` built on the expression trees of `F` and `Ω`, so
/// numeric checks do not go through the canonical forms.
fn identity_lhs_expression(s: &SchemeSystem, sym: &PointSymmetry) -> Expression {
    let mut terms = Vec::new();
    for (mult, e) in [(Family::V, s.f()), (Family::W, s.omega())] {
        let Some((lo, hi)) = stencil_range(e.vars(), &[Family::X, Family::U]) else {
            continue;
        };
        let mut inner = Vec::new();
        for j in lo..=hi {
            let place = |c: &Expression| {
                c.substitute(&Var::jet_x(), &Expression::x(j))
                    .substitute(&Var::jet_u(0), &Expression::u(j))
            };
            inner.push(place(sym.xi()) * e.differentiate(&Var::x(j)));
            inner.push(place(sym.eta()) * e.differentiate(&Var::u(j)));
        }
        terms.push(Expression::var(&Var::Stencil(mult, 0)) * sum(inner));
    }
    sum(terms)
}

/// `LHS - RHS` of the identity, one coefficient per multiplier.
pub fn main_identity_symbolic(s: &SchemeSystem, sym: &PointSymmetry) -> MultiplierForm {
    let (l, r) = main_identity_sides(s, sym);
    &l - &r
}

/// `|LHS - RHS| / max(1, |LHS|, |RHS|)` at a binding of `m`, the constants
/// and `x, u, v, w` at offsets `-n..n`.
pub fn main_identity_residual<T: Scalar>(
    s: &SchemeSystem,
    sym: &PointSymmetry,
    at: &Binding<T>,
) -> Result<f64> {
    let (_, r) = main_identity_sides(s, sym);
    let lv = identity_lhs_expression(s, sym).eval(at)?.as_f64();
    let rv = r.eval(at)?.as_f64();
    Ok((lv - rv).abs() / 1f64.max(lv.abs()).max(rv.abs()))
}

/// Residuals at `samples` random bindings with coordinates in `±[0.1, 2]`;
/// `constants` fixes named constants.
pub fn main_identity_samples(
    s: &SchemeSystem,
    sym: &PointSymmetry,
    constants: &Binding<f64>,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (l, r) = main_identity_sides(s, sym);
    let l_tree = identity_lhs_expression(s, sym);
    let mut vars = l.vars();
    vars.extend(r.vars());
    vars.extend(l_tree.vars());
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(samples);
    let mut redraws = 0;
    while out.len() < samples {
        let mut b = constants.clone();
        for v in vars.iter().filter(|v| !constants.contains(v)) {
            b.insert(v.clone(), sample_point(&mut rng).as_f64());
        }
        match (l_tree.eval(&b), r.eval(&b)) {
            (Ok(lv), Ok(rv)) => out.push((lv - rv).abs() / 1f64.max(lv.abs()).max(rv.abs())),
            (Err(ExprError::DivisionByZero(_)), _) | (_, Err(ExprError::DivisionByZero(_)))
                if redraws < 100 =>
            {
                redraws += 1
            }
            (Err(e), _) | (_, Err(e)) => return Err(e.into()),
        }
    }
    Ok(out)
}

// ---- the symmetry x solution grid ----

#[derive(Clone, Debug)]
pub struct DiscreteGridEntry {
    pub symmetry: String,
    pub solution: String,
    pub integral: DiscreteIntegral,
    pub class: IntegralClass,
}

/// One integral per (symmetry, adjoint solution) pair, ordered by symmetry
/// then solution, classified by the Jacobian rank with respect to the
/// window variables.
pub fn integral_grid_discrete(
    s: &SchemeSystem,
    symmetries: &[(String, PointSymmetry)],
    solutions: &[(String, AdjointSolution)],
    seed: u64,
) -> Result<Vec<DiscreteGridEntry>> {
    let mut cells = Vec::new();
    for (sname, sym) in symmetries {
        for (aname, a) in solutions {
            cells.push((
                sname.clone(),
                aname.clone(),
                first_integral_discrete(s, sym, a)?,
            ));
        }
    }
    let forms: Vec<RationalFunction> = cells.iter().map(|c| c.2.best_form().clone()).collect();
    let wrt: Vec<Var> = (0..s.order() as i32)
        .flat_map(|k| [Var::x(k), Var::u(k)])
        .collect();
    let classes = classify(&forms, &wrt, seed).ok_or_else(|| {
        DiscreteError::Reduction("no nonsingular sample point for the Jacobian".into())
    })?;
    Ok(cells
        .into_iter()
        .zip(classes)
        .map(
            |((symmetry, solution, integral), class)| DiscreteGridEntry {
                symmetry,
                solution,
                integral,
                class,
            },
        )
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equivalent, parse};

    const F: &str = "(u[3]-u[1])*(u[2]-u[0])/((u[3]-u[2])*(u[1]-u[0])) - K";
    const OMEGA: &str = "(x[3]-x[1])*(x[2]-x[0])/((x[3]-x[2])*(x[1]-x[0])) - K";

    fn scheme() -> SchemeSystem {
        SchemeSystem::parse(F, OMEGA, 3).unwrap()
    }

    fn p(s: &str) -> Expression {
        parse(s).unwrap()
    }

    #[test]
    fn variational_examples() {
        assert!(discrete_variational(&p("x[0]*x[2]"), Wrt::U).is_zero());
        let e = p("u[0]*u[1]^2 + m*u[2]");
        let d = discrete_variational(&e, Wrt::U);
        assert!(equivalent(&d, &p("u[1]^2 + 2*u[-1]*u[0] + m - 2")).unwrap());
        let top = higher_discrete_el(&e, 2, Wrt::U);
        assert!(equivalent(&top, &p("m")).unwrap());
        assert!(higher_discrete_el(&e, 3, Wrt::U).is_zero());
    }

    #[test]
    fn cross_ratio_is_solvable_both_ways() {
        let s = scheme();
        let (_, u3) = s.forward_solution().unwrap();
        let mut b = Binding::new();
        for k in 0..3 {
            b.insert(Var::u(k), 1.0 / (k as f64 + 2.0));
        }
        b.insert(Var::constant("K"), 4.0);
        assert!((u3.eval(&b).unwrap() - 0.2).abs() < 1e-15);
        let r = s
            .reduce(&p("u[-1] + u[4]").to_rational_function().unwrap())
            .unwrap();
        assert!((r.eval(&b).unwrap() - (1.0 + 1.0 / 6.0)).abs() < 1e-14);
    }

    #[test]
    fn adjoint_recurrences_of_cross_ratio_scheme() {
        let s = scheme();
        let (fs, os) = adjoint_forms(&s);
        let expected = ["-1", "K - 1", "1 - K", "1"];
        let cv = recurrence_coefficients(&s, &fs, Family::V).unwrap();
        let cw = recurrence_coefficients(&s, &os, Family::W).unwrap();
        for (c, e) in cv.iter().zip(expected) {
            assert_eq!(c, &p(e).to_rational_function().unwrap());
        }
        for (c, e) in cw.iter().zip(expected) {
            assert_eq!(c, &p(e).to_rational_function().unwrap());
        }
        assert!(!fs
            .vars()
            .iter()
            .any(|v| matches!(v, Var::Stencil(Family::W, _))));
        assert!(!os
            .vars()
            .iter()
            .any(|v| matches!(v, Var::Stencil(Family::V, _))));
    }

    #[test]
    fn integrals_of_cross_ratio_scheme() {
        let s = SchemeSystem::parse(&F.replace('K', "4"), &OMEGA.replace('K', "4"), 3).unwrap();
        let x1 = PointSymmetry::parse("0", "1").unwrap();
        let x2 = PointSymmetry::parse("0", "u").unwrap();
        let one = AdjointSolution::parse("1", "0", 3).unwrap();
        let m = AdjointSolution::parse("m", "0", 3).unwrap();
        let cases = [
            (
                &x1,
                &one,
                "2*(4/(u[2]-u[0]) - 1/(u[2]-u[1]) - 1/(u[1]-u[0]))",
            ),
            (
                &x2,
                &one,
                "2*(4*u[2]/(u[2]-u[0]) - u[1]/(u[2]-u[1]) - u[1]/(u[1]-u[0]) - 2)",
            ),
            (
                &x1,
                &m,
                "2*m*(4/(u[2]-u[0]) - 1/(u[2]-u[1]) - 1/(u[1]-u[0])) \
                 + (-4/(u[2]-u[0]) + 3/(u[2]-u[1]) - 1/(u[1]-u[0]))",
            ),
        ];
        for (sym, a, text) in cases {
            let j = first_integral_discrete(&s, sym, a).unwrap();
            assert!(
                equivalent(j.reduced.as_ref().unwrap(), &p(text)).unwrap(),
                "{text}"
            );
        }
        let zero = PointSymmetry::parse("0", "0").unwrap();
        assert!(first_integral_discrete(&s, &zero, &m)
            .unwrap()
            .raw
            .is_zero());
    }

    #[test]
    fn symmetry_checks() {
        let s = scheme();
        for (xi, eta) in [("0", "1"), ("0", "u^2"), ("x^2", "0"), ("0", "0")] {
            assert!(discrete_symmetry_check(&s, &PointSymmetry::parse(xi, eta).unwrap()).unwrap());
        }
        assert!(!discrete_symmetry_check(&s, &PointSymmetry::parse("0", "u^3").unwrap()).unwrap());
    }

    #[test]
    fn main_identity_holds_off_the_scheme() {
        let s = scheme();
        for (xi, eta) in [("x", "0"), ("x*u + 1", "u^2 - x")] {
            let sym = PointSymmetry::parse(xi, eta).unwrap();
            assert!(main_identity_symbolic(&s, &sym).is_zero(), "{xi}, {eta}");
        }
    }

    #[test]
    fn adjoint_solution_rejects_zero_pair() {
        assert!(AdjointSolution::parse("0", "0", 3).is_err());
        assert!(AdjointSolution::parse("u[3]", "0", 3).is_err());
    }
}
