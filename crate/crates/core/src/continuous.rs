//! Jet-space calculus for scalar ODEs `F(x, u, u', ..., u^(n)) = 0`:
//! total derivatives, prolonged point symmetries, Euler-Lagrange operators,
//! the adjoint equation and first integrals built from a symmetry and an
//! adjoint solution.

use std::collections::BTreeMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::expr::{
    product, sample_point, sum, Binding, ExprError, Expression, Family, Poly, RationalFunction,
    Scalar, Var,
};
use crate::independence::{classify, IntegralClass};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ContinuousError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error("invalid equation: {0}")]
    InvalidProblem(String),
    #[error("invalid symmetry: {0}")]
    InvalidSymmetry(String),
    #[error("invalid adjoint solution: {0}")]
    InvalidAdjoint(String),
    #[error("reduction on solutions failed: {0}")]
    Reduction(String),
    #[error("integration failed at x = {x}: {reason}")]
    Integration { x: f64, reason: String },
}

type Result<T> = std::result::Result<T, ContinuousError>;

// ---- total derivative ----

/// `D` applied to a single jet variable, as a polynomial.
fn jet_successor(v: &Var) -> Option<Poly> {
    match v {
        Var::Jet(Family::X, 0) => Some(Poly::one()),
        Var::Jet(Family::X, _) => None,
        Var::Jet(f, k) => Some(Poly::var(Var::Jet(*f, k + 1))),
        _ => None,
    }
}

fn total_derivative_poly(p: &Poly) -> Poly {
    let mut acc = Poly::zero();
    for v in p.vars() {
        if let Some(dv) = jet_successor(&v) {
            acc = &acc + &(&p.diff(&v) * &dv);
        }
    }
    acc
}

/// Total derivative `D` of a canonical form, treating `v`, `w` jets as
/// further dependent variables.
pub fn total_derivative_form(r: &RationalFunction) -> RationalFunction {
    let (n, d) = (r.numerator(), r.denominator());
    let dn = total_derivative_poly(n);
    if d.as_constant().is_some() {
        return RationalFunction::new(dn, d.clone()).expect("nonzero denominator");
    }
    let dd = total_derivative_poly(d);
    let top = &(&dn * d) - &(n * &dd);
    RationalFunction::new(top, d * d).expect("nonzero denominator")
}

fn total_derivative_form_n(r: &RationalFunction, k: u32) -> RationalFunction {
    (0..k).fold(r.clone(), |acc, _| total_derivative_form(&acc))
}

/// `D^k(e)`, structurally (no normalization).
pub fn total_derivative(e: &Expression, k: u32) -> Expression {
    let mut out = e.clone();
    for _ in 0..k {
        let terms = out
            .vars()
            .into_iter()
            .filter_map(|v| {
                let dv = match &v {
                    Var::Jet(Family::X, 0) => Expression::one(),
                    Var::Jet(Family::X, _) => return None,
                    Var::Jet(f, k) => Expression::Jet(*f, k + 1),
                    _ => return None,
                };
                Some(product(vec![out.differentiate(&v), dv]))
            })
            .collect();
        out = sum(terms);
    }
    out
}

fn max_order(vars: impl IntoIterator<Item = Var>, family: Family) -> Option<u32> {
    vars.into_iter()
        .filter_map(|v| match v {
            Var::Jet(f, k) if f == family => Some(k),
            _ => None,
        })
        .max()
}

/// Higher Euler-Lagrange operator `δ/δu^(i) = Σ_k (-D)^k ∂/∂u^(i+k)` on a
/// canonical form.
fn euler_form(r: &RationalFunction, i: u32) -> RationalFunction {
    let Some(top) = max_order(r.vars(), Family::U) else {
        return RationalFunction::zero();
    };
    let mut acc = RationalFunction::zero();
    for k in 0..=top.saturating_sub(i) {
        if i + k > top {
            break;
        }
        let term = total_derivative_form_n(&r.diff(&Var::jet_u(i + k)), k);
        acc = if k % 2 == 0 {
            &acc + &term
        } else {
            &acc - &term
        };
    }
    acc
}

/// `δe/δu^(i)`; `i = 0` is the variational derivative. Structural.
pub fn euler_operator(e: &Expression, i: u32) -> Expression {
    let Some(top) = max_order(e.vars(), Family::U) else {
        return Expression::zero();
    };
    if i > top {
        return Expression::zero();
    }
    let terms = (0..=top - i)
        .map(|k| {
            let t = total_derivative(&e.differentiate(&Var::jet_u(i + k)), k);
            if k % 2 == 0 {
                t
            } else {
                -t
            }
        })
        .collect();
    sum(terms)
}

// ---- symmetries ----

/// Generator `ξ(x, u) ∂/∂x + η(x, u) ∂/∂u`.
#[derive(Clone, Debug)]
pub struct PointSymmetry {
    xi: Expression,
    eta: Expression,
    xi_form: RationalFunction,
    eta_form: RationalFunction,
}

impl PointSymmetry {
    /// `xi` and `eta` may depend on `x`, `u` and named constants only.
    pub fn new(xi: Expression, eta: Expression) -> std::result::Result<Self, ContinuousError> {
        for (name, e) in [("xi", &xi), ("eta", &eta)] {
            if let Some(bad) = e.vars().into_iter().find(|v| {
                !matches!(
                    v,
                    Var::Const(_) | Var::Jet(Family::X, 0) | Var::Jet(Family::U, 0)
                )
            }) {
                return Err(ContinuousError::InvalidSymmetry(format!(
                    "{name} = {e} depends on {bad}; only x and u are allowed"
                )));
            }
        }
        let xi_form = xi.to_rational_function()?;
        let eta_form = eta.to_rational_function()?;
        Ok(PointSymmetry {
            xi,
            eta,
            xi_form,
            eta_form,
        })
    }

    pub fn parse(xi: &str, eta: &str) -> std::result::Result<Self, ContinuousError> {
        let p = |s: &str| {
            crate::expr::parse(s).map_err(|e| ContinuousError::InvalidSymmetry(e.to_string()))
        };
        Self::new(p(xi)?, p(eta)?)
    }

    pub fn xi(&self) -> &Expression {
        &self.xi
    }

    pub fn eta(&self) -> &Expression {
        &self.eta
    }

    pub fn xi_form(&self) -> &RationalFunction {
        &self.xi_form
    }

    pub fn eta_form(&self) -> &RationalFunction {
        &self.eta_form
    }

    pub fn is_zero(&self) -> bool {
        self.xi_form.is_zero() && self.eta_form.is_zero()
    }

    /// `η - ξ u'`.
    pub fn characteristic(&self) -> RationalFunction {
        &self.eta_form - &(&self.xi_form * &RationalFunction::var(Var::jet_u(1)))
    }

    fn prolongation_forms(&self, order: u32) -> Vec<RationalFunction> {
        let mut out = Vec::with_capacity(order as usize);
        let mut d = self.characteristic();
        for s in 1..=order {
            d = total_derivative_form(&d);
            out.push(&d + &(&self.xi_form * &RationalFunction::var(Var::jet_u(s + 1))));
        }
        out
    }

    /// Prolonged generator applied to `r`.
    fn apply_prolonged(&self, r: &RationalFunction) -> RationalFunction {
        let mut acc =
            &(&self.xi_form * &r.diff(&Var::jet_x())) + &(&self.eta_form * &r.diff(&Var::jet_u(0)));
        let top = max_order(r.vars(), Family::U).unwrap_or(0);
        for (s, zeta) in (1..=top).zip(self.prolongation_forms(top)) {
            let d = r.diff(&Var::jet_u(s));
            if !d.is_zero() {
                acc = &acc + &(&zeta * &d);
            }
        }
        acc
    }
}

/// Coefficients `ζ_1 .. ζ_order` of `∂/∂u^(s)` in the prolonged generator.
pub fn prolong(s: &PointSymmetry, order: u32) -> Vec<Expression> {
    s.prolongation_forms(order)
        .iter()
        .map(RationalFunction::to_expression)
        .collect()
}

// ---- the equation ----

/// `F(x, u, ..., u^(n)) = 0` together with its form solved for `u^(n)`.
#[derive(Clone, Debug)]
pub struct OdeProblem {
    f: Expression,
    form: RationalFunction,
    order: u32,
    solved: RationalFunction,
}

impl OdeProblem {
    /// Requires `F` to be affine in its highest derivative after clearing
    /// denominators; use [`OdeProblem::with_solved_form`] otherwise.
    pub fn new(f: Expression) -> Result<Self> {
        let (form, order) = Self::check(&f)?;
        let top = Var::jet_u(order);
        let coeffs = form.numerator().coeffs_in(&top);
        if coeffs.keys().any(|&d| d > 1) {
            return Err(ContinuousError::InvalidProblem(format!(
                "F is not affine in {top}; supply the solved form"
            )));
        }
        let c0 = coeffs.get(&0).cloned().unwrap_or_default();
        let c1 = coeffs
            .get(&1)
            .cloned()
            .expect("F depends on its top derivative");
        let solved = RationalFunction::new(-&c0, c1).expect("nonzero coefficient");
        Ok(OdeProblem {
            f,
            form,
            order,
            solved,
        })
    }

    /// `solved` must express `u^(n)` in lower-order jet variables and make
    /// `F` vanish identically.
    pub fn with_solved_form(f: Expression, solved: Expression) -> Result<Self> {
        let (form, order) = Self::check(&f)?;
        let solved = solved.to_rational_function()?;
        if max_order(solved.vars(), Family::U).is_some_and(|k| k >= order) {
            return Err(ContinuousError::InvalidProblem(
                "the solved form must not contain the highest derivative".into(),
            ));
        }
        let back = form.substitute(&Var::jet_u(order), &solved);
        if !back.is_some_and(|r| r.is_zero()) {
            return Err(ContinuousError::InvalidProblem(
                "the solved form does not satisfy the equation".into(),
            ));
        }
        Ok(OdeProblem {
            f,
            form,
            order,
            solved,
        })
    }

    pub fn parse(text: &str) -> Result<Self> {
        let f =
            crate::expr::parse(text).map_err(|e| ContinuousError::InvalidProblem(e.to_string()))?;
        Self::new(f)
    }

    fn check(f: &Expression) -> Result<(RationalFunction, u32)> {
        if let Some(bad) = f.vars().into_iter().find(|v| {
            !matches!(
                v,
                Var::Const(_) | Var::Jet(Family::X, 0) | Var::Jet(Family::U, _)
            )
        }) {
            return Err(ContinuousError::InvalidProblem(format!(
                "{bad} cannot occur in an ODE"
            )));
        }
        let form = f.to_rational_function()?;
        let order = max_order(form.vars(), Family::U)
            .filter(|&k| k >= 1)
            .ok_or_else(|| {
                ContinuousError::InvalidProblem("F does not depend on a derivative of u".into())
            })?;
        Ok((form, order))
    }

    pub fn f(&self) -> &Expression {
        &self.f
    }

    pub fn form(&self) -> &RationalFunction {
        &self.form
    }

    pub fn order(&self) -> u32 {
        self.order
    }

    /// `u^(n)` on solutions.
    pub fn solved_form(&self) -> &RationalFunction {
        &self.solved
    }

    /// Replacements for `u^(n) .. u^(top)` in terms of lower derivatives.
    fn consequences(&self, top: u32) -> Result<BTreeMap<Var, RationalFunction>> {
        let n = self.order;
        let mut map = BTreeMap::new();
        let mut current = self.solved.clone();
        map.insert(Var::jet_u(n), current.clone());
        for k in n + 1..=top {
            let next = total_derivative_form(&current)
                .substitute(&Var::jet_u(n), &self.solved)
                .ok_or_else(|| {
                    ContinuousError::Reduction(format!("zero denominator deriving u^({k})"))
                })?;
            map.insert(Var::jet_u(k), next.clone());
            current = next;
        }
        Ok(map)
    }

    /// Eliminates `u^(n)` and higher using the equation and its total
    /// derivatives.
    pub fn reduce(&self, r: &RationalFunction) -> Result<RationalFunction> {
        let Some(top) = max_order(r.vars(), Family::U).filter(|&k| k >= self.order) else {
            return Ok(r.clone());
        };
        let map = self.consequences(top)?;
        // highest orders first keeps intermediate forms small
        let mut out = r.clone();
        for (v, with) in map.iter().rev() {
            out = out.substitute(v, with).ok_or_else(|| {
                ContinuousError::Reduction(format!("{r} has a pole on solutions"))
            })?;
        }
        Ok(out)
    }

    pub fn reduce_expression(&self, e: &Expression) -> Result<Expression> {
        Ok(self.reduce(&e.to_rational_function()?)?.to_expression())
    }
}

// ---- adjoint equation ----

fn opaque_v() -> RationalFunction {
    RationalFunction::var(Var::jet_v(0))
}

/// `F* = δ(vF)/δu` with `v` an opaque dependent variable.
pub fn adjoint_form(p: &OdeProblem) -> RationalFunction {
    euler_form(&(&opaque_v() * p.form()), 0)
}

/// The adjoint expression, linear in `v, v', ...`.
pub fn adjoint_ode(p: &OdeProblem) -> Expression {
    adjoint_form(p).to_expression()
}

/// The adjoint expression reduced on solutions of the equation.
pub fn adjoint_ode_reduced(p: &OdeProblem) -> Result<Expression> {
    Ok(p.reduce(&adjoint_form(p))?.to_expression())
}

/// Replaces `v^(k)` by `D^k φ`.
fn substitute_v(r: &RationalFunction, phi: &RationalFunction) -> Result<RationalFunction> {
    let Some(top) = max_order(r.vars(), Family::V) else {
        return Ok(r.clone());
    };
    let mut out = r.clone();
    let mut d = phi.clone();
    for k in 0..=top {
        out = out.substitute(&Var::jet_v(k), &d).ok_or_else(|| {
            ContinuousError::InvalidAdjoint(format!("substituting v = {phi} divides by zero"))
        })?;
        d = total_derivative_form(&d);
    }
    Ok(out)
}

fn adjoint_solution_form(phi: &Expression) -> Result<RationalFunction> {
    if let Some(bad) = phi.vars().into_iter().find(|v| {
        !matches!(
            v,
            Var::Const(_) | Var::Jet(Family::X, 0) | Var::Jet(Family::U, _)
        )
    }) {
        return Err(ContinuousError::InvalidAdjoint(format!(
            "{phi} depends on {bad}"
        )));
    }
    Ok(phi.to_rational_function()?)
}

/// Whether `v = φ` makes the adjoint expression vanish on solutions.
pub fn adjoint_check(p: &OdeProblem, phi: &Expression) -> Result<bool> {
    let phi = adjoint_solution_form(phi)?;
    let r = substitute_v(&adjoint_form(p), &phi)?;
    Ok(p.reduce(&r)?.is_zero())
}

/// Whether the prolonged generator annihilates `F` on solutions.
pub fn symmetry_check(p: &OdeProblem, s: &PointSymmetry) -> Result<bool> {
    if s.is_zero() {
        return Ok(true);
    }
    Ok(p.reduce(&s.apply_prolonged(p.form()))?.is_zero())
}

// ---- first integrals ----

#[derive(Clone, Debug)]
pub struct ContinuousIntegral {
    pub raw: Expression,
    pub reduced: Expression,
    raw_form: RationalFunction,
    reduced_form: RationalFunction,
}

impl ContinuousIntegral {
    pub fn raw_form(&self) -> &RationalFunction {
        &self.raw_form
    }

    pub fn reduced_form(&self) -> &RationalFunction {
        &self.reduced_form
    }

    pub fn is_trivial(&self) -> bool {
        self.reduced_form.as_constant().is_some()
    }
}

/// `I = Σ_{i<n} D^i(η - ξu') δ(vF)/δu^(i+1)` with `v` opaque.
fn integral_form_opaque(p: &OdeProblem, s: &PointSymmetry) -> RationalFunction {
    let vf = &opaque_v() * p.form();
    let mut d = s.characteristic();
    let mut acc = RationalFunction::zero();
    for i in 0..p.order() {
        if i > 0 {
            d = total_derivative_form(&d);
        }
        let el = euler_form(&vf, i + 1);
        acc = &acc + &(&d * &el);
    }
    acc
}

/// First integral for an adjoint solution `v = v(x)`.
pub fn first_integral_continuous(
    p: &OdeProblem,
    s: &PointSymmetry,
    v: &Expression,
) -> Result<ContinuousIntegral> {
    if let Some(bad) = v
        .vars()
        .into_iter()
        .find(|w| !matches!(w, Var::Const(_) | Var::Jet(Family::X, 0)))
    {
        return Err(ContinuousError::InvalidAdjoint(format!(
            "v = {v} depends on {bad}; use first_integral_with_substitution"
        )));
    }
    first_integral_with_substitution(p, s, v)
}

/// First integral for a general substitution `v = φ(x, u, u', ...)`; the
/// differential consequences of `φ` are substituted as well.
pub fn first_integral_with_substitution(
    p: &OdeProblem,
    s: &PointSymmetry,
    phi: &Expression,
) -> Result<ContinuousIntegral> {
    let phi = adjoint_solution_form(phi)?;
    let raw_form = substitute_v(&integral_form_opaque(p, s), &phi)?;
    let reduced_form = p.reduce(&raw_form)?;
    Ok(ContinuousIntegral {
        raw: raw_form.to_expression(),
        reduced: reduced_form.to_expression(),
        raw_form,
        reduced_form,
    })
}

// ---- the identity ----

/// Both sides of `v X(F) = v ξ D(F) + (η - ξu') F* + D(I)` with `v` opaque,
/// or replaced by `φ` when given.
pub fn identity_sides(
    p: &OdeProblem,
    s: &PointSymmetry,
    phi: Option<&Expression>,
) -> Result<(RationalFunction, RationalFunction)> {
    let v = opaque_v();
    let lhs = &v * &s.apply_prolonged(p.form());
    let rhs = &(&(&v * s.xi_form()) * &total_derivative_form(p.form()))
        + &(&(&s.characteristic() * &adjoint_form(p))
            + &total_derivative_form(&integral_form_opaque(p, s)));
    match phi {
        None => Ok((lhs, rhs)),
        Some(phi) => {
            let phi = adjoint_solution_form(phi)?;
            Ok((substitute_v(&lhs, &phi)?, substitute_v(&rhs, &phi)?))
        }
    }
}

/// `v X(F)` built on the expression tree of `F`, so numeric checks do not
/// go through the canonical form.
fn identity_lhs_expression(
    p: &OdeProblem,
    s: &PointSymmetry,
    phi: Option<&Expression>,
) -> Expression {
    let f = p.f();
    let mut terms = vec![
        s.xi().clone() * f.differentiate(&Var::jet_x()),
        s.eta().clone() * f.differentiate(&Var::jet_u(0)),
    ];
    let top = p.order();
    for (k, zeta) in (1..=top).zip(prolong(s, top)) {
        terms.push(zeta * f.differentiate(&Var::jet_u(k)));
    }
    let v = phi
        .cloned()
        .unwrap_or_else(|| Expression::var(&Var::jet_v(0)));
    v * sum(terms)
}

/// `LHS - RHS` of the identity as a canonical form; zero when it holds.
pub fn identity_residual_symbolic(
    p: &OdeProblem,
    s: &PointSymmetry,
    phi: Option<&Expression>,
) -> Result<RationalFunction> {
    let (l, r) = identity_sides(p, s, phi)?;
    Ok(&l - &r)
}

/// `|LHS - RHS| / max(1, |LHS|, |RHS|)` at a binding of every jet variable
/// involved.
pub fn identity_residual_continuous(
    p: &OdeProblem,
    s: &PointSymmetry,
    phi: Option<&Expression>,
    at: &Binding<f64>,
) -> Result<f64> {
    let (_, r) = identity_sides(p, s, phi)?;
    let lv = identity_lhs_expression(p, s, phi).eval(at)?;
    let rv = r.eval(at)?;
    Ok((lv - rv).abs() / 1f64.max(lv.abs()).max(rv.abs()))
}

/// Random bindings with coordinates in `±[0.1, 2]` for every variable of the
/// identity, skipping points where either side is singular.
pub fn identity_residual_samples(
    p: &OdeProblem,
    s: &PointSymmetry,
    phi: Option<&Expression>,
    constants: &Binding<f64>,
    samples: usize,
    seed: u64,
) -> Result<Vec<f64>> {
    let (l, r) = identity_sides(p, s, phi)?;
    let l_tree = identity_lhs_expression(p, s, phi);
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

// ---- the 3 x 6 grid ----

#[derive(Clone, Debug)]
pub struct GridEntry {
    pub symmetry: String,
    pub solution: String,
    pub integral: ContinuousIntegral,
    pub class: IntegralClass,
}

/// One integral per (symmetry, adjoint solution) pair, ordered by symmetry
/// then solution, each classified against the ones before it by the rank
/// of the Jacobian with respect to `u, ..., u^(n-1)`.
pub fn integral_grid(
    p: &OdeProblem,
    symmetries: &[(String, PointSymmetry)],
    solutions: &[(String, Expression)],
    seed: u64,
) -> Result<Vec<GridEntry>> {
    let mut cells = Vec::new();
    for (sname, s) in symmetries {
        for (vname, v) in solutions {
            cells.push((
                sname.clone(),
                vname.clone(),
                first_integral_continuous(p, s, v)?,
            ));
        }
    }
    let forms: Vec<RationalFunction> = cells.iter().map(|c| c.2.reduced_form.clone()).collect();
    let wrt: Vec<Var> = (0..p.order()).map(Var::jet_u).collect();
    let classes = classify(&forms, &wrt, seed).ok_or_else(|| {
        ContinuousError::Reduction("no nonsingular sample point for the Jacobian".into())
    })?;
    Ok(cells
        .into_iter()
        .zip(classes)
        .map(|((symmetry, solution, integral), class)| GridEntry {
            symmetry,
            solution,
            integral,
            class,
        })
        .collect())
}

// ---- numerical integration ----

/// Samples `x_k` with states `(u, u', ..., u^(n-1))`.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub x: Vec<f64>,
    pub states: Vec<Vec<f64>>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    /// Binding of `x, u, ..., u^(n-1)` at sample `k`, on top of `base`.
    pub fn binding(&self, k: usize, base: &Binding<f64>) -> Binding<f64> {
        let mut b = base.clone();
        b.insert(Var::jet_x(), self.x[k]);
        for (i, y) in self.states[k].iter().enumerate() {
            b.insert(Var::jet_u(i as u32), *y);
        }
        b
    }
}

/// Classical fourth-order Runge-Kutta for `u^(n) = solved(x, u, ...)`.
/// `constants` binds the named constants of the equation.
pub fn integrate_rk4(
    p: &OdeProblem,
    constants: &Binding<f64>,
    x0: f64,
    initial: &[f64],
    h: f64,
    steps: usize,
) -> Result<Trajectory> {
    let n = p.order() as usize;
    if initial.len() != n {
        return Err(ContinuousError::Integration {
            x: x0,
            reason: format!("expected {n} initial values, got {}", initial.len()),
        });
    }
    let rhs = |x: f64, y: &[f64]| -> Result<Vec<f64>> {
        let mut b = constants.clone();
        b.insert(Var::jet_x(), x);
        for (i, yi) in y.iter().enumerate() {
            b.insert(Var::jet_u(i as u32), *yi);
        }
        let top = p
            .solved_form()
            .eval(&b)
            .map_err(|e| ContinuousError::Integration {
                x,
                reason: e.to_string(),
            })?;
        let mut d: Vec<f64> = y[1..].to_vec();
        d.push(top);
        Ok(d)
    };
    let axpy = |y: &[f64], a: f64, k: &[f64]| -> Vec<f64> {
        y.iter().zip(k).map(|(yi, ki)| yi + a * ki).collect()
    };
    let mut traj = Trajectory {
        x: vec![x0],
        states: vec![initial.to_vec()],
    };
    let mut x = x0;
    let mut y = initial.to_vec();
    for _ in 0..steps {
        let k1 = rhs(x, &y)?;
        let k2 = rhs(x + h / 2.0, &axpy(&y, h / 2.0, &k1))?;
        let k3 = rhs(x + h / 2.0, &axpy(&y, h / 2.0, &k2))?;
        let k4 = rhs(x + h, &axpy(&y, h, &k3))?;
        for i in 0..n {
            y[i] += h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        x += h;
        if y.iter().any(|v| !v.is_finite()) {
            return Err(ContinuousError::Integration {
                x,
                reason: "state blew up".into(),
            });
        }
        traj.x.push(x);
        traj.states.push(y.clone());
    }
    Ok(traj)
}

/// Values of an integral along a trajectory and the largest deviation from
/// its initial value.
#[derive(Clone, Debug, PartialEq)]
pub struct ContinuousDrift {
    pub values: Vec<f64>,
    pub max_drift: f64,
}

impl ContinuousDrift {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_drift <= tol
    }
}

pub fn drift_along(
    integral: &RationalFunction,
    traj: &Trajectory,
    constants: &Binding<f64>,
) -> Result<ContinuousDrift> {
    let mut values = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        values.push(integral.eval(&traj.binding(k, constants))?);
    }
    let first = values.first().copied().unwrap_or(0.0);
    let max_drift = values.iter().map(|v| (v - first).abs()).fold(0.0, f64::max);
    Ok(ContinuousDrift { values, max_drift })
}

/// Binds named constants given as `(name, value)` pairs.
pub fn constant_binding<'a>(pairs: impl IntoIterator<Item = (&'a str, f64)>) -> Binding<f64> {
    pairs
        .into_iter()
        .map(|(n, v)| (Var::Const(Arc::from(n)), v))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{equivalent, parse};

    fn p(s: &str) -> Expression {
        parse(s).unwrap()
    }

    fn third() -> OdeProblem {
        OdeProblem::parse("u'''/u' - (3/2)*u''^2/u'^2").unwrap()
    }

    #[test]
    fn total_derivative_examples() {
        let d = total_derivative(&p("1/u'"), 1);
        assert!(equivalent(&d, &p("-u''/u'^2")).unwrap());
        let d2 = total_derivative(&p("1/u'"), 2);
        assert!(equivalent(&d2, &p("-u'''/u'^2 + 2*u''^2/u'^3")).unwrap());
        assert_eq!(total_derivative(&p("x"), 1), Expression::one());
        let r = p("x*u^2/u'").to_rational_function().unwrap();
        let structural = total_derivative(&p("x*u^2/u'"), 1)
            .to_rational_function()
            .unwrap();
        assert_eq!(total_derivative_form(&r), structural);
    }

    #[test]
    fn prolongation_examples() {
        let x1 = PointSymmetry::parse("0", "1").unwrap();
        assert!(prolong(&x1, 1)[0].is_zero());
        let x5 = PointSymmetry::parse("x", "0").unwrap();
        assert!(equivalent(&prolong(&x5, 1)[0], &p("-u'")).unwrap());
        let x3 = PointSymmetry::parse("0", "u^2").unwrap();
        assert!(equivalent(&prolong(&x3, 1)[0], &p("2*u*u'")).unwrap());
    }

    #[test]
    fn symmetry_rejects_derivatives() {
        assert!(PointSymmetry::parse("u'", "0").is_err());
        assert!(PointSymmetry::parse("0", "u[1]").is_err());
    }

    #[test]
    fn euler_operator_kills_total_derivatives() {
        let g = p("x*u*u'^2 + u''/(1 + u^2)");
        let dg = total_derivative(&g, 1);
        assert!(normalize_is_zero(&euler_operator(&dg, 0)));
        assert!(euler_operator(&p("x^2"), 0).is_zero());
    }

    fn normalize_is_zero(e: &Expression) -> bool {
        e.to_rational_function().unwrap().is_zero()
    }

    #[test]
    fn adjoint_of_second_derivative() {
        let p2 = OdeProblem::parse("u''").unwrap();
        assert!(equivalent(&adjoint_ode(&p2), &p("v''")).unwrap());
    }

    #[test]
    fn adjoint_of_third_order_example() {
        let reduced = adjoint_ode_reduced(&third()).unwrap();
        assert!(equivalent(&reduced, &p("-v'''/u'")).unwrap());
        for v in ["1", "x", "x^2"] {
            assert!(adjoint_check(&third(), &p(v)).unwrap(), "{v}");
        }
        assert!(!adjoint_check(&third(), &p("x^3")).unwrap());
    }

    #[test]
    fn symmetry_checks() {
        let ode = third();
        assert!(symmetry_check(&ode, &PointSymmetry::parse("x^2", "0").unwrap()).unwrap());
        assert!(symmetry_check(&ode, &PointSymmetry::parse("0", "u^2").unwrap()).unwrap());
        assert!(!symmetry_check(&ode, &PointSymmetry::parse("0", "x").unwrap()).unwrap());
        assert!(symmetry_check(&ode, &PointSymmetry::parse("0", "0").unwrap()).unwrap());
    }

    #[test]
    fn non_affine_equation_needs_solved_form() {
        assert!(OdeProblem::parse("u''^2 - u").is_err());
        let f = p("u''^2 - u^2");
        assert!(OdeProblem::with_solved_form(f.clone(), p("u")).is_ok());
        assert!(OdeProblem::with_solved_form(f, p("u + 1")).is_err());
    }

    #[test]
    fn identity_holds_for_arbitrary_generators() {
        let ode = third();
        let s = PointSymmetry::parse("x*u + 1", "u^3 - x").unwrap();
        assert!(identity_residual_symbolic(&ode, &s, None)
            .unwrap()
            .is_zero());
        let s = PointSymmetry::parse("1", "0").unwrap();
        assert!(identity_residual_symbolic(&ode, &s, Some(&p("x")))
            .unwrap()
            .is_zero());
    }

    #[test]
    fn integrals_of_third_order_example() {
        let ode = third();
        let x1 = PointSymmetry::parse("0", "1").unwrap();
        let x2 = PointSymmetry::parse("0", "u").unwrap();
        let i1a = first_integral_continuous(&ode, &x1, &p("1")).unwrap();
        assert_eq!(i1a.reduced.to_string(), "u''^2/(2*u'^3)");
        let i2a = first_integral_continuous(&ode, &x2, &p("1")).unwrap();
        assert!(equivalent(&i2a.reduced, &p("u*u''^2/(2*u'^3) - u''/u'")).unwrap());
        let i1b = first_integral_continuous(&ode, &x1, &p("x")).unwrap();
        assert!(equivalent(&i1b.reduced, &p("x*u''^2/(2*u'^3) + u''/u'^2")).unwrap());
        assert!(first_integral_continuous(&ode, &x1, &p("u")).is_err());
    }
}
