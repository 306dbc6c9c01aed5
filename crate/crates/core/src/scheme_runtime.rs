//! Numeric execution of difference schemes: stepping, orbit generation,
//! drift of first integrals along orbits, recovery of the closed-form
//! constants of the cross-ratio scheme, and the exactness check against the
//! continuous solution family.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::discrete::{DiscreteError, SchemeSystem};
use crate::expr::{Binding, ExprError, Family, RationalFunction, Scalar, Var};

/// Relative residual allowed for `F` and `Ω` on every orbit window.
pub const SCHEME_TOLERANCE: f64 = 1e-10;
/// Relative step-to-step change allowed for a conserved quantity.
pub const DRIFT_TOLERANCE: f64 = 1e-12;
/// Relative deviation allowed by [`exactness_check`].
pub const EXACTNESS_TOLERANCE: f64 = 1e-10;
/// Residual target of the generic root finder.
pub const ROOT_TOLERANCE: f64 = 1e-14;

const LINEAR_BRANCH_TOLERANCE: f64 = 1e-10;
const CONSISTENCY_TOLERANCE: f64 = 1e-8;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RuntimeError {
    #[error(transparent)]
    Expr(#[from] ExprError),
    #[error(transparent)]
    Discrete(#[from] DiscreteError),
    #[error("the scheme still contains the constant {0}; bind it first")]
    UnboundConstant(String),
    #[error("degenerate window at m = {m}: {reason}")]
    Degenerate { m: i64, reason: String },
    #[error("no sign change found for {var} at m = {m}")]
    Bracket { m: i64, var: &'static str },
    #[error("the mesh stops being monotone at m = {m}")]
    NonMonotone { m: i64 },
    #[error("scheme residual {residual:e} exceeds {tolerance:e} at m = {m}")]
    Residual {
        m: i64,
        residual: f64,
        tolerance: f64,
    },
    #[error("an orbit of {len} points cannot hold a window of {need}")]
    WindowShortfall { len: usize, need: usize },
    #[error("the mesh family has a pole at m = {pole} inside the orbit")]
    MeshPole { pole: f64 },
    #[error("no solution family fits the integral values: {0}")]
    Inconsistent(String),
    #[error("missing integral value {0}")]
    MissingIntegral(String),
    #[error("the exactness fit is degenerate: {0}")]
    FitDegenerate(String),
}

type Result<T> = std::result::Result<T, RuntimeError>;

fn stencil_span(vars: impl IntoIterator<Item = Var>) -> Option<(i32, i32)> {
    vars.into_iter()
        .filter_map(|v| match v.stencil_family() {
            Some((Family::X | Family::U, k)) => Some(k),
            _ => None,
        })
        .fold(None, |acc, k| match acc {
            None => Some((k, k)),
            Some((lo, hi)) => Some((lo.min(k), hi.max(k))),
        })
}

/// `|N| / Σ|terms of N|` for `r = N / D` at `b`, so that the measure does
/// not depend on the overall scale of the window. Fails when `D` vanishes.
pub fn relative_residual<T: Scalar>(
    r: &RationalFunction,
    b: &Binding<T>,
) -> std::result::Result<f64, ExprError> {
    if r.denominator().eval(b)?.is_zero() {
        return Err(ExprError::DivisionByZero(r.to_string()));
    }
    let mut value = T::zero();
    let mut scale = T::zero();
    for (m, c) in r.numerator().terms() {
        let mut t = T::from_bigint(c);
        for (v, e) in m.factors() {
            let x = b.get(v).ok_or_else(|| ExprError::Unbound(v.clone()))?;
            t = t * x.powi(e as i32);
        }
        scale = scale + t.magnitude();
        value = value + t;
    }
    if scale.is_zero() {
        return Ok(0.0);
    }
    Ok((value.magnitude() / scale).as_f64())
}

// ---- orbits ----

/// Consecutive lattice points `(x_m, u_m)` for `m = base, base + 1, ...`.
#[derive(Clone, Debug, PartialEq)]
pub struct Orbit<T> {
    pub base: i64,
    pub points: Vec<(T, T)>,
}

impl<T: Scalar> Orbit<T> {
    pub fn new(base: i64, points: Vec<(T, T)>) -> Self {
        Orbit { base, points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn last_index(&self) -> i64 {
        self.base + self.points.len() as i64 - 1
    }

    pub fn point(&self, m: i64) -> Option<&(T, T)> {
        usize::try_from(m - self.base)
            .ok()
            .and_then(|i| self.points.get(i))
    }

    /// Binding of the index to `m` and of `x[k], u[k]` to the points
    /// `m + k` for `k` in `lo..=hi`.
    pub fn window(&self, m: i64, lo: i32, hi: i32) -> Option<Binding<T>> {
        let mut b = Binding::new().with(Var::Index, T::from_i64(m));
        for k in lo..=hi {
            let (x, u) = self.point(m + k as i64)?;
            b.insert(Var::x(k), x.clone());
            b.insert(Var::u(k), u.clone());
        }
        Some(b)
    }

    pub fn map<S>(&self, f: impl Fn(&T) -> S) -> Orbit<S> {
        Orbit {
            base: self.base,
            points: self.points.iter().map(|(x, u)| (f(x), f(u))).collect(),
        }
    }

    pub fn to_f64(&self) -> Orbit<f64> {
        self.map(Scalar::as_f64)
    }
}

#[derive(Clone, Debug)]
enum Rule {
    Closed {
        x: RationalFunction,
        u: RationalFunction,
    },
    RootFind,
}

/// Advances a scheme with all constants bound by one lattice point.
#[derive(Clone, Debug)]
pub struct Stepper {
    scheme: SchemeSystem,
    rule: Rule,
}

impl Stepper {
    /// Uses the symbolic forward solution when the scheme has one, and a
    /// bracketed root search otherwise.
    pub fn new(s: &SchemeSystem) -> Result<Self> {
        Self::check_bound(s)?;
        let rule = match s.forward_solution() {
            Some((x, u)) => Rule::Closed {
                x: x.clone(),
                u: u.clone(),
            },
            None => Rule::RootFind,
        };
        Ok(Stepper {
            scheme: s.clone(),
            rule,
        })
    }

    /// Always uses the root search, even when a closed form exists.
    pub fn root_finding(s: &SchemeSystem) -> Result<Self> {
        Self::check_bound(s)?;
        Ok(Stepper {
            scheme: s.clone(),
            rule: Rule::RootFind,
        })
    }

    fn check_bound(s: &SchemeSystem) -> Result<()> {
        match s.constants().into_iter().next() {
            Some(c) => Err(RuntimeError::UnboundConstant(c)),
            None => Ok(()),
        }
    }

    pub fn scheme(&self) -> &SchemeSystem {
        &self.scheme
    }

    pub fn order(&self) -> usize {
        self.scheme.order() as usize
    }

    /// The point `m + n` from the window of points `m .. m + n - 1`.
    pub fn step<T: Scalar>(&self, window: &[(T, T)], m: i64) -> Result<(T, T)> {
        let n = self.order();
        assert_eq!(window.len(), n, "a step needs exactly n points");
        let mut b = Binding::new().with(Var::Index, T::from_i64(m));
        for (k, (x, u)) in window.iter().enumerate() {
            b.insert(Var::x(k as i32), x.clone());
            b.insert(Var::u(k as i32), u.clone());
        }
        let degenerate = |e: ExprError| RuntimeError::Degenerate {
            m,
            reason: e.to_string(),
        };
        let next = match &self.rule {
            Rule::Closed { x, u } => (
                x.eval(&b).map_err(degenerate)?,
                u.eval(&b).map_err(degenerate)?,
            ),
            Rule::RootFind => self.root_find(&b, window, m)?,
        };
        b.insert(Var::x(n as i32), next.0.clone());
        b.insert(Var::u(n as i32), next.1.clone());
        for r in [self.scheme.f_form(), self.scheme.omega_form()] {
            let residual = relative_residual(r, &b).map_err(degenerate)?;
            if residual.is_nan() || residual > SCHEME_TOLERANCE {
                return Err(RuntimeError::Residual {
                    m,
                    residual,
                    tolerance: SCHEME_TOLERANCE,
                });
            }
        }
        Ok(next)
    }

    fn root_find<T: Scalar>(&self, b: &Binding<T>, window: &[(T, T)], m: i64) -> Result<(T, T)> {
        let n = self.order() as i32;
        let (xv, uv) = (Var::x(n), Var::u(n));
        let (f, omega) = (self.scheme.f_form(), self.scheme.omega_form());
        let mut fb: Binding<f64> = b.iter().map(|(v, t)| (v.clone(), t.as_f64())).collect();
        let guess = |pick: fn(&(T, T)) -> f64| {
            let last = pick(&window[window.len() - 1]);
            let prev = window
                .len()
                .checked_sub(2)
                .map_or(last - 1.0, |i| pick(&window[i]));
            (
                2.0 * last - prev,
                (last - prev).abs().max(1e-3 * (1.0 + last.abs())),
            )
        };
        let xg = guess(|p| p.0.as_f64());
        let ug = guess(|p| p.1.as_f64());
        let (x, u) = if !omega.contains(&uv) {
            let x =
                solve_scalar(omega, &xv, &fb, xg).ok_or(RuntimeError::Bracket { m, var: "x" })?;
            fb.insert(xv.clone(), x);
            let u = solve_scalar(f, &uv, &fb, ug).ok_or(RuntimeError::Bracket { m, var: "u" })?;
            (x, u)
        } else if !f.contains(&xv) {
            let u = solve_scalar(f, &uv, &fb, ug).ok_or(RuntimeError::Bracket { m, var: "u" })?;
            fb.insert(uv.clone(), u);
            let x =
                solve_scalar(omega, &xv, &fb, xg).ok_or(RuntimeError::Bracket { m, var: "x" })?;
            (x, u)
        } else {
            return Err(RuntimeError::Bracket {
                m,
                var: "x and u jointly",
            });
        };
        Ok((T::from_f64(x), T::from_f64(u)))
    }
}

/// Root of the numerator of `r` in `v` nearest to `guess.0`, searched on
/// subintervals of brackets of growing half-width starting at `guess.1`,
/// then refined by bisection.
fn solve_scalar(r: &RationalFunction, v: &Var, b: &Binding<f64>, guess: (f64, f64)) -> Option<f64> {
    const PIECES: i32 = 16;
    let (centre, h0) = guess;
    let num = r.numerator();
    let g = |t: f64| {
        num.eval(&b.clone().with(v.clone(), t))
            .ok()
            .filter(|y| y.is_finite())
    };
    for level in 0..60 {
        let h = h0 * 2f64.powi(level);
        let step = 2.0 * h / PIECES as f64;
        let mut best: Option<f64> = None;
        for i in 0..PIECES {
            let a = centre - h + step * i as f64;
            let c = a + step;
            let (Some(ga), Some(gc)) = (g(a), g(c)) else {
                continue;
            };
            let root = if ga == 0.0 {
                Some(a)
            } else if gc == 0.0 {
                Some(c)
            } else if ga.signum() != gc.signum() {
                Some(bisect(&g, a, c, ga))
            } else {
                None
            };
            if let Some(t) = root {
                if best.is_none_or(|b| (t - centre).abs() < (b - centre).abs()) {
                    best = Some(t);
                }
            }
        }
        if best.is_some() {
            return best;
        }
    }
    None
}

fn bisect(g: &impl Fn(f64) -> Option<f64>, mut a: f64, mut c: f64, mut ga: f64) -> f64 {
    for _ in 0..200 {
        let mid = 0.5 * (a + c);
        if mid == a || mid == c {
            break;
        }
        let Some(gm) = g(mid) else { break };
        if gm == 0.0 {
            return mid;
        }
        if gm.signum() == ga.signum() {
            a = mid;
            ga = gm;
        } else {
            c = mid;
        }
    }
    0.5 * (a + c)
}

/// Extends the `n` initial points by `steps` points, checking every new
/// window and that `x` stays strictly monotone.
pub fn generate_orbit<T: Scalar>(
    stepper: &Stepper,
    initial: &Orbit<T>,
    steps: usize,
) -> Result<Orbit<T>> {
    let n = stepper.order();
    if initial.len() != n {
        return Err(RuntimeError::WindowShortfall {
            len: initial.len(),
            need: n,
        });
    }
    let mut orbit = initial.clone();
    check_monotone(&orbit)?;
    orbit.points.reserve(steps);
    for _ in 0..steps {
        let start = orbit.len() - n;
        let m = orbit.base + start as i64;
        let next = stepper.step(&orbit.points[start..], m)?;
        orbit.points.push(next);
        check_monotone_tail(&orbit)?;
    }
    Ok(orbit)
}

fn check_monotone<T: Scalar>(o: &Orbit<T>) -> Result<()> {
    for i in 2..=o.len() {
        check_monotone_at(o, i)?;
    }
    Ok(())
}

fn check_monotone_tail<T: Scalar>(o: &Orbit<T>) -> Result<()> {
    check_monotone_at(o, o.len())
}

fn check_monotone_at<T: Scalar>(o: &Orbit<T>, end: usize) -> Result<()> {
    if end < 2 {
        return Ok(());
    }
    let p = &o.points;
    let increasing = p[1].0 > p[0].0;
    let (a, b) = (&p[end - 2].0, &p[end - 1].0);
    let ok = if increasing { b > a } else { b < a };
    if ok {
        Ok(())
    } else {
        Err(RuntimeError::NonMonotone {
            m: o.base + end as i64 - 1,
        })
    }
}

/// Largest relative residual of `F` and `Ω` over all windows of the orbit.
pub fn scheme_residual<T: Scalar>(s: &SchemeSystem, o: &Orbit<T>) -> Result<f64> {
    let n = s.order() as i32;
    let mut worst = 0f64;
    let mut m = o.base;
    while let Some(b) = o.window(m, 0, n) {
        for r in [s.f_form(), s.omega_form()] {
            let res = relative_residual(r, &b).map_err(|e| RuntimeError::Degenerate {
                m,
                reason: e.to_string(),
            })?;
            worst = worst.max(res);
        }
        m += 1;
    }
    Ok(worst)
}

// ---- drift ----

#[derive(Clone, Debug, PartialEq)]
pub struct DriftReport {
    pub name: String,
    /// `(m, J(m))` for every admissible `m`.
    pub values: Vec<(i64, f64)>,
    /// `J(m + 1) - J(m)`, computed before rounding to `f64`.
    pub deltas: Vec<f64>,
    pub max_change: f64,
    /// Largest `|J(m + 1) - J(m)| / max(1, |J(m)|)`.
    pub max_relative_change: f64,
    pub tolerance: f64,
    pub pass: bool,
}

/// Evaluates the integral `j` on every window of the orbit.
pub fn integral_drift<T: Scalar>(
    name: &str,
    j: &RationalFunction,
    o: &Orbit<T>,
    tolerance: f64,
) -> Result<DriftReport> {
    let (lo, hi) = stencil_span(j.vars()).unwrap_or((0, 0));
    let need = (hi - lo + 1) as usize;
    let first = o.base - lo as i64;
    let last = o.last_index() - hi as i64;
    if o.len() < need || last < first {
        return Err(RuntimeError::WindowShortfall { len: o.len(), need });
    }
    let mut exact = Vec::new();
    for m in first..=last {
        let b = o.window(m, lo, hi).expect("window inside the orbit");
        let v = j.eval(&b).map_err(|e| RuntimeError::Degenerate {
            m,
            reason: e.to_string(),
        })?;
        exact.push((m, v));
    }
    let mut deltas = Vec::new();
    let mut max_change = 0f64;
    let mut max_relative_change = 0f64;
    for w in exact.windows(2) {
        let d = (w[1].1.clone() - w[0].1.clone()).as_f64();
        let rel = d.abs() / 1f64.max(w[0].1.as_f64().abs());
        deltas.push(d);
        max_change = max_change.max(d.abs());
        max_relative_change = max_relative_change.max(rel);
        if d.is_nan() {
            max_relative_change = f64::NAN;
        }
    }
    Ok(DriftReport {
        name: name.to_string(),
        values: exact.iter().map(|(m, v)| (*m, v.as_f64())).collect(),
        deltas,
        max_change,
        max_relative_change,
        tolerance,
        pass: max_relative_change <= tolerance,
    })
}

// ---- closed-form solution families ----

/// One coordinate of the cross-ratio solution family: `1/(c1 m + c2) + c3`,
/// or the linear sequence `c1 m + c2`.
#[derive(Clone, Debug, PartialEq)]
pub enum Branch<T> {
    Generic { c1: T, c2: T, c3: T },
    Linear { c1: T, c2: T },
}

impl<T: Scalar> Branch<T> {
    /// `None` at the pole.
    pub fn value_at(&self, m: i64) -> Option<T> {
        let m = T::from_i64(m);
        match self {
            Branch::Generic { c1, c2, c3 } => {
                let d = c1.clone() * m + c2.clone();
                (!d.is_zero()).then(|| T::one() / d + c3.clone())
            }
            Branch::Linear { c1, c2 } => Some(c1.clone() * m + c2.clone()),
        }
    }

    /// Location of the pole in `m` for the generic branch.
    pub fn pole(&self) -> Option<f64> {
        match self {
            Branch::Generic { c1, c2, .. } if !c1.is_zero() => Some(-(c2.as_f64() / c1.as_f64())),
            _ => None,
        }
    }

    pub fn constants(&self) -> Vec<T> {
        match self {
            Branch::Generic { c1, c2, c3 } => vec![c1.clone(), c2.clone(), c3.clone()],
            Branch::Linear { c1, c2 } => vec![c1.clone(), c2.clone()],
        }
    }

    pub fn is_linear(&self) -> bool {
        matches!(self, Branch::Linear { .. })
    }

    pub fn to_f64(&self) -> Branch<f64> {
        match self {
            Branch::Generic { c1, c2, c3 } => Branch::Generic {
                c1: c1.as_f64(),
                c2: c2.as_f64(),
                c3: c3.as_f64(),
            },
            Branch::Linear { c1, c2 } => Branch::Linear {
                c1: c1.as_f64(),
                c2: c2.as_f64(),
            },
        }
    }
}

/// `u_m` and `x_m` of a cross-ratio solution.
#[derive(Clone, Debug, PartialEq)]
pub struct SolutionFamily<T> {
    pub u: Branch<T>,
    pub x: Branch<T>,
}

impl<T: Scalar> SolutionFamily<T> {
    /// Points `base .. base + len - 1`; fails when the mesh pole falls
    /// inside that range or a value is singular.
    pub fn orbit(&self, base: i64, len: usize) -> Result<Orbit<T>> {
        let last = base + len as i64 - 1;
        if let Some(pole) = self.x.pole() {
            if pole >= base as f64 && pole <= last as f64 {
                return Err(RuntimeError::MeshPole { pole });
            }
        }
        let mut points = Vec::with_capacity(len);
        for m in base..=last {
            let x = self.x.value_at(m);
            let u = self.u.value_at(m);
            match (x, u) {
                (Some(x), Some(u)) => points.push((x, u)),
                _ => {
                    return Err(RuntimeError::Degenerate {
                        m,
                        reason: "the closed form is singular here".into(),
                    })
                }
            }
        }
        Ok(Orbit::new(base, points))
    }

    pub fn to_f64(&self) -> SolutionFamily<f64> {
        SolutionFamily {
            u: self.u.to_f64(),
            x: self.x.to_f64(),
        }
    }
}

fn random_rational(rng: &mut impl Rng, lo: i64, hi: i64) -> BigRational {
    let d: i64 = rng.gen_range(1..=16);
    let n: i64 = rng.gen_range(lo * d..=hi * d);
    BigRational::new(n.into(), d.into())
}

/// A random generic family with positive `c1, c2` in both coordinates, so
/// that neither coordinate has a pole for `m >= 0`.
pub fn random_generic_family(rng: &mut impl Rng) -> SolutionFamily<BigRational> {
    let branch = |rng: &mut _| {
        let positive = |rng: &mut _| loop {
            let r = random_rational(rng, 0, 3);
            if r > BigRational::new(1.into(), 4.into()) {
                break r;
            }
        };
        Branch::Generic {
            c1: positive(rng),
            c2: positive(rng),
            c3: random_rational(rng, -3, 3),
        }
    };
    let u = branch(rng);
    let x = branch(rng);
    SolutionFamily { u, x }
}

/// Deterministic variant of [`random_generic_family`].
pub fn random_generic_family_seeded(seed: u64) -> SolutionFamily<BigRational> {
    random_generic_family(&mut ChaCha8Rng::seed_from_u64(seed))
}

// ---- constant reconstruction ----

/// Names of the integral values read by [`reconstruct_constants`] for one
/// coordinate: `(X_a, 1)`, `(X_b, 1)`, `(X_a, m)` for the generic branch and
/// `(X_c, 1)`, `(X_c, m)` for the linear one, where `X_a`, `X_b`, `X_c` are
/// the translation, scaling and projective generators of that coordinate.
#[derive(Clone, Copy, Debug)]
pub struct IntegralNames {
    pub translation: &'static str,
    pub scaling: &'static str,
    pub translation_m: &'static str,
    pub projective: &'static str,
    pub projective_m: &'static str,
}

pub const U_INTEGRALS: IntegralNames = IntegralNames {
    translation: "J1a",
    scaling: "J2a",
    translation_m: "J1b",
    projective: "J3a",
    projective_m: "J3b",
};

pub const X_INTEGRALS: IntegralNames = IntegralNames {
    translation: "J4a",
    scaling: "J5a",
    translation_m: "J4b",
    projective: "J6a",
    projective_m: "J6b",
};

/// Values of the integrals on the closed-form family of the `K = 4`
/// cross-ratio scheme, keyed as in [`U_INTEGRALS`] and [`X_INTEGRALS`].
pub fn integral_values(f: &SolutionFamily<f64>) -> BTreeMap<String, f64> {
    let mut out = BTreeMap::new();
    for (branch, names) in [(&f.u, U_INTEGRALS), (&f.x, X_INTEGRALS)] {
        let (a, b, am, c, cm) = match *branch {
            Branch::Generic { c1, c2, c3 } => (
                4.0 * c1,
                4.0 * c1 * c3,
                -2.0 * (3.0 * c1 + 2.0 * c2),
                4.0 * c1 * c3 * c3,
                -2.0 * c3 * (3.0 * c1 * c3 + 2.0 * c2 * c3 + 2.0),
            ),
            Branch::Linear { c1, c2 } => (0.0, 0.0, 0.0, -4.0 * c1, 2.0 * (3.0 * c1 + 2.0 * c2)),
        };
        for (name, v) in [
            (names.translation, a),
            (names.scaling, b),
            (names.translation_m, am),
            (names.projective, c),
            (names.projective_m, cm),
        ] {
            out.insert(name.to_string(), v);
        }
    }
    out
}

fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol * 1f64.max(a.abs()).max(b.abs())
}

fn reconstruct_branch(values: &BTreeMap<String, f64>, names: IntegralNames) -> Result<Branch<f64>> {
    let get = |name: &str| {
        values
            .get(name)
            .copied()
            .ok_or_else(|| RuntimeError::MissingIntegral(name.to_string()))
    };
    let a = get(names.translation)?;
    if a.abs() <= LINEAR_BRANCH_TOLERANCE {
        for name in [names.scaling, names.translation_m] {
            if let Some(v) = values.get(name) {
                if v.abs() > CONSISTENCY_TOLERANCE {
                    return Err(RuntimeError::Inconsistent(format!(
                        "{} vanishes but {name} = {v}",
                        names.translation
                    )));
                }
            }
        }
        let c1 = -get(names.projective)? / 4.0;
        if c1 == 0.0 {
            return Err(RuntimeError::Inconsistent(
                "a constant sequence is not a solution".into(),
            ));
        }
        let c2 = (get(names.projective_m)? / 2.0 - 3.0 * c1) / 2.0;
        return Ok(Branch::Linear { c1, c2 });
    }
    let b = get(names.scaling)?;
    let am = get(names.translation_m)?;
    let c1 = a / 4.0;
    let c3 = b / a;
    let c2 = -am / 4.0 - 3.0 * a / 8.0;
    if let Some(&c) = values.get(names.projective) {
        if !close(c, 4.0 * c1 * c3 * c3, CONSISTENCY_TOLERANCE) {
            return Err(RuntimeError::Inconsistent(format!(
                "{} = {c} but the other integrals predict {}",
                names.projective,
                4.0 * c1 * c3 * c3
            )));
        }
    }
    Ok(Branch::Generic { c1, c2, c3 })
}

/// Inverts [`integral_values`]: `(C1, C2, C3)` of `u_m` and `(C4, C5, C6)` of
/// `x_m`, choosing the linear branch when the translation integral vanishes.
pub fn reconstruct_constants(values: &BTreeMap<String, f64>) -> Result<SolutionFamily<f64>> {
    if values.is_empty() {
        return Err(RuntimeError::MissingIntegral("any".into()));
    }
    Ok(SolutionFamily {
        u: reconstruct_branch(values, U_INTEGRALS)?,
        x: reconstruct_branch(values, X_INTEGRALS)?,
    })
}

// ---- exactness ----

#[derive(Clone, Debug, PartialEq)]
pub struct ExactnessReport {
    /// `(a, b, c, d)` of the fitted `u = (a x + b) / (c x + d)`.
    pub fit: [f64; 4],
    /// `c = 0` up to rounding: `u` is affine in `x`.
    pub linear: bool,
    /// Largest `|u_m - fit(x_m)| / max(1, |u_m|)` over the orbit.
    pub deviation: f64,
    pub pass: bool,
}

fn det3<T: Scalar>(m: [[T; 3]; 3]) -> T {
    let [a, b, c] = m;
    a[0].clone() * (b[1].clone() * c[2].clone() - b[2].clone() * c[1].clone())
        - a[1].clone() * (b[0].clone() * c[2].clone() - b[2].clone() * c[0].clone())
        + a[2].clone() * (b[0].clone() * c[1].clone() - b[1].clone() * c[0].clone())
}

/// Fits `u = 1/(α x + β) + γ`, or `u = α x + β`, through the first, middle
/// and last points and measures the deviation of all points from the fit.
/// Both shapes are the Möbius maps `u = (a x + b)/(c x + d)`, so one fit
/// covers them.
pub fn exactness_check<T: Scalar>(o: &Orbit<T>) -> Result<ExactnessReport> {
    if o.len() < 6 {
        return Err(RuntimeError::WindowShortfall {
            len: o.len(),
            need: 6,
        });
    }
    let picks = [0, o.len() / 2, o.len() - 1];
    let rows: Vec<[T; 4]> = picks
        .iter()
        .map(|&i| {
            let (x, u) = o.points[i].clone();
            [x.clone(), T::one(), -(x * u.clone()), -u]
        })
        .collect();
    let minor = |skip: usize| {
        let mut m: [[T; 3]; 3] = std::array::from_fn(|_| std::array::from_fn(|_| T::zero()));
        for (r, row) in rows.iter().enumerate() {
            let mut c = 0;
            for (j, v) in row.iter().enumerate() {
                if j != skip {
                    m[r][c] = v.clone();
                    c += 1;
                }
            }
        }
        det3(m)
    };
    let coeffs: [T; 4] = std::array::from_fn(|j| if j % 2 == 0 { minor(j) } else { -minor(j) });
    let [a, b, c, d] = coeffs.clone();
    let scale = coeffs.iter().map(|t| t.as_f64().abs()).fold(0.0, f64::max);
    if scale == 0.0 {
        return Err(RuntimeError::FitDegenerate(
            "the fit points coincide".into(),
        ));
    }
    let det = (a.clone() * d.clone() - b.clone() * c.clone()).as_f64();
    if det.abs() <= 1e-14 * scale * scale {
        return Err(RuntimeError::FitDegenerate(
            "u is constant along the orbit".into(),
        ));
    }
    let mut deviation = 0f64;
    for (x, u) in &o.points {
        let den = c.clone() * x.clone() + d.clone();
        if den.is_zero() {
            return Err(RuntimeError::FitDegenerate(
                "the fitted map is singular on the orbit".into(),
            ));
        }
        let fit = (a.clone() * x.clone() + b.clone()) / den;
        let dev = (u.clone() - fit).as_f64().abs() / 1f64.max(u.as_f64().abs());
        deviation = deviation.max(dev);
    }
    let fit = coeffs.map(|t| t.as_f64() / scale);
    Ok(ExactnessReport {
        linear: fit[2].abs() <= 1e-12,
        fit,
        deviation,
        pass: deviation <= EXACTNESS_TOLERANCE,
    })
}

// ---- reports ----

/// Columns `m,x,u`.
pub fn orbit_csv<T: Scalar>(o: &Orbit<T>) -> String {
    let mut out = String::from("m,x,u\n");
    for (i, (x, u)) in o.points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{:e},{:e}",
            o.base + i as i64,
            x.as_f64(),
            u.as_f64()
        );
    }
    out
}

/// Columns `m,x_num,x_den,u_num,u_den`.
pub fn orbit_csv_exact(o: &Orbit<BigRational>) -> String {
    let mut out = String::from("m,x_num,x_den,u_num,u_den\n");
    for (i, (x, u)) in o.points.iter().enumerate() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            o.base + i as i64,
            x.numer(),
            x.denom(),
            u.numer(),
            u.denom()
        );
    }
    out
}

/// Columns `integral,m,value,delta`; `delta` is empty on the first row.
pub fn drift_csv(reports: &[DriftReport]) -> String {
    let mut out = String::from("integral,m,value,delta\n");
    for r in reports {
        for (i, (m, v)) in r.values.iter().enumerate() {
            let delta = if i == 0 {
                String::new()
            } else {
                format!("{:e}", r.deltas[i - 1])
            };
            let _ = writeln!(out, "{},{m},{v:e},{delta}", r.name);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::DoubleDouble;

    const F: &str = "(u[3]-u[1])*(u[2]-u[0])/((u[3]-u[2])*(u[1]-u[0])) - 4";
    const OMEGA: &str = "(x[3]-x[1])*(x[2]-x[0])/((x[3]-x[2])*(x[1]-x[0])) - 4";

    fn stepper() -> Stepper {
        Stepper::new(&SchemeSystem::parse(F, OMEGA, 3).unwrap()).unwrap()
    }

    fn pts(xs: &[f64], us: &[f64]) -> Vec<(f64, f64)> {
        xs.iter().copied().zip(us.iter().copied()).collect()
    }

    #[test]
    fn steps_continue_known_sequences() {
        let s = stepper();
        let (_, u) = s
            .step(&pts(&[0.0, 0.1, 0.2], &[1.0, 0.5, 1.0 / 3.0]), 0)
            .unwrap();
        assert!((u - 0.25).abs() < 1e-15);
        let (x, u) = s.step(&pts(&[0.0, 0.1, 0.2], &[0.0, 1.0, 2.0]), 0).unwrap();
        assert!((u - 3.0).abs() < 1e-15 && (x - 0.3).abs() < 1e-15);
        let err = s
            .step(&pts(&[0.0, 0.1, 0.2], &[1.0, 1.0, 2.0]), 0)
            .unwrap_err();
        assert!(matches!(err, RuntimeError::Degenerate { .. }), "{err}");
    }

    #[test]
    fn root_finding_agrees_with_the_closed_form() {
        let s = Stepper::root_finding(stepper().scheme()).unwrap();
        let (x, u) = s
            .step(&pts(&[0.0, 0.1, 0.2], &[1.0, 0.5, 1.0 / 3.0]), 0)
            .unwrap();
        assert!((u - 0.25).abs() < 1e-13, "{u}");
        assert!((x - 0.3).abs() < 1e-13, "{x}");
    }

    #[test]
    fn unbound_constants_are_rejected() {
        let s = SchemeSystem::parse(&F.replace('4', "K"), &OMEGA.replace('4', "K"), 3).unwrap();
        assert!(matches!(
            Stepper::new(&s),
            Err(RuntimeError::UnboundConstant(_))
        ));
    }

    #[test]
    fn orbits_satisfy_the_scheme() {
        let s = stepper();
        let init = Orbit::new(
            0,
            (0..3)
                .map(|m| (m as f64 / 10.0, 1.0 / (m as f64 + 1.0)))
                .collect(),
        );
        let o = generate_orbit(&s, &init, 50).unwrap();
        assert_eq!(o.len(), 53);
        assert!(scheme_residual(s.scheme(), &o).unwrap() <= SCHEME_TOLERANCE);
        assert_eq!(generate_orbit(&s, &init, 0).unwrap(), init);
    }

    #[test]
    fn mesh_reversal_is_reported() {
        let s = stepper();
        let init = Orbit::new(0, pts(&[0.0, 1.0, 0.5], &[0.0, 1.0, 2.0]));
        assert!(matches!(
            generate_orbit(&s, &init, 3),
            Err(RuntimeError::NonMonotone { m: 2 })
        ));
    }

    #[test]
    fn closed_form_family_round_trip() {
        let fam = SolutionFamily {
            u: Branch::Generic {
                c1: 1.0,
                c2: 2.0,
                c3: 5.0,
            },
            x: Branch::Linear { c1: 1.0, c2: 0.0 },
        };
        let rec = reconstruct_constants(&integral_values(&fam)).unwrap();
        assert_eq!(rec, fam);
        assert!(reconstruct_constants(&BTreeMap::new()).is_err());
        let pole = SolutionFamily {
            u: Branch::Linear { c1: 1.0, c2: 0.0 },
            x: Branch::Generic {
                c1: 1.0,
                c2: -5.0,
                c3: 0.0,
            },
        };
        assert!(matches!(
            pole.orbit(0, 10),
            Err(RuntimeError::MeshPole { .. })
        ));
    }

    #[test]
    fn exactness_detects_perturbations() {
        let fam = SolutionFamily {
            u: Branch::Generic {
                c1: 1.0,
                c2: 1.0,
                c3: 0.0,
            },
            x: Branch::Generic {
                c1: 0.5,
                c2: 3.0,
                c3: 1.0,
            },
        };
        let init = fam.orbit(0, 3).unwrap().map(|t| DoubleDouble::from(*t));
        let o = generate_orbit(&stepper(), &init, 30).unwrap();
        let rep = exactness_check(&o).unwrap();
        assert!(rep.pass, "{}", rep.deviation);
        let mut bad = o.clone();
        bad.points[2].1 = bad.points[2].1 + DoubleDouble::from(1e-3);
        let rep = exactness_check(&bad).unwrap();
        assert!(
            !rep.pass && (rep.deviation - 1e-3).abs() < 5e-4,
            "{}",
            rep.deviation
        );
        let line = Orbit::new(
            0,
            (0..8).map(|m| (m as f64, 2.0 * m as f64 + 1.0)).collect(),
        );
        let rep = exactness_check(&line).unwrap();
        assert!(rep.linear && rep.deviation == 0.0);
    }

    #[test]
    fn csv_layouts() {
        let o = Orbit::new(3, pts(&[0.5], &[2.0]));
        assert_eq!(orbit_csv(&o), "m,x,u\n3,5e-1,2e0\n");
        let q = o.map(|t| BigRational::from_float(*t).unwrap());
        assert_eq!(
            orbit_csv_exact(&q),
            "m,x_num,x_den,u_num,u_den\n3,1,2,2,1\n"
        );
    }
}
