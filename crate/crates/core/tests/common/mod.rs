//! Shared fixtures and a brute-force model of the discrete variational sums.
#![allow(dead_code)]

use std::collections::BTreeMap;

use firstint::continuous::{OdeProblem, PointSymmetry};
use firstint::discrete::{first_integral_discrete, AdjointSolution, SchemeSystem};
use firstint::expr::RationalFunction;
use firstint::expr::{parse, Expression};
use rand::Rng;

pub const THIRD_ORDER: &str = "u'''/u' - (3/2)*u''^2/u'^2";
pub const CROSS_RATIO_U: &str = "(u[3]-u[1])*(u[2]-u[0])/((u[3]-u[2])*(u[1]-u[0])) - K";
pub const CROSS_RATIO_X: &str = "(x[3]-x[1])*(x[2]-x[0])/((x[3]-x[2])*(x[1]-x[0])) - K";

pub const GENERATORS: [(&str, &str, &str); 6] = [
    ("X1", "0", "1"),
    ("X2", "0", "u"),
    ("X3", "0", "u^2"),
    ("X4", "1", "0"),
    ("X5", "x", "0"),
    ("X6", "x^2", "0"),
];

pub fn third_order() -> OdeProblem {
    OdeProblem::parse(THIRD_ORDER).unwrap()
}

pub fn cross_ratio() -> SchemeSystem {
    SchemeSystem::parse(CROSS_RATIO_U, CROSS_RATIO_X, 3).unwrap()
}

pub fn cross_ratio_k4() -> SchemeSystem {
    SchemeSystem::parse(
        &CROSS_RATIO_U.replace('K', "4"),
        &CROSS_RATIO_X.replace('K', "4"),
        3,
    )
    .unwrap()
}

pub fn generators() -> Vec<(String, PointSymmetry)> {
    GENERATORS
        .iter()
        .map(|(n, xi, eta)| (n.to_string(), PointSymmetry::parse(xi, eta).unwrap()))
        .collect()
}

pub fn generator(name: &str) -> PointSymmetry {
    let (_, xi, eta) = GENERATORS.iter().find(|g| g.0 == name).unwrap();
    PointSymmetry::parse(xi, eta).unwrap()
}

/// `(name, generator, v, w)` for the integrals used to recover the
/// closed-form constants; the first six are the drift set.
pub const SCHEME_INTEGRALS: [(&str, &str, &str, &str); 10] = [
    ("J1a", "X1", "1", "0"),
    ("J2a", "X2", "1", "0"),
    ("J1b", "X1", "m", "0"),
    ("J4a", "X4", "0", "1"),
    ("J5a", "X5", "0", "1"),
    ("J4b", "X4", "0", "m"),
    ("J3a", "X3", "1", "0"),
    ("J3b", "X3", "m", "0"),
    ("J6a", "X6", "0", "1"),
    ("J6b", "X6", "0", "m"),
];

pub fn scheme_integrals(s: &SchemeSystem) -> Vec<(String, RationalFunction)> {
    SCHEME_INTEGRALS
        .iter()
        .map(|(name, g, v, w)| {
            let a = AdjointSolution::parse(v, w, 3).unwrap();
            let j = first_integral_discrete(s, &generator(g), &a).unwrap();
            (name.to_string(), j.best_form().clone())
        })
        .collect()
}

pub fn same(a: &Expression, b: &Expression) -> bool {
    a.to_rational_function().unwrap() == b.to_rational_function().unwrap()
}

// ---- brute-force model: polynomials as maps from exponent lists ----

/// A variable of the model: `('m', 0)` or a stencil point such as `('u', 2)`.
type Atom = (char, i32);
type Monomial = BTreeMap<Atom, u32>;

#[derive(Clone, Debug, Default)]
pub struct Model(BTreeMap<Monomial, i128>);

impl Model {
    fn add_term(&mut self, mono: Monomial, c: i128) {
        if c == 0 {
            return;
        }
        let e = self.0.entry(mono.clone()).or_insert(0);
        *e += c;
        if *e == 0 {
            self.0.remove(&mono);
        }
    }

    fn add(&mut self, other: &Model) {
        for (m, c) in &other.0 {
            self.add_term(m.clone(), *c);
        }
    }

    fn mul(&self, other: &Model) -> Model {
        let mut out = Model::default();
        for (ma, ca) in &self.0 {
            for (mb, cb) in &other.0 {
                let mut m = ma.clone();
                for (a, e) in mb {
                    *m.entry(*a).or_insert(0) += e;
                }
                out.add_term(m, ca * cb);
            }
        }
        out
    }

    pub fn partial(&self, atom: Atom) -> Model {
        let mut out = Model::default();
        for (m, c) in &self.0 {
            if let Some(&e) = m.get(&atom) {
                let mut m = m.clone();
                if e == 1 {
                    m.remove(&atom);
                } else {
                    m.insert(atom, e - 1);
                }
                out.add_term(m, c * e as i128);
            }
        }
        out
    }

    /// Moves every stencil offset by `by` and replaces `m` with `m + by`.
    pub fn shifted(&self, by: i32) -> Model {
        let mut out = Model::default();
        for (m, c) in &self.0 {
            let mut rest = Monomial::new();
            let mut m_exp = 0;
            for (&(f, k), &e) in m {
                if f == 'm' {
                    m_exp = e;
                } else {
                    rest.insert((f, k + by), e);
                }
            }
            // (m + by)^e by the binomial theorem
            let mut binom: i128 = 1;
            for i in 0..=m_exp {
                let mut mono = rest.clone();
                if i > 0 {
                    mono.insert(('m', 0), i);
                }
                let coeff = binom * (by as i128).pow(m_exp - i);
                out.add_term(mono, c * coeff);
                binom = binom * (m_exp - i) as i128 / (i + 1) as i128;
            }
        }
        out
    }

    pub fn max_offset(&self, family: char) -> Option<i32> {
        self.0
            .keys()
            .flat_map(|m| m.keys())
            .filter(|a| a.0 == family)
            .map(|a| a.1)
            .max()
    }

    pub fn to_text(&self) -> String {
        if self.0.is_empty() {
            return "0".into();
        }
        let terms: Vec<String> = self
            .0
            .iter()
            .map(|(m, c)| {
                let mut t = format!("({c})");
                for (&(f, k), &e) in m {
                    if f == 'm' {
                        t.push_str(&format!("*m^{e}"));
                    } else {
                        t.push_str(&format!("*{f}[{k}]^{e}"));
                    }
                }
                t
            })
            .collect();
        terms.join(" + ")
    }

    pub fn to_expression(&self) -> Expression {
        parse(&self.to_text()).unwrap()
    }

    /// `Σ_{k=0}^{M} S_-^k ∂/∂family[j + k]`, with `M` the largest offset.
    pub fn variational(&self, family: char, j: i32) -> Model {
        let mut out = Model::default();
        if let Some(hi) = self.max_offset(family) {
            for k in 0..=(hi - j).max(-1) {
                out.add(&self.partial((family, j + k)).shifted(-k));
            }
        }
        out
    }
}

/// A random polynomial in `m` and `x[0..3]`, `u[0..3]` with small integer
/// coefficients.
pub fn random_model(rng: &mut impl Rng) -> Model {
    let atoms: Vec<Atom> = std::iter::once(('m', 0))
        .chain((0..4).map(|k| ('u', k)))
        .chain((0..4).map(|k| ('x', k)))
        .collect();
    let mut out = Model::default();
    for _ in 0..rng.gen_range(1..=5) {
        let mut factor = Model::default();
        factor.add_term(Monomial::new(), rng.gen_range(-5..=5));
        for _ in 0..rng.gen_range(0..=3) {
            let mut atom = Model::default();
            atom.add_term(
                Monomial::from([(atoms[rng.gen_range(0..atoms.len())], rng.gen_range(1..=3))]),
                1,
            );
            factor = factor.mul(&atom);
        }
        out.add(&factor);
    }
    out
}
