//! Triviality and functional-independence classification of first
//! integrals via exact Jacobian ranks at random rational points.

use std::collections::BTreeSet;

use num_rational::BigRational;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::expr::{sample_point, Binding, RationalFunction, Var};
use crate::linalg::{rank, Matrix};

const POINTS: usize = 3;
const MAX_REDRAWS: usize = 100;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum IntegralClass {
    /// Constant on solutions, including identically zero.
    Trivial,
    /// Raises the Jacobian rank of the integrals accepted before it.
    Independent,
    /// A function of the integrals accepted before it.
    Dependent,
}

impl std::fmt::Display for IntegralClass {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IntegralClass::Trivial => "trivial",
            IntegralClass::Independent => "independent",
            IntegralClass::Dependent => "dependent",
        })
    }
}

struct Jacobians {
    // one matrix per sample point; row i holds the gradient of integral i
    at_points: Vec<Matrix>,
}

impl Jacobians {
    fn new(integrals: &[RationalFunction], wrt: &[Var], seed: u64) -> Option<Self> {
        let partials: Vec<Vec<RationalFunction>> = integrals
            .iter()
            .map(|f| wrt.iter().map(|v| f.diff(v)).collect())
            .collect();
        let mut vars: BTreeSet<Var> = wrt.iter().cloned().collect();
        for f in integrals {
            vars.extend(f.vars());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut at_points = Vec::new();
        let mut redraws = 0;
        while at_points.len() < POINTS {
            let b: Binding<BigRational> = vars
                .iter()
                .map(|v| (v.clone(), sample_point(&mut rng)))
                .collect();
            let rows: Result<Matrix, _> = partials
                .iter()
                .map(|row| row.iter().map(|p| p.eval(&b)).collect())
                .collect();
            let ok = integrals.iter().all(|f| f.eval(&b).is_ok());
            match rows {
                Ok(m) if ok => at_points.push(m),
                _ => {
                    redraws += 1;
                    if redraws > MAX_REDRAWS {
                        return None;
                    }
                }
            }
        }
        Some(Jacobians { at_points })
    }

    fn rank_of(&self, rows: &[usize]) -> usize {
        self.at_points
            .iter()
            .map(|m| rank(&rows.iter().map(|&i| m[i].clone()).collect()))
            .max()
            .unwrap_or(0)
    }
}

/// Generic rank of the Jacobian of `integrals` with respect to `wrt`.
pub fn jacobian_rank(integrals: &[RationalFunction], wrt: &[Var], seed: u64) -> Option<usize> {
    let j = Jacobians::new(integrals, wrt, seed)?;
    Some(j.rank_of(&(0..integrals.len()).collect::<Vec<_>>()))
}

/// Classifies each integral in order: constants are trivial, otherwise an
/// integral is independent when it raises the rank of the independent set
/// accepted so far.
pub fn classify(
    integrals: &[RationalFunction],
    wrt: &[Var],
    seed: u64,
) -> Option<Vec<IntegralClass>> {
    let j = Jacobians::new(integrals, wrt, seed)?;
    let mut chosen: Vec<usize> = Vec::new();
    let mut out = Vec::with_capacity(integrals.len());
    for (i, f) in integrals.iter().enumerate() {
        if f.as_constant().is_some() {
            out.push(IntegralClass::Trivial);
            continue;
        }
        chosen.push(i);
        if j.rank_of(&chosen) == chosen.len() {
            out.push(IntegralClass::Independent);
        } else {
            chosen.pop();
            out.push(IntegralClass::Dependent);
        }
    }
    Some(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn rf(s: &str) -> RationalFunction {
        parse(s).unwrap().to_rational_function().unwrap()
    }

    #[test]
    fn products_of_integrals_are_dependent() {
        let a = rf("u''^2/u'^3");
        let b = rf("u*u''^2/u'^3 - 2*u''/u'");
        let c = rf("u''^4/u'^6 + 3");
        let wrt = [Var::jet_u(0), Var::jet_u(1), Var::jet_u(2)];
        let classes = classify(&[a, rf("7"), b, c], &wrt, 1).unwrap();
        assert_eq!(
            classes,
            vec![
                IntegralClass::Independent,
                IntegralClass::Trivial,
                IntegralClass::Independent,
                IntegralClass::Dependent
            ]
        );
    }
}
