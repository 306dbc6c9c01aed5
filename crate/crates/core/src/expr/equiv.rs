use num_bigint::BigInt;
use num_rational::BigRational;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::{Binding, ExprError, Expression, Var};

/// Settings for [`EquivalenceCheck::run`]: random exact-rational probes
/// followed by a normal-form comparison when every probe agrees.
#[derive(Clone, Debug)]
pub struct EquivalenceCheck {
    pub seed: u64,
    pub samples: usize,
    pub max_retries: usize,
}

impl Default for EquivalenceCheck {
    fn default() -> Self {
        EquivalenceCheck {
            seed: 0x5eed,
            samples: 20,
            max_retries: 100,
        }
    }
}

/// A random rational with absolute value in `[1/10, 2]`.
pub fn sample_point(rng: &mut impl Rng) -> BigRational {
    let d: i64 = rng.gen_range(7..=97);
    let lo = (d + 9) / 10;
    let n: i64 = rng.gen_range(lo..=2 * d);
    let r = BigRational::new(BigInt::from(n), BigInt::from(d));
    if rng.gen_bool(0.5) {
        -r
    } else {
        r
    }
}

impl EquivalenceCheck {
    pub fn run(&self, a: &Expression, b: &Expression) -> Result<bool, ExprError> {
        let mut vars = a.vars();
        vars.extend(b.vars());
        let vars: Vec<Var> = vars.into_iter().collect();
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let mut agreed = 0;
        let mut retries = 0;
        while agreed < self.samples && retries <= self.max_retries {
            let binding: Binding<BigRational> = vars
                .iter()
                .map(|v| (v.clone(), sample_point(&mut rng)))
                .collect();
            match (a.eval(&binding), b.eval(&binding)) {
                (Ok(x), Ok(y)) => {
                    if x != y {
                        return Ok(false);
                    }
                    agreed += 1;
                }
                (Err(ExprError::DivisionByZero(_)), _) | (_, Err(ExprError::DivisionByZero(_))) => {
                    retries += 1;
                }
                (Err(e), _) | (_, Err(e)) => return Err(e),
            }
        }
        let ra = a.to_rational_function()?;
        let rb = b.to_rational_function()?;
        Ok(ra == rb)
    }
}

/// Whether `a` and `b` denote the same rational function.
pub fn equivalent(a: &Expression, b: &Expression) -> Result<bool, ExprError> {
    EquivalenceCheck::default().run(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn eq(a: &str, b: &str) -> bool {
        equivalent(&parse(a).unwrap(), &parse(b).unwrap()).unwrap()
    }

    #[test]
    fn equal_and_unequal() {
        assert!(eq("(u+1)^2", "u^2 + 2*u + 1"));
        assert!(eq(
            "1/(u[1]-u[0]) - 1/(u[2]-u[0])",
            "(u[2]-u[1])/((u[1]-u[0])*(u[2]-u[0]))"
        ));
        assert!(!eq("u^2", "u^2 + 10^(-30)"));
        assert!(!eq("K*m", "K + m"));
    }

    #[test]
    fn singular_expressions_are_errors() {
        let a = parse("1/(u - u)").unwrap();
        assert!(equivalent(&a, &a).is_err());
    }
}
