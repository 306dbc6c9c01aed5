//! Multivariate polynomial gcd over the integers.
//!
//! The fast path evaluates one variable at a large integer, recurses, and
//! lifts the result back by balanced radix expansion; a candidate is only
//! accepted once it divides both arguments exactly. When that fails the
//! primitive parts are reduced with a primitive pseudo-remainder sequence.

use std::collections::BTreeMap;

use num_bigint::BigInt;
use num_integer::Integer;
use num_traits::{Signed, Zero};

use super::poly::Poly;
use super::Var;

/// Gcd normalized to be primitive with a positive leading coefficient.
/// `gcd(0, 0) = 0`.
pub fn gcd(a: &Poly, b: &Poly) -> Poly {
    if a.is_zero() {
        return b.primitive();
    }
    if b.is_zero() {
        return a.primitive();
    }
    let ma = a.monomial_content();
    let mb = b.monomial_content();
    let mono = ma.gcd(&mb);
    let a = if ma.is_one() {
        a.clone()
    } else {
        a.div_monomial(&ma)
    };
    let b = if mb.is_one() {
        b.clone()
    } else {
        b.div_monomial(&mb)
    };
    let core = if a.as_constant().is_some() || b.as_constant().is_some() {
        Poly::one()
    } else {
        let mut vars = a.vars();
        vars.extend(b.vars());
        let vars: Vec<Var> = vars.into_iter().collect();
        match heuristic(&a, &b, &vars, 0) {
            Some(g) => g.primitive(),
            None => gcd_core(&a, &b),
        }
    };
    if mono.is_one() {
        core
    } else {
        &core * &Poly::monomial(mono, 1.into())
    }
}

const HEURISTIC_TRIES: usize = 6;
const HEURISTIC_DEPTH_TRIES: usize = 2;

/// Gcd including its integer content, sign normalized, or `None` when no
/// evaluation point produced a verified candidate.
fn heuristic(f: &Poly, g: &Poly, vars: &[Var], depth: usize) -> Option<Poly> {
    if f.is_zero() || g.is_zero() {
        let p = if f.is_zero() { g } else { f };
        return Some(positive(p.clone()));
    }
    let cf = f.content();
    let cg = g.content();
    let c = cf.gcd(&cg);
    let Some((x, rest)) = vars.split_first() else {
        return Some(Poly::constant(c));
    };
    if !f.contains(x) && !g.contains(x) {
        return heuristic(f, g, rest, depth);
    }
    let f = f.div_scalar_exact(&c);
    let g = g.div_scalar_exact(&c);
    let (fnorm, gnorm) = (f.max_norm(), g.max_norm());
    let lead = |p: &Poly, n: &BigInt| {
        let lc = p
            .leading()
            .map(|(_, a)| a.abs())
            .unwrap_or_else(|| 1.into());
        n / lc
    };
    let bound: BigInt = BigInt::from(2) * fnorm.clone().min(gnorm.clone()) + 29;
    let mut xi = (bound.clone().min(BigInt::from(99) * bound.sqrt()))
        .max(BigInt::from(2) * lead(&f, &fnorm).min(lead(&g, &gnorm)) + 4);
    let tries = if depth == 0 {
        HEURISTIC_TRIES
    } else {
        HEURISTIC_DEPTH_TRIES
    };
    for _ in 0..tries {
        let ff = f.eval_var_int(x, &xi);
        let gg = g.eval_var_int(x, &xi);
        if !ff.is_zero() && !gg.is_zero() {
            if let Some(h) = heuristic(&ff, &gg, rest, depth + 1) {
                let h = interpolate(h, &xi, x).primitive();
                if f.div_exact(&h).is_some() && g.div_exact(&h).is_some() {
                    return Some(h.scale(&c));
                }
            }
        }
        xi = BigInt::from(73794) * &xi * xi.sqrt().sqrt() / 27011;
    }
    None
}

fn positive(p: Poly) -> Poly {
    match p.leading() {
        Some((_, c)) if c.is_negative() => -&p,
        _ => p,
    }
}

/// Reads the integer coefficients of `h` as balanced base-`xi` digits, giving
/// a polynomial in `x`.
fn interpolate(mut h: Poly, xi: &BigInt, x: &Var) -> Poly {
    let half = xi / 2;
    let mut digits = Vec::new();
    while !h.is_zero() {
        let mut digit = Poly::zero();
        for (m, a) in h.terms() {
            let mut r = a.mod_floor(xi);
            if r > half {
                r -= xi;
            }
            if !r.is_zero() {
                digit.add_term(m.clone(), r);
            }
        }
        h = (&h - &digit).div_scalar_exact(xi);
        digits.push(digit);
    }
    let out = sparse(x, digits);
    positive(out)
}

fn gcd_core(a: &Poly, b: &Poly) -> Poly {
    if a.as_constant().is_some() || b.as_constant().is_some() {
        return Poly::one();
    }
    let pa = a.primitive();
    let pb = b.primitive();
    if pa == pb {
        return pa;
    }
    let (small, large) = if pa.len() <= pb.len() {
        (&pa, &pb)
    } else {
        (&pb, &pa)
    };
    if large.div_exact(small).is_some() {
        return small.clone();
    }

    let va = pa.vars();
    let vb = pb.vars();
    if let Some(x) = va.difference(&vb).next() {
        return gcd(&content_in(&pa, x), &pb);
    }
    if let Some(x) = vb.difference(&va).next() {
        return gcd(&pa, &content_in(&pb, x));
    }

    let x = va
        .iter()
        .min_by_key(|v| {
            let (da, db) = (pa.degree_in(v), pb.degree_in(v));
            (da.min(db), da.max(db))
        })
        .expect("non-constant polynomials have variables")
        .clone();
    let ca = content_in(&pa, &x);
    let cb = content_in(&pb, &x);
    let c = gcd(&ca, &cb);
    let ppa = pa.div_exact(&ca).expect("content divides");
    let ppb = pb.div_exact(&cb).expect("content divides");
    let g = primitive_prs(ppa, ppb, &x);
    (&c * &g).primitive()
}

/// Gcd of the coefficients of `p` viewed as a polynomial in `x`.
fn content_in(p: &Poly, x: &Var) -> Poly {
    let coeffs = p.coeffs_in(x);
    let mut it = coeffs.into_values();
    let mut g = it.next().map(|c| c.primitive()).unwrap_or_default();
    for c in it {
        if g.as_constant().is_some() {
            return Poly::one();
        }
        g = gcd(&g, &c);
    }
    g
}

fn primitive_part_in(p: &Poly, x: &Var) -> Poly {
    let c = content_in(p, x);
    p.div_exact(&c).expect("content divides").primitive()
}

fn dense(p: &Poly, x: &Var) -> Vec<Poly> {
    let coeffs = p.coeffs_in(x);
    let top = coeffs.keys().next_back().copied().unwrap_or(0);
    let mut out = vec![Poly::zero(); top as usize + 1];
    for (d, c) in coeffs {
        out[d as usize] = c;
    }
    out
}

fn sparse(x: &Var, coeffs: Vec<Poly>) -> Poly {
    let map: BTreeMap<u32, Poly> = coeffs
        .into_iter()
        .enumerate()
        .filter(|(_, c)| !c.is_zero())
        .map(|(d, c)| (d as u32, c))
        .collect();
    Poly::from_coeffs_in(x, &map)
}

/// Pseudo-remainder of `f` by `g` in `x`.
fn prem(f: &Poly, g: &Poly, x: &Var) -> Poly {
    let mut r = dense(f, x);
    let gv = dense(g, x);
    let dg = gv.len() - 1;
    let lcg = gv[dg].clone();
    while r.len() > dg && !r.is_empty() {
        let dr = r.len() - 1;
        let lcr = r[dr].clone();
        let s = dr - dg;
        for c in r.iter_mut() {
            *c = &*c * &lcg;
        }
        for (i, gc) in gv.iter().enumerate() {
            r[i + s] = &r[i + s] - &(&lcr * gc);
        }
        while r.last().is_some_and(|c| c.is_zero()) {
            r.pop();
        }
    }
    sparse(x, r)
}

fn primitive_prs(a: Poly, b: Poly, x: &Var) -> Poly {
    let (mut f, mut g) = if a.degree_in(x) >= b.degree_in(x) {
        (a, b)
    } else {
        (b, a)
    };
    loop {
        if g.degree_in(x) == 0 {
            return Poly::one();
        }
        let r = prem(&f, &g, x);
        if r.is_zero() {
            return g.primitive();
        }
        if r.degree_in(x) == 0 {
            return Poly::one();
        }
        f = g;
        g = primitive_part_in(&r, x);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn poly(s: &str) -> Poly {
        let rf = parse(s).unwrap().to_rational_function().unwrap();
        assert!(rf.denominator().is_one());
        rf.numerator().clone()
    }

    #[test]
    fn univariate() {
        let g = gcd(&poly("u^2 - 1"), &poly("u^2 + 2*u + 1"));
        assert_eq!(g, poly("u + 1"));
        assert_eq!(gcd(&poly("u^2 + 1"), &poly("u + 3")), Poly::one());
    }

    #[test]
    fn multivariate_linear_factors() {
        let a = poly("(u[0]-u[1])*(u[1]-u[2])^2*(x[0]+m)");
        let b = poly("(u[1]-u[2])*(u[0]+u[2])*(x[0]+m)*K");
        let g = gcd(&a, &b);
        let expected = poly("(u[1]-u[2])*(x[0]+m)").primitive();
        assert_eq!(g, expected);
    }

    #[test]
    fn integer_content_is_dropped() {
        let g = gcd(&poly("6*u*u'"), &poly("4*u^2"));
        assert_eq!(g, poly("u"));
    }

    #[test]
    fn gcd_with_zero() {
        assert_eq!(gcd(&Poly::zero(), &poly("-2*u + 4")), poly("u - 2"));
    }
}
