mod common;

use std::collections::BTreeMap;
use std::sync::OnceLock;

use common::{cross_ratio, cross_ratio_k4, scheme_integrals};
use firstint::adjoint_solver::verify_substitution;
use firstint::discrete::AdjointSolution;
use firstint::expr::RationalFunction;
use firstint::expr::{DoubleDouble, Scalar};
use firstint::scheme_runtime::{
    exactness_check, generate_orbit, integral_drift, integral_values, random_generic_family_seeded,
    reconstruct_constants, scheme_residual, Branch, Orbit, SolutionFamily, Stepper,
    DRIFT_TOLERANCE, EXACTNESS_TOLERANCE, SCHEME_TOLERANCE,
};
use num_rational::BigRational;
use proptest::prelude::*;

fn rational(n: i64, d: i64) -> BigRational {
    BigRational::new(n.into(), d.into())
}

fn relative(a: f64, b: f64) -> f64 {
    (a - b).abs() / 1f64.max(b.abs())
}

fn worst_error(found: &SolutionFamily<f64>, truth: &SolutionFamily<f64>) -> f64 {
    assert_eq!(found.u.is_linear(), truth.u.is_linear());
    assert_eq!(found.x.is_linear(), truth.x.is_linear());
    let mut worst = 0f64;
    for (a, b) in [(&found.u, &truth.u), (&found.x, &truth.x)] {
        for (p, q) in a.constants().iter().zip(b.constants()) {
            worst = worst.max(relative(*p, q));
        }
    }
    worst
}

fn integrals() -> &'static [(String, RationalFunction)] {
    static CELL: OnceLock<Vec<(String, RationalFunction)>> = OnceLock::new();
    CELL.get_or_init(|| scheme_integrals(&cross_ratio_k4()))
}

/// Integral values read off the first window of an orbit.
fn pipeline_values<T: Scalar>(o: &Orbit<T>) -> BTreeMap<String, f64> {
    integrals()
        .iter()
        .map(|(name, j)| {
            let d = integral_drift(name, j, o, 1.0).unwrap();
            (name.clone(), d.values[0].1)
        })
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn orbits_conserve_integrals_and_stay_on_the_family(seed in any::<u64>()) {
        let s = cross_ratio_k4();
        let family = random_generic_family_seeded(seed);
        let start = family.orbit(0, 3).unwrap().map(DoubleDouble::from_rational);
        let orbit = generate_orbit(&Stepper::new(&s).unwrap(), &start, 60).unwrap();
        prop_assert!(scheme_residual(&s, &orbit).unwrap() <= SCHEME_TOLERANCE);
        for (name, j) in integrals().iter().take(6) {
            let d = integral_drift(name, j, &orbit, DRIFT_TOLERANCE).unwrap();
            prop_assert!(d.pass, "{} drifts by {:e}", name, d.max_relative_change);
        }
        let ex = exactness_check(&orbit).unwrap();
        prop_assert!(ex.pass && ex.deviation <= EXACTNESS_TOLERANCE);
        // the stepped points follow the closed form they started on
        let truth = family.to_f64();
        for m in [10i64, 30, 62] {
            let (x, u) = orbit.point(m).unwrap();
            prop_assert!(relative(x.as_f64(), truth.x.value_at(m).unwrap()) <= 1e-12);
            prop_assert!(relative(u.as_f64(), truth.u.value_at(m).unwrap()) <= 1e-12);
        }
    }

    #[test]
    fn constants_round_trip_through_the_integrals(seed in any::<u64>()) {
        let family = random_generic_family_seeded(seed);
        let truth = family.to_f64();
        let found = reconstruct_constants(&integral_values(&truth)).unwrap();
        prop_assert!(worst_error(&found, &truth) <= 1e-8);
        let orbit = family.orbit(0, 3).unwrap();
        let found = reconstruct_constants(&pipeline_values(&orbit)).unwrap();
        prop_assert!(worst_error(&found, &truth) <= 1e-8);
    }

    #[test]
    fn closed_form_values_match_the_pipeline(seed in any::<u64>()) {
        let family = random_generic_family_seeded(seed);
        let formula = integral_values(&family.to_f64());
        let pipeline = pipeline_values(&family.orbit(0, 3).unwrap());
        for (name, v) in &formula {
            prop_assert!(relative(pipeline[name], *v) <= 1e-12, "{}: {} vs {}", name, pipeline[name], v);
        }
    }
}

#[test]
fn exact_arithmetic_has_zero_drift() {
    let s = cross_ratio_k4();
    let stepper = Stepper::new(&s).unwrap();
    for seed in 0..3 {
        let start = random_generic_family_seeded(seed).orbit(0, 3).unwrap();
        let orbit = generate_orbit(&stepper, &start, 25).unwrap();
        assert_eq!(scheme_residual(&s, &orbit).unwrap(), 0.0);
        for (name, j) in integrals().iter().take(6) {
            let d = integral_drift(name, j, &orbit, 0.0).unwrap();
            assert!(d.pass && d.max_change == 0.0, "{name}");
        }
        assert_eq!(exactness_check(&orbit).unwrap().deviation, 0.0);
    }
}

#[test]
fn linear_branch_round_trips() {
    let family = SolutionFamily {
        u: Branch::Linear {
            c1: rational(3, 7),
            c2: rational(-2, 5),
        },
        x: Branch::Generic {
            c1: rational(1, 2),
            c2: rational(3, 2),
            c3: rational(-1, 3),
        },
    };
    let truth = family.to_f64();
    let values = pipeline_values(&family.orbit(0, 3).unwrap());
    assert!(values["J1a"].abs() <= 1e-12);
    let found = reconstruct_constants(&values).unwrap();
    assert!(worst_error(&found, &truth) <= 1e-8);
}

#[test]
fn polynomial_multiplier_pairs_solve_the_adjoint_system() {
    let s = cross_ratio_k4();
    let basis = ["1", "m", "m^2"];
    for v in basis {
        for w in basis {
            let a = AdjointSolution::parse(v, w, 3).unwrap();
            let report = verify_substitution(&s, &a, 5, 3).unwrap();
            assert!(report.pass, "({v}, {w}): {report:?}");
            assert_eq!(report.symbolic, Some(true));
        }
    }
    let cubic = AdjointSolution::parse("m^3", "0", 3).unwrap();
    let report = verify_substitution(&s, &cubic, 5, 3).unwrap();
    assert!(!report.pass && report.symbolic == Some(false));
    assert!(report.max_residual > 1e-6);
}

#[test]
fn other_cross_ratios_have_other_solutions() {
    // K = 5: root 1 is simple, so v = 1 is the only polynomial solution
    let mut k = BTreeMap::new();
    k.insert("K".to_string(), rational(5, 1));
    let s = cross_ratio().bind_constants(&k).unwrap();
    let one = AdjointSolution::parse("1", "1", 3).unwrap();
    assert!(verify_substitution(&s, &one, 3, 5).unwrap().pass);
    let lin = AdjointSolution::parse("m", "0", 3).unwrap();
    assert!(!verify_substitution(&s, &lin, 3, 5).unwrap().pass);
}
