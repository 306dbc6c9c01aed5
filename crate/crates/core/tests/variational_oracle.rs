mod common;

use common::{random_model, same};
use firstint::discrete::{discrete_variational, higher_discrete_el, Wrt};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn variational_derivative_matches_brute_force_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..100 {
        let model = random_model(&mut rng);
        let e = model.to_expression();
        for (wrt, family) in [(Wrt::U, 'u'), (Wrt::X, 'x')] {
            let expected = model.variational(family, 0).to_expression();
            let got = discrete_variational(&e, wrt);
            assert!(same(&got, &expected), "{e}: {got} vs {expected}");
        }
    }
}

#[test]
fn higher_operators_match_brute_force_sum() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..100 {
        let model = random_model(&mut rng);
        let e = model.to_expression();
        for j in 1..=4 {
            for (wrt, family) in [(Wrt::U, 'u'), (Wrt::X, 'x')] {
                let expected = model.variational(family, j).to_expression();
                let got = higher_discrete_el(&e, j, wrt);
                assert!(same(&got, &expected), "j = {j}, {e}: {got} vs {expected}");
            }
        }
    }
}

#[test]
fn top_operator_is_a_single_partial() {
    let e = firstint::expr::parse("m*u[0]*u[3]^2 + x[1]*u[3]").unwrap();
    let got = higher_discrete_el(&e, 3, Wrt::U);
    assert!(same(
        &got,
        &firstint::expr::parse("2*m*u[0]*u[3] + x[1]").unwrap()
    ));
    assert!(higher_discrete_el(&e, 4, Wrt::U).is_zero());
}

#[test]
fn model_shift_expands_the_index() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..20 {
        let model = random_model(&mut rng);
        let back = model.shifted(-2).shifted(2);
        assert!(same(&back.to_expression(), &model.to_expression()));
        assert!(same(
            &model.shifted(-1).to_expression(),
            &model.to_expression().shift(-1)
        ));
    }
}
