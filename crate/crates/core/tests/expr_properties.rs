mod common;

use common::{central_difference, expr_tree, points, tame_at};
use ergo_core::expr::parse;
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn derivative_matches_finite_difference(e in expr_tree(6), seed in any::<u64>()) {
        let d = e.differentiate();
        for x in points(-2.0, 2.0, 100, seed) {
            if !tame_at(&e, x) {
                continue;
            }
            let Ok(exact) = d.eval(x) else { continue };
            let Some(fd) = central_difference(|y| e.eval(y).ok(), x) else { continue };
            prop_assert!(
                (exact - fd).abs() <= 1e-6 * (1.0 + exact.abs()),
                "e = {e}, d = {d}, x = {x}: {exact} vs {fd}"
            );
        }
    }

    #[test]
    fn printed_form_reparses_to_same_values(e in expr_tree(6), seed in any::<u64>()) {
        let printed = e.to_string();
        let back = parse(&printed).unwrap();
        prop_assert_eq!(back.to_string(), printed.clone());
        for x in points(-3.0, 3.0, 100, seed) {
            match (e.eval(x), back.eval(x)) {
                (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits(), "{} at {}", printed, x),
                (Err(_), Err(_)) => {}
                (a, b) => prop_assert!(false, "{printed} at {x}: {a:?} vs {b:?}"),
            }
        }
    }

    #[test]
    fn evaluation_is_deterministic(e in expr_tree(6), x in -3.0f64..3.0) {
        let a = e.eval(x);
        let b = e.clone().eval(x);
        match (a, b) {
            (Ok(a), Ok(b)) => prop_assert_eq!(a.to_bits(), b.to_bits()),
            (a, b) => prop_assert_eq!(a.is_err(), b.is_err()),
        }
    }
}

#[test]
fn grammar_examples() {
    assert_eq!(parse("2^3^2").unwrap().eval(0.0).unwrap(), 512.0);
    assert_eq!(parse("-x^2").unwrap().eval(3.0).unwrap(), -9.0);
    assert_eq!(
        parse("(1/2)*exp(-x) - (1/2)*exp(-2*x)").unwrap().eval(0.0).unwrap(),
        0.0
    );
    assert!(parse("ln(x)").unwrap().eval(-1.0).is_err());
    assert_eq!(parse("exp(-x)").unwrap().differentiate().to_string(), "-exp(-x)");
}
