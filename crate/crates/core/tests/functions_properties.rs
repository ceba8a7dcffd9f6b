mod common;

use common::{central_difference, points};
use ergo_core::expr::parse;
use ergo_core::functions::catalog::{self, Params, DYNAMICS, UTILITIES};
use ergo_core::functions::{EndBehavior, Interval, UtilityFunction};

fn close(exact: f64, approx: f64, tol: f64) -> bool {
    (exact - approx).abs() <= tol * (1.0 + exact.abs())
}

fn sample_points(domain: Interval, seed: u64) -> Vec<f64> {
    if domain.lo == 0.0 {
        points(0.2, 20.0, 100, seed)
    } else {
        points(-4.0, 4.0, 100, seed)
    }
}

fn utilities() -> Vec<UtilityFunction> {
    let mut out = Vec::new();
    for c in [0.0, -1.5, 2.0] {
        out.push(catalog::linear_utility(c));
        out.push(catalog::log_utility(c));
        out.push(catalog::sqrt_utility(c));
        out.push(catalog::exp_utility(1.0, c).unwrap());
        out.push(catalog::exp_utility(0.3, c).unwrap());
    }
    out
}

#[test]
fn catalog_utilities_satisfy_invariants() {
    for u in utilities() {
        let report = u.validate();
        assert!(report.passed, "{}: {report:?}", u.label());
        assert!(report.monotone);
        assert!(report.round_trip_max_error <= 1e-9);
        assert_eq!(report.upper, EndBehavior::Unbounded, "{}", u.label());
    }
}

#[test]
fn catalog_derivatives_match_finite_differences() {
    for (i, u) in utilities().into_iter().enumerate() {
        for x in sample_points(u.domain(), i as u64) {
            let fd1 = central_difference(|y| u.value(y).ok(), x).unwrap();
            let fd2 = central_difference(|y| u.prime(y).ok(), x).unwrap();
            assert!(close(u.prime(x).unwrap(), fd1, 1e-7), "{} u' at {x}", u.label());
            assert!(close(u.double_prime(x).unwrap(), fd2, 1e-7), "{} u'' at {x}", u.label());
            let v = u.value(x).unwrap();
            // the inverse is singular at a finite infimum of u
            if let EndBehavior::Bounded { limit } = u.lower_end() {
                if v - limit < 0.5 {
                    continue;
                }
            }
            let ifd1 = central_difference(|w| u.inverse(w).ok(), v).unwrap();
            let ifd2 = central_difference(|w| u.inverse_prime(w).ok(), v).unwrap();
            assert!(
                close(u.inverse_prime(v).unwrap(), ifd1, 1e-7),
                "{} x' at {v}",
                u.label()
            );
            assert!(
                close(u.inverse_double_prime(v).unwrap(), ifd2, 1e-7),
                "{} x'' at {v}",
                u.label()
            );
            assert!(close(u.inverse_prime(v).unwrap(), u.dxdu_at_wealth(x).unwrap(), 1e-12));
            assert!(close(
                u.inverse_double_prime(v).unwrap(),
                u.d2xdu2_at_wealth(x).unwrap(),
                1e-12
            ));
        }
    }
}

fn dynamic_params(name: &str) -> Params {
    let pairs: &[(&str, f64)] = match name {
        "additive_dynamic" => &[("a", 0.3), ("b", 0.7)],
        "gbm_dynamic" => &[("mu", 0.05), ("sigma", 0.2)],
        _ => &[("a_u", 0.5), ("b_u", 1.0)],
    };
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[test]
fn catalog_dynamics_satisfy_invariants() {
    for (i, name) in DYNAMICS.iter().enumerate() {
        let p = catalog::lookup(name, &dynamic_params(name))
            .unwrap()
            .into_process()
            .unwrap();
        assert!(p.domain().contains(p.x0()));
        for x in p.domain().sample_grid(256) {
            assert!(p.diffusion(x).unwrap() > 0.0, "{name} at {x}");
        }
        for x in sample_points(p.domain(), 100 + i as u64) {
            let fd = central_difference(|y| p.diffusion(y).ok(), x).unwrap();
            assert!(close(p.diffusion_prime(x).unwrap(), fd, 1e-7), "{name} b' at {x}");
        }
    }
}

#[test]
fn every_catalog_name_resolves() {
    for name in UTILITIES {
        assert!(catalog::lookup(name, &Params::new()).unwrap().into_utility().is_ok());
    }
    for name in DYNAMICS {
        assert!(catalog::lookup(name, &dynamic_params(name))
            .unwrap()
            .into_process()
            .is_ok());
    }
}

#[test]
fn expression_utilities_from_the_examples() {
    let log = UtilityFunction::from_expr(&parse("ln(x)").unwrap(), Interval::positive()).unwrap();
    let sqrt = UtilityFunction::from_expr(&parse("x^(1/2)").unwrap(), Interval::positive()).unwrap();
    let id = UtilityFunction::from_expr(&parse("x").unwrap(), Interval::real_line()).unwrap();
    for v in [-2.0f64, 0.3, 1.7] {
        assert!(close(v.exp(), log.inverse(v).unwrap(), 1e-11));
        assert!(close(v, id.inverse(v).unwrap(), 1e-11));
    }
    for v in [0.3f64, 1.7, 4.0] {
        assert!(close(v * v, sqrt.inverse(v).unwrap(), 1e-11));
    }
    for u in [&log, &sqrt, &id] {
        assert!(u.validate().passed);
    }
}

#[test]
fn bounded_utility_is_flagged() {
    let capped = UtilityFunction::from_expr(&parse("x/(1 + abs(x))").unwrap(), Interval::real_line()).unwrap();
    assert!(matches!(capped.upper_end(), EndBehavior::Bounded { .. }));
    assert!(matches!(capped.lower_end(), EndBehavior::Bounded { .. }));
    assert!(!capped.validate().passed);
    let on_bounded = UtilityFunction::from_expr(&parse("x").unwrap(), Interval::new(0.0, 1.0).unwrap()).unwrap();
    let report = on_bounded.validate();
    assert!(report.passed, "{report:?}");
    assert_eq!(report.warnings.len(), 2);
}
