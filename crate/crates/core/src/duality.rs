//! Utility ↔ dynamic transforms and the consistency condition.
//!
//! A utility `u` whose image follows `du = a_u dt + b_u dW` forces the wealth
//! dynamic
//!
//! ```text
//! a_x(x) = a_u x'(u(x)) + ½ b_u² x''(u(x))
//! b_x(x) = b_u x'(u(x))
//! ```
//!
//! Conversely a dynamic admits such a utility only if
//! `ρ(x) = (a_x − ½ b_x b_x') / b_x` is constant, in which case `ρ = a_u/b_u`
//! and `u(x) = b_u ∫ dx / b_x`.

use std::sync::Arc;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::expr::{self, EvalError, Expr};
use crate::functions::utility::{inverse_derivatives, numeric_inverse, probe_end, ItoTerms};
use crate::functions::{BrownianDrift, DerivativeSource, ItoProcess, RealFn, UtilityFunction};
use crate::numeric::quad::{integrate, QuadOptions};

pub const CONSISTENCY_TOL: f64 = 1e-6;
pub const CONSISTENCY_GRID: usize = 256;
pub const MIN_CONSISTENCY_GRID: usize = 16;

#[derive(Debug, Clone, Serialize)]
pub struct ConsistencyReport {
    pub consistent: bool,
    /// `a_u/b_u`, present only when the dynamic is consistent.
    #[serde(rename = "ratio")]
    pub inferred_a_u_over_b_u: Option<f64>,
    pub median_ratio: f64,
    /// `max |ρ(x) − median ρ|` over the grid.
    pub residual: f64,
    pub tolerance: f64,
    pub grid: Vec<(f64, f64)>,
}

/// `ρ(x) = (a_x − ½ b_x b_x') / b_x`.
pub fn implied_ratio(p: &ItoProcess, x: f64) -> Result<f64, EvalError> {
    let b = p.diffusion(x)?;
    Ok((p.drift(x)? - 0.5 * b * p.diffusion_prime(x)?) / b)
}

fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

pub fn check_consistency(p: &ItoProcess) -> Result<ConsistencyReport> {
    check_consistency_with(p, CONSISTENCY_GRID, CONSISTENCY_TOL)
}

pub fn check_consistency_with(p: &ItoProcess, grid_size: usize, tol: f64) -> Result<ConsistencyReport> {
    if grid_size < MIN_CONSISTENCY_GRID {
        return Err(Error::InvalidConfig(format!(
            "grid size {grid_size} is below the minimum of {MIN_CONSISTENCY_GRID}"
        )));
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidConfig("tolerance must be positive".into()));
    }
    let mut grid = Vec::with_capacity(grid_size);
    for x in p.domain().sample_grid(grid_size) {
        let b = p.diffusion(x)?;
        if !(b > 0.0) {
            return Err(Error::VanishingDiffusion { x, value: b });
        }
        grid.push((x, implied_ratio(p, x)?));
    }
    let ratios: Vec<f64> = grid.iter().map(|g| g.1).collect();
    let med = median(&ratios);
    let residual = ratios.iter().map(|r| (r - med).abs()).fold(0.0, f64::max);
    let consistent = residual <= tol * (1.0 + med.abs());
    Ok(ConsistencyReport {
        consistent,
        inferred_a_u_over_b_u: consistent.then_some(med),
        median_ratio: med,
        residual,
        tolerance: tol,
        grid,
    })
}

/// The wealth dynamic whose utility image is Brownian with parameters `bd`.
pub fn dynamic_from_utility(u: &UtilityFunction, bd: BrownianDrift, x0: f64) -> Result<ItoProcess> {
    let BrownianDrift { a_u, b_u } = bd;
    let half_b2 = 0.5 * b_u * b_u;
    let label = format!("dynamic of {}", u.label());
    let (up, upp) = (u.u_prime.clone(), u.u_double_prime.clone());
    let drift: RealFn = Arc::new(move |x| {
        let d1 = up(x)?;
        Ok(a_u / d1 - half_b2 * upp(x)? / (d1 * d1 * d1))
    });
    if b_u == 0.0 {
        return ItoProcess::zero_noise(label, drift, u.domain(), x0);
    }
    let up = u.u_prime.clone();
    let diffusion: RealFn = Arc::new(move |x| Ok(b_u / up(x)?));
    let (up, upp) = (u.u_prime.clone(), u.u_double_prime.clone());
    let diffusion_prime: RealFn = Arc::new(move |x| {
        let d1 = up(x)?;
        Ok(-b_u * upp(x)? / (d1 * d1))
    });
    let source = if u.is_analytic() {
        DerivativeSource::Analytic
    } else if u.symbolic().is_some() {
        DerivativeSource::Symbolic
    } else {
        DerivativeSource::FiniteDifference
    };
    let mut p =
        ItoProcess::new(label, drift, diffusion, diffusion_prime, u.domain(), x0)?.with_derivative_source(source);
    if let Some(terms) = &u.ito_terms {
        let scaled = |k: f64, ts: &[(f64, Expr)]| ts.iter().map(|(c, e)| (k * c, e.clone())).collect::<Vec<_>>();
        let mut a_terms = scaled(a_u, &terms.dxdu);
        a_terms.extend(scaled(half_b2, &terms.d2xdu2));
        p = p.with_symbolic(
            expr::linear_combination(&a_terms),
            expr::linear_combination(&scaled(b_u, &terms.dxdu)),
        );
    }
    Ok(p)
}

/// Integrate `u(x) = b_u ∫_{x_ref}^{x} dx̃ / b_x(x̃)`, so that `u(x_ref) = 0`.
///
/// The dynamic must be consistent and `bd.a_u / bd.b_u` must equal its
/// implied ratio.
pub fn utility_from_dynamic(p: &ItoProcess, bd: BrownianDrift, x_ref: f64) -> Result<UtilityFunction> {
    bd.require_noise()?;
    let domain = p.domain();
    if !domain.contains(x_ref) {
        return Err(Error::param("x_ref", format!("{x_ref} is outside the domain {domain}")));
    }
    let report = check_consistency(p)?;
    let Some(inferred) = report.inferred_a_u_over_b_u else {
        return Err(Error::Inconsistent(Box::new(report)));
    };
    if (bd.ratio() - inferred).abs() > CONSISTENCY_TOL * (1.0 + inferred.abs()) {
        return Err(Error::RatioMismatch {
            supplied: bd.ratio(),
            inferred,
        });
    }
    let b_u = bd.b_u;
    let opts = QuadOptions::default();
    let diffusion = p.diffusion.clone();
    let label = format!("utility of {}", p.label());
    let u_label = label.clone();
    let u: RealFn = Arc::new(move |x| {
        if !domain.contains(x) {
            return Err(EvalError::domain("utility", x, u_label.clone()));
        }
        let integrand = |y: f64| diffusion(y).map_or(f64::NAN, |b| 1.0 / b);
        integrate(integrand, x_ref, x, &opts)
            .map(|r| b_u * r.value)
            .map_err(|_| EvalError::domain("integral", x, u_label.clone()))
    });
    let diffusion = p.diffusion.clone();
    let u_prime: RealFn = Arc::new(move |x| Ok(b_u / diffusion(x)?));
    let (diffusion, dprime) = (p.diffusion.clone(), p.diffusion_prime.clone());
    let u_double_prime: RealFn = Arc::new(move |x| {
        let b = diffusion(x)?;
        Ok(-b_u * dprime(x)? / (b * b))
    });
    for x in domain.sample_grid(64) {
        let integrand = |y: f64| p.diffusion(y).map_or(f64::NAN, |b| 1.0 / b);
        integrate(integrand, x_ref, x, &opts)?;
    }
    let inverse = numeric_inverse(u.clone(), domain, x_ref, label.clone());
    let (inverse_prime, inverse_double_prime) =
        inverse_derivatives(inverse.clone(), u_prime.clone(), u_double_prime.clone());
    let lower = probe_end(&u, domain, x_ref, false);
    let upper = probe_end(&u, domain, x_ref, true);
    // x'(u(x)) = b_x/b_u and x''(u(x)) = b_x b_x'/b_u²
    let ito_terms = p.symbolic().map(|(_, b)| ItoTerms {
        dxdu: vec![(1.0 / b_u, b.clone())],
        d2xdu2: vec![(1.0 / (b_u * b_u), expr::mul(b.clone(), b.differentiate()))],
    });
    Ok(UtilityFunction {
        label,
        domain,
        offset: 0.0,
        u,
        u_prime,
        u_double_prime,
        inverse,
        inverse_prime,
        inverse_double_prime,
        symbolic: None,
        ito_terms,
        lower,
        upper,
        analytic: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::functions::catalog;
    use crate::functions::Interval;

    fn bd(a_u: f64, b_u: f64) -> BrownianDrift {
        BrownianDrift::new(a_u, b_u).unwrap()
    }

    #[test]
    fn exp_test_is_consistent() {
        let p = catalog::exp_test_dynamic(0.5, 1.0, 1.0).unwrap();
        let r = check_consistency(&p).unwrap();
        assert!(r.consistent);
        assert!((r.inferred_a_u_over_b_u.unwrap() - 0.5).abs() < 1e-8);
        assert_eq!(r.grid.len(), CONSISTENCY_GRID);
    }

    #[test]
    fn driftless_gbm_ratio_is_minus_half() {
        let p = ItoProcess::from_exprs(Expr::Num(0.0), Expr::Var, Interval::positive(), 1.0).unwrap();
        let r = check_consistency(&p).unwrap();
        assert!(r.consistent);
        assert_eq!(r.inferred_a_u_over_b_u, Some(-0.5));
        assert_eq!(r.residual, 0.0);
    }

    #[test]
    fn constant_drift_multiplicative_noise_is_inconsistent() {
        let p = ItoProcess::from_exprs(Expr::Num(1.0), Expr::Var, Interval::positive(), 1.0).unwrap();
        let r = check_consistency(&p).unwrap();
        assert!(!r.consistent);
        assert!(r.inferred_a_u_over_b_u.is_none());
        for (x, rho) in &r.grid {
            assert!((rho - (1.0 / x - 0.5)).abs() < 1e-12 * (1.0 + rho.abs()));
        }
        assert!(matches!(
            utility_from_dynamic(&p, bd(0.5, 1.0), 1.0),
            Err(Error::Inconsistent(_))
        ));
    }

    #[test]
    fn tiny_grid_rejected() {
        let p = catalog::gbm_dynamic(0.05, 0.2, 1.0).unwrap();
        assert!(matches!(
            check_consistency_with(&p, 8, 1e-6),
            Err(Error::InvalidConfig(_))
        ));
    }

    #[test]
    fn log_utility_gives_gbm() {
        let p = dynamic_from_utility(&catalog::log_utility(0.0), bd(0.05, 0.2), 1.0).unwrap();
        for x in [0.1, 1.0, 7.0] {
            assert!((p.drift(x).unwrap() - x * (0.05 + 0.02)).abs() < 1e-15 * x.max(1.0));
            assert!((p.diffusion(x).unwrap() - 0.2 * x).abs() < 1e-15 * x.max(1.0));
        }
        let (a, b) = p.symbolic().unwrap();
        assert_eq!(a.to_string(), "0.07*x");
        assert_eq!(b.to_string(), "0.2*x");
    }

    #[test]
    fn sqrt_utility_gives_mixed_dynamic() {
        let p = dynamic_from_utility(&catalog::sqrt_utility(0.0), bd(1.0, 1.0), 1.0).unwrap();
        for x in [0.25, 1.0, 9.0] {
            assert!((p.drift(x).unwrap() - (2.0 * f64::sqrt(x) + 1.0)).abs() < 1e-12);
            assert!((p.diffusion(x).unwrap() - 2.0 * f64::sqrt(x)).abs() < 1e-12);
        }
        let (a, b) = p.symbolic().unwrap();
        assert_eq!(a.to_string(), "2*sqrt(x) + 1");
        assert_eq!(b.to_string(), "2*sqrt(x)");
    }

    #[test]
    fn zero_noise_utility_dynamic() {
        let p = dynamic_from_utility(&catalog::linear_utility(0.0), bd(0.3, 0.0), 0.0).unwrap();
        assert!(p.is_zero_noise());
        assert_eq!(p.drift(4.0).unwrap(), 0.3);
    }

    #[test]
    fn exp_test_integrates_to_exponential() {
        let p = catalog::exp_test_dynamic(0.5, 1.0, 1.0).unwrap();
        let u = utility_from_dynamic(&p, bd(0.5, 1.0), 0.0).unwrap();
        for x in [-3.0, -0.5, 0.0, 1.0, 4.0] {
            let expected = f64::exp(x) - 1.0;
            assert!((u.value(x).unwrap() - expected).abs() <= 1e-10 * (1.0 + expected.abs()));
        }
        let x = u.inverse(u.value(1.7).unwrap()).unwrap();
        assert!((x - 1.7).abs() < 1e-10);
        assert!(matches!(u.lower_end(), crate::functions::EndBehavior::Bounded { .. }));
        assert_eq!(u.upper_end(), crate::functions::EndBehavior::Unbounded);
    }

    #[test]
    fn ratio_mismatch_detected() {
        let p = catalog::exp_test_dynamic(0.5, 1.0, 1.0).unwrap();
        assert!(matches!(
            utility_from_dynamic(&p, bd(0.7, 1.0), 0.0),
            Err(Error::RatioMismatch { .. })
        ));
        // only the ratio matters: (1, 2) is the same dynamic
        let u = utility_from_dynamic(&p, bd(1.0, 2.0), 0.0).unwrap();
        assert!((u.value(1.0).unwrap() - 2.0 * (f64::exp(1.0) - 1.0)).abs() < 1e-9);
    }

    #[test]
    fn derived_utility_prints_dynamic_symbolically() {
        let p = ItoProcess::from_exprs(
            parse("0.5*exp(-x) - 0.5*exp(-2*x)").unwrap(),
            parse("exp(-x)").unwrap(),
            Interval::real_line(),
            1.0,
        )
        .unwrap();
        let u = utility_from_dynamic(&p, bd(0.5, 1.0), 0.0).unwrap();
        let q = dynamic_from_utility(&u, bd(0.5, 1.0), 1.0).unwrap();
        let (a, _) = q.symbolic().unwrap();
        for x in [-1.0, 0.5, 2.0] {
            assert!((a.eval(x).unwrap() - p.drift(x).unwrap()).abs() < 1e-12);
        }
    }
}
