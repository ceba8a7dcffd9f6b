//! Named closed-form utilities and dynamics.
//!
//! | name               | object    | parameters                   |
//! |--------------------|-----------|------------------------------|
//! | `linear_utility`   | utility   | `C`                          |
//! | `log_utility`      | utility   | `C`                          |
//! | `sqrt_utility`     | utility   | `C`                          |
//! | `exp_utility`      | utility   | `b_u` (default 1), `C`       |
//! | `additive_dynamic` | process   | `a`, `b`, `x0`               |
//! | `gbm_dynamic`      | process   | `mu`, `sigma`, `x0`          |
//! | `cramer_dynamic`   | process   | `a_u`, `b_u`, `x0`           |
//! | `exp_test_dynamic` | process   | `a_u`, `b_u`, `x0`           |
//!
//! `C` defaults to 0 and `x0` to 1. Unknown keys are rejected.

use std::collections::BTreeMap;
use std::sync::Arc;

use super::utility::{EndBehavior, ItoTerms};
use super::{closed_form, constant, Interval, ItoProcess, UtilityFunction};
use crate::error::{Error, Result};
use crate::expr::{self, parse, Expr};

pub const UTILITIES: [&str; 4] = ["linear_utility", "log_utility", "sqrt_utility", "exp_utility"];
pub const DYNAMICS: [&str; 4] = ["additive_dynamic", "gbm_dynamic", "cramer_dynamic", "exp_test_dynamic"];

pub type Params = BTreeMap<String, f64>;

#[derive(Debug, Clone)]
pub enum CatalogEntry {
    Utility(UtilityFunction),
    Process(ItoProcess),
}

impl CatalogEntry {
    pub fn into_utility(self) -> Result<UtilityFunction> {
        match self {
            CatalogEntry::Utility(u) => Ok(u),
            CatalogEntry::Process(p) => Err(Error::InvalidSpec(format!("`{}` is a dynamic, not a utility", p.label))),
        }
    }

    pub fn into_process(self) -> Result<ItoProcess> {
        match self {
            CatalogEntry::Process(p) => Ok(p),
            CatalogEntry::Utility(u) => Err(Error::InvalidSpec(format!("`{}` is a utility, not a dynamic", u.label))),
        }
    }
}

/// Parameter reader that tracks which keys were used.
struct Reader<'a> {
    params: &'a Params,
    used: Vec<&'static str>,
}

impl<'a> Reader<'a> {
    fn new(params: &'a Params) -> Self {
        Self {
            params,
            used: Vec::new(),
        }
    }

    fn lookup(&mut self, names: &[&'static str]) -> Option<f64> {
        self.used.extend_from_slice(names);
        names.iter().find_map(|n| self.params.get(*n).copied())
    }

    fn optional(&mut self, names: &[&'static str], default: f64) -> Result<f64> {
        let v = self.lookup(names).unwrap_or(default);
        if !v.is_finite() {
            return Err(Error::param(names[0], "must be finite"));
        }
        Ok(v)
    }

    fn required(&mut self, names: &[&'static str]) -> Result<f64> {
        let v = self
            .lookup(names)
            .ok_or_else(|| Error::MissingParameter(names[0].to_string()))?;
        if !v.is_finite() {
            return Err(Error::param(names[0], "must be finite"));
        }
        Ok(v)
    }

    fn positive(&mut self, names: &[&'static str], default: Option<f64>) -> Result<f64> {
        let v = match default {
            Some(d) => self.optional(names, d)?,
            None => self.required(names)?,
        };
        if v <= 0.0 {
            return Err(Error::param(names[0], "must be strictly positive"));
        }
        Ok(v)
    }

    fn finish(self) -> Result<()> {
        match self.params.keys().find(|k| !self.used.contains(&k.as_str())) {
            Some(k) => Err(Error::param(k, "not a parameter of this entry")),
            None => Ok(()),
        }
    }
}

fn ex(src: &str) -> Expr {
    parse(src).expect("catalog expression")
}

/// Look up a catalog entry by name.
pub fn lookup(name: &str, params: &Params) -> Result<CatalogEntry> {
    let mut r = Reader::new(params);
    let entry = match name {
        "linear_utility" => CatalogEntry::Utility(linear_utility(r.optional(&["C"], 0.0)?)),
        "log_utility" => CatalogEntry::Utility(log_utility(r.optional(&["C"], 0.0)?)),
        "sqrt_utility" => CatalogEntry::Utility(sqrt_utility(r.optional(&["C"], 0.0)?)),
        "exp_utility" => {
            let b = r.positive(&["b_u"], Some(1.0))?;
            CatalogEntry::Utility(exp_utility(b, r.optional(&["C"], 0.0)?)?)
        }
        "additive_dynamic" => {
            let a = r.required(&["a"])?;
            let b = r.positive(&["b"], None)?;
            CatalogEntry::Process(additive_dynamic(a, b, r.optional(&["x0"], 1.0)?)?)
        }
        "gbm_dynamic" => {
            let mu = r.required(&["mu", "μ"])?;
            let sigma = r.positive(&["sigma", "σ"], None)?;
            CatalogEntry::Process(gbm_dynamic(mu, sigma, r.optional(&["x0"], 1.0)?)?)
        }
        "cramer_dynamic" => {
            let a_u = r.required(&["a_u"])?;
            let b_u = r.positive(&["b_u"], None)?;
            CatalogEntry::Process(cramer_dynamic(a_u, b_u, r.optional(&["x0"], 1.0)?)?)
        }
        "exp_test_dynamic" => {
            let a_u = r.required(&["a_u"])?;
            let b_u = r.positive(&["b_u"], None)?;
            CatalogEntry::Process(exp_test_dynamic(a_u, b_u, r.optional(&["x0"], 1.0)?)?)
        }
        other => return Err(Error::UnknownCatalogEntry(other.to_string())),
    };
    r.finish()?;
    Ok(entry)
}

fn shifted(base: Expr, c: f64) -> Expr {
    expr::add(base, Expr::Num(c))
}

/// `u(x) = x + C` on the real line.
pub fn linear_utility(c: f64) -> UtilityFunction {
    UtilityFunction {
        label: "linear_utility".into(),
        domain: Interval::real_line(),
        offset: c,
        u: Arc::new(move |x| Ok(x + c)),
        u_prime: constant(1.0),
        u_double_prime: constant(0.0),
        inverse: Arc::new(move |v| Ok(v - c)),
        inverse_prime: constant(1.0),
        inverse_double_prime: constant(0.0),
        symbolic: Some(shifted(Expr::Var, c)),
        ito_terms: Some(ItoTerms {
            dxdu: vec![(1.0, Expr::Num(1.0))],
            d2xdu2: vec![],
        }),
        lower: EndBehavior::Unbounded,
        upper: EndBehavior::Unbounded,
        analytic: true,
    }
}

/// `u(x) = ln(x) + C` on `(0, ∞)`.
pub fn log_utility(c: f64) -> UtilityFunction {
    let exp_shift = move |v: f64| (v - c).exp();
    UtilityFunction {
        label: "log_utility".into(),
        domain: Interval::positive(),
        offset: c,
        u: closed_form("ln", move |x| if x > 0.0 { x.ln() + c } else { f64::NAN }),
        u_prime: closed_form("1/x", |x| if x > 0.0 { 1.0 / x } else { f64::NAN }),
        u_double_prime: closed_form("-1/x^2", |x| if x > 0.0 { -1.0 / (x * x) } else { f64::NAN }),
        inverse: closed_form("exp", exp_shift),
        inverse_prime: closed_form("exp", exp_shift),
        inverse_double_prime: closed_form("exp", exp_shift),
        symbolic: Some(shifted(ex("ln(x)"), c)),
        ito_terms: Some(ItoTerms {
            dxdu: vec![(1.0, Expr::Var)],
            d2xdu2: vec![(1.0, Expr::Var)],
        }),
        lower: EndBehavior::Unbounded,
        upper: EndBehavior::Unbounded,
        analytic: true,
    }
}

/// `u(x) = √x + C` on `(0, ∞)`.
pub fn sqrt_utility(c: f64) -> UtilityFunction {
    UtilityFunction {
        label: "sqrt_utility".into(),
        domain: Interval::positive(),
        offset: c,
        u: closed_form("sqrt", move |x| if x > 0.0 { x.sqrt() + c } else { f64::NAN }),
        u_prime: closed_form("1/(2*sqrt(x))", |x| if x > 0.0 { 0.5 / x.sqrt() } else { f64::NAN }),
        u_double_prime: closed_form("-1/(4*x^(3/2))", |x| {
            if x > 0.0 {
                -0.25 / (x * x.sqrt())
            } else {
                f64::NAN
            }
        }),
        inverse: closed_form("square", move |v| if v > c { (v - c) * (v - c) } else { f64::NAN }),
        inverse_prime: closed_form("2*u", move |v| if v > c { 2.0 * (v - c) } else { f64::NAN }),
        inverse_double_prime: closed_form("2", move |v| if v > c { 2.0 } else { f64::NAN }),
        symbolic: Some(shifted(ex("sqrt(x)"), c)),
        ito_terms: Some(ItoTerms {
            dxdu: vec![(2.0, ex("sqrt(x)"))],
            d2xdu2: vec![(2.0, Expr::Num(1.0))],
        }),
        lower: EndBehavior::Bounded { limit: c },
        upper: EndBehavior::Unbounded,
        analytic: true,
    }
}

/// `u(x) = b·eˣ + C` on the real line.
pub fn exp_utility(b: f64, c: f64) -> Result<UtilityFunction> {
    if !(b > 0.0 && b.is_finite()) {
        return Err(Error::param("b_u", "must be strictly positive"));
    }
    let in_range = move |v: f64| v > c;
    Ok(UtilityFunction {
        label: "exp_utility".into(),
        domain: Interval::real_line(),
        offset: c,
        u: closed_form("exp", move |x| b * x.exp() + c),
        u_prime: closed_form("exp", move |x| b * x.exp()),
        u_double_prime: closed_form("exp", move |x| b * x.exp()),
        inverse: closed_form("ln", move |v| if in_range(v) { ((v - c) / b).ln() } else { f64::NAN }),
        inverse_prime: closed_form("1/u", move |v| if in_range(v) { 1.0 / (v - c) } else { f64::NAN }),
        inverse_double_prime: closed_form("-1/u^2", move |v| {
            if in_range(v) {
                -1.0 / ((v - c) * (v - c))
            } else {
                f64::NAN
            }
        }),
        symbolic: Some(shifted(expr::mul(Expr::Num(b), ex("exp(x)")), c)),
        ito_terms: Some(ItoTerms {
            dxdu: vec![(1.0 / b, ex("exp(-x)"))],
            d2xdu2: vec![(-1.0 / (b * b), ex("exp(-2*x)"))],
        }),
        lower: EndBehavior::Bounded { limit: c },
        upper: EndBehavior::Unbounded,
        analytic: true,
    })
}

/// `dx = a dt + b dW`.
pub fn additive_dynamic(a: f64, b: f64, x0: f64) -> Result<ItoProcess> {
    Ok(ItoProcess::new(
        "additive_dynamic",
        constant(a),
        constant(b),
        constant(0.0),
        Interval::real_line(),
        x0,
    )?
    .with_symbolic(Expr::Num(a), Expr::Num(b)))
}

/// `dx = x(μ dt + σ dW)`.
pub fn gbm_dynamic(mu: f64, sigma: f64, x0: f64) -> Result<ItoProcess> {
    Ok(ItoProcess::new(
        "gbm_dynamic",
        Arc::new(move |x| Ok(mu * x)),
        Arc::new(move |x| Ok(sigma * x)),
        constant(sigma),
        Interval::positive(),
        x0,
    )?
    .with_symbolic(
        expr::linear_combination(&[(mu, Expr::Var)]),
        expr::linear_combination(&[(sigma, Expr::Var)]),
    ))
}

/// `dx = (2a_u√x + b_u²) dt + 2b_u√x dW`, the dynamic of square-root utility.
pub fn cramer_dynamic(a_u: f64, b_u: f64, x0: f64) -> Result<ItoProcess> {
    let pos = |x: f64| if x > 0.0 { x } else { f64::NAN };
    Ok(ItoProcess::new(
        "cramer_dynamic",
        closed_form("sqrt", move |x| 2.0 * a_u * pos(x).sqrt() + b_u * b_u),
        closed_form("sqrt", move |x| 2.0 * b_u * pos(x).sqrt()),
        closed_form("1/sqrt", move |x| b_u / pos(x).sqrt()),
        Interval::positive(),
        x0,
    )?
    .with_symbolic(
        expr::linear_combination(&[(2.0 * a_u, ex("sqrt(x)")), (b_u * b_u, Expr::Num(1.0))]),
        expr::linear_combination(&[(2.0 * b_u, ex("sqrt(x)"))]),
    ))
}

/// `dx = ((a_u/b_u)e^{−x} − ½e^{−2x}) dt + e^{−x} dW`, the dynamic of `u = b_u eˣ + C`.
pub fn exp_test_dynamic(a_u: f64, b_u: f64, x0: f64) -> Result<ItoProcess> {
    let ratio = a_u / b_u;
    Ok(ItoProcess::new(
        "exp_test_dynamic",
        closed_form("exp", move |x| ratio * (-x).exp() - 0.5 * (-2.0 * x).exp()),
        closed_form("exp", |x| (-x).exp()),
        closed_form("exp", |x| -(-x).exp()),
        Interval::real_line(),
        x0,
    )?
    .with_symbolic(
        expr::linear_combination(&[(ratio, ex("exp(-x)")), (-0.5, ex("exp(-2*x)"))]),
        ex("exp(-x)"),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(pairs: &[(&str, f64)]) -> Params {
        pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
    }

    #[test]
    fn gbm_lookup() {
        let p = lookup("gbm_dynamic", &params(&[("mu", 0.05), ("sigma", 0.2), ("x0", 1.0)]))
            .unwrap()
            .into_process()
            .unwrap();
        assert_eq!(p.drift(2.0).unwrap(), 0.1);
        assert_eq!(p.diffusion(2.0).unwrap(), 0.4);
        let (a, b) = p.symbolic().unwrap();
        assert_eq!(a.to_string(), "0.05*x");
        assert_eq!(b.to_string(), "0.2*x");
    }

    #[test]
    fn exp_test_lookup() {
        let p = lookup("exp_test_dynamic", &params(&[("a_u", 0.5), ("b_u", 1.0)]))
            .unwrap()
            .into_process()
            .unwrap();
        assert_eq!(p.x0(), 1.0);
        for x in [-1.0, 0.0, 2.0] {
            let expected = 0.5 * f64::exp(-x) - 0.5 * f64::exp(-2.0 * x);
            assert!((p.drift(x).unwrap() - expected).abs() < 1e-15);
            assert_eq!(p.diffusion(x).unwrap(), f64::exp(-x));
        }
        let (a, b) = p.symbolic().unwrap();
        assert_eq!(a.to_string(), "0.5*exp(-x) - 0.5*exp(-2*x)");
        assert_eq!(b.to_string(), "exp(-x)");
    }

    #[test]
    fn linear_lookup_is_identity() {
        let u = lookup("linear_utility", &Params::new())
            .unwrap()
            .into_utility()
            .unwrap();
        assert_eq!(u.value(3.5).unwrap(), 3.5);
        assert_eq!(u.inverse(-2.0).unwrap(), -2.0);
    }

    #[test]
    fn lookup_errors() {
        assert!(matches!(
            lookup("nope", &Params::new()),
            Err(Error::UnknownCatalogEntry(_))
        ));
        assert!(matches!(
            lookup("gbm_dynamic", &params(&[("mu", 0.05)])),
            Err(Error::MissingParameter(_))
        ));
        assert!(matches!(
            lookup("gbm_dynamic", &params(&[("mu", 0.05), ("sigma", 0.0)])),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            lookup("log_utility", &params(&[("sigma", 1.0)])),
            Err(Error::InvalidParameter { .. })
        ));
        assert!(matches!(
            lookup("log_utility", &Params::new()).unwrap().into_process(),
            Err(Error::InvalidSpec(_))
        ));
        assert!(lookup("gbm_dynamic", &params(&[("mu", 0.05), ("sigma", 0.2), ("x0", -1.0)])).is_err());
    }

    #[test]
    fn greek_aliases() {
        let p = lookup("gbm_dynamic", &params(&[("μ", 0.05), ("σ", 0.2)])).unwrap();
        assert!(matches!(p, CatalogEntry::Process(_)));
    }

    #[test]
    fn catalog_utilities_validate() {
        for name in UTILITIES {
            let u = lookup(name, &Params::new()).unwrap().into_utility().unwrap();
            let report = u.validate();
            assert!(report.passed, "{name}: {report:?}");
        }
    }

    #[test]
    fn offset_is_ignored_in_comparisons() {
        let a = log_utility(0.0);
        let b = log_utility(7.0);
        assert!(a.agrees_with(&b, &[0.1, 1.0, 10.0], 1e-14));
        assert_eq!(b.inverse(7.0).unwrap(), 1.0);
    }
}
