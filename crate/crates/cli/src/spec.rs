//! Command-line function specs.
//!
//! A spec is one of
//! - a catalog name with optional `k=v` parameters: `gbm:mu=0.05,sigma=0.2`
//! - an expression: `expr:ln(x)` for a utility, `expr:0.05*x;0.2*x` for a
//!   dynamic (drift, then diffusion)
//! - a JSON spec file: `@spec.json`

use std::fs;

use ergo_core::functions::catalog::{self, Params};
use ergo_core::functions::spec::{CatalogSpec, ExprSource, ExprSpec, FunctionSpec};
use ergo_core::functions::{Interval, ItoProcess, UtilityFunction};
use ergo_core::{Error, Result};

/// Values filled into catalog entries that leave them out.
#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub a_u: f64,
    pub b_u: f64,
    pub x0: Option<f64>,
    pub domain: Option<Interval>,
}

fn utility_name(short: &str) -> &str {
    match short {
        "linear" | "identity" => "linear_utility",
        "log" => "log_utility",
        "sqrt" => "sqrt_utility",
        "exp" | "exp_test_u" => "exp_utility",
        other => other,
    }
}

fn dynamic_name(short: &str) -> &str {
    match short {
        "additive" => "additive_dynamic",
        "gbm" => "gbm_dynamic",
        "cramer" => "cramer_dynamic",
        "exp_test" => "exp_test_dynamic",
        other => other,
    }
}

fn parse_params(text: &str) -> Result<Params> {
    let mut params = Params::new();
    for pair in text.split(',').filter(|s| !s.trim().is_empty()) {
        let (k, v) = pair
            .split_once('=')
            .ok_or_else(|| Error::InvalidSpec(format!("expected key=value, got `{pair}`")))?;
        let v: f64 = v
            .trim()
            .parse()
            .map_err(|_| Error::InvalidSpec(format!("`{v}` is not a number")))?;
        if params.insert(k.trim().to_string(), v).is_some() {
            return Err(Error::InvalidSpec(format!("parameter `{}` given twice", k.trim())));
        }
    }
    Ok(params)
}

pub fn parse_domain(text: &str) -> Result<Interval> {
    let (lo, hi) = text
        .split_once(',')
        .ok_or_else(|| Error::InvalidDomain(format!("expected lo,hi, got `{text}`")))?;
    let num = |s: &str| {
        s.trim()
            .parse::<f64>()
            .map_err(|_| Error::InvalidDomain(format!("`{s}` is not a number")))
    };
    Interval::new(num(lo)?, num(hi)?)
}

#[derive(Clone, Copy)]
enum Kind {
    Utility,
    Dynamic,
}

fn resolve(text: &str, kind: Kind, d: &Defaults) -> Result<FunctionSpec> {
    if let Some(path) = text.strip_prefix('@') {
        let body =
            fs::read_to_string(path).map_err(|e| Error::InvalidSpec(format!("cannot read spec file `{path}`: {e}")))?;
        return FunctionSpec::from_json(&body);
    }
    if let Some(src) = text.strip_prefix("expr:") {
        let source = match kind {
            Kind::Utility => ExprSource::Utility(src.to_string()),
            Kind::Dynamic => {
                let (drift, diffusion) = src
                    .split_once(';')
                    .ok_or_else(|| Error::InvalidSpec("a dynamic expression needs `drift;diffusion`".into()))?;
                ExprSource::Process {
                    drift: drift.trim().to_string(),
                    diffusion: diffusion.trim().to_string(),
                }
            }
        };
        let x0 = match kind {
            Kind::Utility => None,
            Kind::Dynamic => d.x0,
        };
        return Ok(FunctionSpec::Expr(ExprSpec {
            source,
            domain: d.domain,
            x0,
        }));
    }
    let (short, rest) = text.split_once(':').unwrap_or((text, ""));
    let mut params = parse_params(rest)?;
    let name = match kind {
        Kind::Utility => utility_name(short),
        Kind::Dynamic => dynamic_name(short),
    };
    match name {
        "exp_utility" => {
            params.entry("b_u".into()).or_insert(d.b_u);
        }
        "cramer_dynamic" | "exp_test_dynamic" => {
            params.entry("a_u".into()).or_insert(d.a_u);
            params.entry("b_u".into()).or_insert(d.b_u);
        }
        _ => {}
    }
    if let (Kind::Dynamic, Some(x0)) = (kind, d.x0) {
        params.entry("x0".into()).or_insert(x0);
    }
    if !catalog::UTILITIES.contains(&name) && !catalog::DYNAMICS.contains(&name) {
        return Err(Error::UnknownCatalogEntry(short.to_string()));
    }
    Ok(FunctionSpec::Catalog(CatalogSpec {
        name: name.to_string(),
        params,
        x0: None,
    }))
}

pub fn utility(text: &str, d: &Defaults) -> Result<UtilityFunction> {
    resolve(text, Kind::Utility, d)?.build_utility()
}

pub fn dynamic(text: &str, d: &Defaults) -> Result<ItoProcess> {
    resolve(text, Kind::Dynamic, d)?.build_process()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn defaults() -> Defaults {
        Defaults {
            a_u: 0.5,
            b_u: 1.0,
            x0: None,
            domain: None,
        }
    }

    #[test]
    fn short_names_and_parameters() {
        let p = dynamic("gbm:mu=0.05,sigma=0.2", &defaults()).unwrap();
        assert_eq!(p.drift(2.0).unwrap(), 0.1);
        let e = dynamic("exp_test", &defaults()).unwrap();
        assert_eq!(e.diffusion(0.0).unwrap(), 1.0);
        let u = utility("exp_test_u", &Defaults { b_u: 2.0, ..defaults() }).unwrap();
        assert_eq!(u.value(0.0).unwrap(), 2.0);
        assert!(utility("log:C=1", &defaults()).is_ok());
    }

    #[test]
    fn expressions_use_the_domain_flag() {
        let d = Defaults {
            domain: Some(Interval::positive()),
            x0: Some(2.0),
            ..defaults()
        };
        assert!(utility("expr:ln(x)", &d).is_ok());
        let p = dynamic("expr:0.05*x; 0.2*x", &d).unwrap();
        assert_eq!(p.x0(), 2.0);
        assert!(matches!(dynamic("expr:0.05*x", &d), Err(Error::InvalidSpec(_))));
    }

    #[test]
    fn bad_specs() {
        assert!(matches!(
            utility("quadratic", &defaults()),
            Err(Error::UnknownCatalogEntry(_))
        ));
        assert!(matches!(dynamic("gbm:mu", &defaults()), Err(Error::InvalidSpec(_))));
        assert!(matches!(
            dynamic("gbm:mu=0.1", &defaults()),
            Err(Error::MissingParameter(_))
        ));
        assert!(matches!(
            utility("gbm_dynamic:mu=0.1,sigma=1", &defaults()),
            Err(Error::InvalidSpec(_))
        ));
        assert!(matches!(
            utility("@/nonexistent.json", &defaults()),
            Err(Error::InvalidSpec(_))
        ));
        assert!(parse_domain("1,0").is_err());
        assert_eq!(parse_domain("0, inf").unwrap(), Interval::positive());
    }
}
