//! JSON descriptions of utilities and dynamics.
//!
//! ```json
//! {"kind": "catalog", "name": "gbm_dynamic", "params": {"mu": 0.05, "sigma": 0.2}, "x0": 1}
//! {"kind": "expr", "source": "ln(x)", "domain": [0, "inf"]}
//! {"kind": "expr", "source": {"drift": "0.05*x", "diffusion": "0.2*x"}, "domain": [0, "inf"], "x0": 1}
//! ```

use serde::{Deserialize, Serialize};

use super::catalog::{self, CatalogEntry, Params};
use super::{Interval, ItoProcess, UtilityFunction};
use crate::error::{Error, Result};
use crate::expr::parse;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ExprSource {
    Utility(String),
    Process { drift: String, diffusion: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CatalogSpec {
    pub name: String,
    #[serde(default)]
    pub params: Params,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExprSpec {
    pub source: ExprSource,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub domain: Option<Interval>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x0: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum FunctionSpec {
    Catalog(CatalogSpec),
    Expr(ExprSpec),
}

impl FunctionSpec {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::InvalidSpec(e.to_string()))
    }

    pub fn build(&self) -> Result<CatalogEntry> {
        match self {
            FunctionSpec::Catalog(CatalogSpec { name, params, x0 }) => {
                let mut params = params.clone();
                if let Some(x0) = x0 {
                    if params.insert("x0".into(), *x0).is_some() {
                        return Err(Error::InvalidSpec("x0 given twice".into()));
                    }
                }
                catalog::lookup(name, &params)
            }
            FunctionSpec::Expr(ExprSpec { source, domain, x0 }) => {
                let domain = domain.unwrap_or(Interval::real_line());
                match source {
                    ExprSource::Utility(src) => {
                        if x0.is_some() {
                            return Err(Error::InvalidSpec("a utility takes no x0".into()));
                        }
                        Ok(CatalogEntry::Utility(UtilityFunction::from_expr(&parse(src)?, domain)?))
                    }
                    ExprSource::Process { drift, diffusion } => Ok(CatalogEntry::Process(ItoProcess::from_exprs(
                        parse(drift)?,
                        parse(diffusion)?,
                        domain,
                        x0.unwrap_or(1.0),
                    )?)),
                }
            }
        }
    }

    pub fn build_utility(&self) -> Result<UtilityFunction> {
        self.build()?.into_utility()
    }

    pub fn build_process(&self) -> Result<ItoProcess> {
        self.build()?.into_process()
    }
}
