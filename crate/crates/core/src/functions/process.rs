use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{constant, Interval, RealFn};
use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr};
use crate::numeric::stats::central_difference;

/// Grid size for the positivity scan of the diffusion coefficient.
pub const DIFFUSION_GRID: usize = 256;

/// How `b_x'` was obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DerivativeSource {
    Analytic,
    Symbolic,
    FiniteDifference,
}

/// Wealth dynamic `dx = a_x(x) dt + b_x(x) dW` started at `x0`.
#[derive(Clone)]
pub struct ItoProcess {
    pub(crate) label: String,
    pub(crate) drift: RealFn,
    pub(crate) diffusion: RealFn,
    pub(crate) diffusion_prime: RealFn,
    pub(crate) domain: Interval,
    pub(crate) x0: f64,
    pub(crate) zero_noise: bool,
    pub(crate) symbolic: Option<(Expr, Expr)>,
    pub(crate) derivative_source: DerivativeSource,
}

impl fmt::Debug for ItoProcess {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ItoProcess")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("x0", &self.x0)
            .field("zero_noise", &self.zero_noise)
            .field(
                "symbolic",
                &self.symbolic.as_ref().map(|(a, b)| (a.to_string(), b.to_string())),
            )
            .field("derivative_source", &self.derivative_source)
            .finish()
    }
}

fn finite_difference(f: RealFn) -> RealFn {
    Arc::new(move |x| {
        central_difference(|y| f(y).ok(), x).ok_or_else(|| EvalError::domain("finite difference", x, "b_x"))
    })
}

impl ItoProcess {
    /// Process with closed-form drift, diffusion and diffusion derivative.
    pub fn new(
        label: impl Into<String>,
        drift: RealFn,
        diffusion: RealFn,
        diffusion_prime: RealFn,
        domain: Interval,
        x0: f64,
    ) -> Result<Self> {
        let p = Self {
            label: label.into(),
            drift,
            diffusion,
            diffusion_prime,
            domain,
            x0,
            zero_noise: false,
            symbolic: None,
            derivative_source: DerivativeSource::Analytic,
        };
        p.validate()?;
        Ok(p)
    }

    /// Process from drift and diffusion expressions; `b_x'` is symbolic.
    pub fn from_exprs(drift: Expr, diffusion: Expr, domain: Interval, x0: f64) -> Result<Self> {
        let dprime = diffusion.differentiate();
        let as_fn = |e: Expr| -> RealFn { Arc::new(move |x| e.eval(x)) };
        let p = Self {
            label: format!("dx = ({drift}) dt + ({diffusion}) dW"),
            drift: as_fn(drift.clone()),
            diffusion: as_fn(diffusion.clone()),
            diffusion_prime: as_fn(dprime),
            domain,
            x0,
            zero_noise: false,
            symbolic: Some((drift, diffusion)),
            derivative_source: DerivativeSource::Symbolic,
        };
        p.validate()?;
        Ok(p)
    }

    /// Process from opaque closures; `b_x'` by central finite differences.
    pub fn from_closures(
        label: impl Into<String>,
        drift: RealFn,
        diffusion: RealFn,
        domain: Interval,
        x0: f64,
    ) -> Result<Self> {
        let p = Self {
            label: label.into(),
            drift,
            diffusion_prime: finite_difference(diffusion.clone()),
            diffusion,
            domain,
            x0,
            zero_noise: false,
            symbolic: None,
            derivative_source: DerivativeSource::FiniteDifference,
        };
        p.validate()?;
        Ok(p)
    }

    /// Deterministic process `dx = a_x(x) dt`. The only way to get `b_x ≡ 0`.
    pub fn zero_noise(label: impl Into<String>, drift: RealFn, domain: Interval, x0: f64) -> Result<Self> {
        let p = Self {
            label: label.into(),
            drift,
            diffusion: constant(0.0),
            diffusion_prime: constant(0.0),
            domain,
            x0,
            zero_noise: true,
            symbolic: None,
            derivative_source: DerivativeSource::Analytic,
        };
        p.validate()?;
        Ok(p)
    }

    pub(crate) fn with_symbolic(mut self, drift: Expr, diffusion: Expr) -> Self {
        self.symbolic = Some((drift, diffusion));
        self
    }

    pub(crate) fn with_derivative_source(mut self, source: DerivativeSource) -> Self {
        self.derivative_source = source;
        self
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// The same dynamic started from a different initial wealth.
    pub fn with_x0(&self, x0: f64) -> Result<Self> {
        if !self.domain.contains(x0) {
            return Err(Error::param(
                "x0",
                format!("{x0} is outside the domain {}", self.domain),
            ));
        }
        let mut p = self.clone();
        p.x0 = x0;
        Ok(p)
    }

    fn validate(&self) -> Result<()> {
        if !self.x0.is_finite() || !self.domain.contains(self.x0) {
            return Err(Error::param(
                "x0",
                format!("{} is outside the domain {}", self.x0, self.domain),
            ));
        }
        if self.zero_noise {
            for x in self.domain.sample_grid(DIFFUSION_GRID) {
                self.drift(x)?;
            }
            return Ok(());
        }
        for x in self.domain.sample_grid(DIFFUSION_GRID) {
            self.drift(x)?;
            let b = self.diffusion(x)?;
            if !(b > 0.0) {
                return Err(Error::VanishingDiffusion { x, value: b });
            }
        }
        Ok(())
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    pub fn x0(&self) -> f64 {
        self.x0
    }

    pub fn is_zero_noise(&self) -> bool {
        self.zero_noise
    }

    pub fn derivative_source(&self) -> DerivativeSource {
        self.derivative_source
    }

    /// `(a_x, b_x)` as expressions, when known.
    pub fn symbolic(&self) -> Option<(&Expr, &Expr)> {
        self.symbolic.as_ref().map(|(a, b)| (a, b))
    }

    pub fn drift(&self, x: f64) -> Result<f64, EvalError> {
        (self.drift)(x)
    }

    pub fn diffusion(&self, x: f64) -> Result<f64, EvalError> {
        (self.diffusion)(x)
    }

    pub fn diffusion_prime(&self, x: f64) -> Result<f64, EvalError> {
        (self.diffusion_prime)(x)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;
    use crate::functions::closed_form;

    #[test]
    fn expr_process_has_symbolic_derivative() {
        let p = ItoProcess::from_exprs(
            parse("0.5*exp(-x) - 0.5*exp(-2*x)").unwrap(),
            parse("exp(-x)").unwrap(),
            Interval::real_line(),
            1.0,
        )
        .unwrap();
        assert_eq!(p.derivative_source(), DerivativeSource::Symbolic);
        assert!((p.diffusion_prime(0.3).unwrap() + f64::exp(-0.3)).abs() < 1e-15);
        assert_eq!(p.drift(0.0).unwrap(), 0.0);
    }

    #[test]
    fn closure_process_uses_finite_differences() {
        let p = ItoProcess::from_closures(
            "gbm",
            closed_form("drift", |x| 0.05 * x),
            closed_form("diffusion", |x| 0.2 * x),
            Interval::positive(),
            1.0,
        )
        .unwrap();
        assert_eq!(p.derivative_source(), DerivativeSource::FiniteDifference);
        assert!((p.diffusion_prime(3.0).unwrap() - 0.2).abs() < 1e-9);
    }

    #[test]
    fn zero_diffusion_needs_dedicated_constructor() {
        let err =
            ItoProcess::from_exprs(parse("1").unwrap(), parse("0").unwrap(), Interval::real_line(), 0.0).unwrap_err();
        assert!(matches!(err, Error::VanishingDiffusion { .. }));
        let p = ItoProcess::zero_noise("drift only", constant(1.0), Interval::real_line(), 0.0).unwrap();
        assert!(p.is_zero_noise());
        assert_eq!(p.diffusion(5.0).unwrap(), 0.0);
    }

    #[test]
    fn x0_must_lie_in_domain() {
        let err =
            ItoProcess::from_exprs(parse("x").unwrap(), parse("x").unwrap(), Interval::positive(), -1.0).unwrap_err();
        assert!(matches!(err, Error::InvalidParameter { .. }));
        let p = ItoProcess::from_exprs(parse("x").unwrap(), parse("x").unwrap(), Interval::positive(), 1.0).unwrap();
        assert!(p.with_x0(0.0).is_err());
        assert_eq!(p.with_x0(2.0).unwrap().x0(), 2.0);
    }
}
