use std::fmt;
use std::sync::Arc;

use serde::Serialize;

use super::{Interval, RealFn};
use crate::error::{Error, Result};
use crate::expr::{self, EvalError, Expr};
use crate::numeric::root::invert_monotone;
use crate::numeric::stats::central_difference;

/// Grid size for the monotonicity scan of user-supplied utilities.
pub const MONOTONICITY_GRID: usize = 1024;
/// `|u|` beyond this while approaching an endpoint counts as unbounded.
pub const UNBOUNDED_MAGNITUDE: f64 = 1e6;
const ROUND_TRIP_TOL: f64 = 1e-9;
const DERIVATIVE_TOL: f64 = 1e-6;
const PROBE_STEPS: i32 = 200;
const FD_MARGIN: f64 = 0.1;

/// How `u(x)` behaves as `x` approaches one end of its domain.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum EndBehavior {
    Unbounded,
    Bounded { limit: f64 },
}

impl EndBehavior {
    fn limit_or(self, inf: f64) -> f64 {
        match self {
            EndBehavior::Unbounded => inf,
            EndBehavior::Bounded { limit } => limit,
        }
    }
}

/// Closed forms of `∂x/∂u` and `∂²x/∂u²` written as functions of wealth, as
/// linear combinations `Σ cᵢ·eᵢ(x)`.
#[derive(Debug, Clone)]
pub(crate) struct ItoTerms {
    pub dxdu: Vec<(f64, Expr)>,
    pub d2xdu2: Vec<(f64, Expr)>,
}

impl ItoTerms {
    fn scaled(&self, lambda: f64) -> ItoTerms {
        ItoTerms {
            dxdu: self.dxdu.iter().map(|(c, e)| (c / lambda, e.clone())).collect(),
            d2xdu2: self
                .d2xdu2
                .iter()
                .map(|(c, e)| (c / (lambda * lambda), e.clone()))
                .collect(),
        }
    }
}

/// A strictly increasing utility of wealth together with its inverse and
/// the first two derivatives of both.
#[derive(Clone)]
pub struct UtilityFunction {
    pub(crate) label: String,
    pub(crate) domain: Interval,
    /// Additive constant `C`; ignored when utilities are compared.
    pub(crate) offset: f64,
    pub(crate) u: RealFn,
    pub(crate) u_prime: RealFn,
    pub(crate) u_double_prime: RealFn,
    pub(crate) inverse: RealFn,
    pub(crate) inverse_prime: RealFn,
    pub(crate) inverse_double_prime: RealFn,
    pub(crate) symbolic: Option<Expr>,
    pub(crate) ito_terms: Option<ItoTerms>,
    pub(crate) lower: EndBehavior,
    pub(crate) upper: EndBehavior,
    pub(crate) analytic: bool,
}

impl fmt::Debug for UtilityFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("UtilityFunction")
            .field("label", &self.label)
            .field("domain", &self.domain)
            .field("offset", &self.offset)
            .field("symbolic", &self.symbolic.as_ref().map(|e| e.to_string()))
            .field("lower", &self.lower)
            .field("upper", &self.upper)
            .finish()
    }
}

/// Result of checking the utility invariants on a sample grid.
#[derive(Debug, Clone, Serialize)]
pub struct UtilityReport {
    pub monotone: bool,
    pub round_trip_max_error: f64,
    pub derivative_max_error: f64,
    pub lower: EndBehavior,
    pub upper: EndBehavior,
    pub warnings: Vec<String>,
    pub passed: bool,
}

/// Numerical inverse of an increasing `u` on `domain` by bracketed bisection.
pub(crate) fn numeric_inverse(u: RealFn, domain: Interval, reference: f64, label: String) -> RealFn {
    Arc::new(move |target| {
        let f = |x: f64| u(x).ok();
        invert_monotone(&f, target, reference, domain.lo, domain.hi)
            .map_err(|_| EvalError::domain("inverse", target, label.clone()))
    })
}

/// `∂x/∂u = 1/u'(x(u))` and `∂²x/∂u² = −u''/u'³` evaluated through `inverse`.
pub(crate) fn inverse_derivatives(inverse: RealFn, u_prime: RealFn, u_double_prime: RealFn) -> (RealFn, RealFn) {
    let inv = inverse.clone();
    let up = u_prime.clone();
    let first: RealFn = Arc::new(move |v| Ok(1.0 / up(inv(v)?)?));
    let second: RealFn = Arc::new(move |v| {
        let x = inverse(v)?;
        let d1 = u_prime(x)?;
        Ok(-u_double_prime(x)? / (d1 * d1 * d1))
    });
    (first, second)
}

/// Approach one end of the domain (doubling towards infinity, halving the gap
/// to a finite end) and classify the growth of `u`.
pub(crate) fn probe_end(u: &RealFn, domain: Interval, reference: f64, upward: bool) -> EndBehavior {
    let end = if upward { domain.hi } else { domain.lo };
    let mut values = Vec::new();
    if let Ok(v) = u(reference) {
        values.push(v);
    }
    let mut last_x = reference;
    for k in 0..PROBE_STEPS {
        let x = if end.is_finite() {
            end - (end - reference) * 0.5f64.powi(k + 1)
        } else if upward {
            reference + 2f64.powi(k)
        } else {
            reference - 2f64.powi(k)
        };
        if !x.is_finite() || x == last_x || !domain.contains(x) {
            break;
        }
        last_x = x;
        match u(x) {
            Ok(v) => values.push(v),
            Err(_) => break,
        }
    }
    if values.iter().any(|v| v.abs() > UNBOUNDED_MAGNITUDE) {
        return EndBehavior::Unbounded;
    }
    let limit = *values.last().unwrap_or(&f64::NAN);
    let increments: Vec<f64> = values.windows(2).map(|w| (w[1] - w[0]).abs()).collect();
    const WINDOW: usize = 20;
    if increments.len() <= WINDOW {
        return EndBehavior::Bounded { limit };
    }
    let last = increments[increments.len() - 1];
    let earlier = increments[increments.len() - 1 - WINDOW];
    if last == 0.0 || earlier == 0.0 {
        return EndBehavior::Bounded { limit };
    }
    let mean_ratio = (last / earlier).powf(1.0 / WINDOW as f64);
    if mean_ratio >= 0.9 {
        EndBehavior::Unbounded
    } else {
        EndBehavior::Bounded { limit }
    }
}

impl UtilityFunction {
    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn domain(&self) -> Interval {
        self.domain
    }

    /// The additive constant of integration `C`.
    pub fn offset(&self) -> f64 {
        self.offset
    }

    /// `u(x)` as an expression, when one is known.
    pub fn symbolic(&self) -> Option<&Expr> {
        self.symbolic.as_ref()
    }

    /// Whether inverse and derivatives are closed forms.
    pub fn is_analytic(&self) -> bool {
        self.analytic
    }

    pub fn value(&self, x: f64) -> Result<f64, EvalError> {
        (self.u)(x)
    }

    pub fn prime(&self, x: f64) -> Result<f64, EvalError> {
        (self.u_prime)(x)
    }

    pub fn double_prime(&self, x: f64) -> Result<f64, EvalError> {
        (self.u_double_prime)(x)
    }

    /// Wealth `x(u)`.
    pub fn inverse(&self, u: f64) -> Result<f64, EvalError> {
        (self.inverse)(u)
    }

    pub fn inverse_prime(&self, u: f64) -> Result<f64, EvalError> {
        (self.inverse_prime)(u)
    }

    pub fn inverse_double_prime(&self, u: f64) -> Result<f64, EvalError> {
        (self.inverse_double_prime)(u)
    }

    /// `∂x/∂u` at `u = u(x)`, computed as `1/u'(x)` without inverting.
    pub fn dxdu_at_wealth(&self, x: f64) -> Result<f64, EvalError> {
        Ok(1.0 / self.prime(x)?)
    }

    /// `∂²x/∂u²` at `u = u(x)`, computed as `−u''(x)/u'(x)³`.
    pub fn d2xdu2_at_wealth(&self, x: f64) -> Result<f64, EvalError> {
        let d1 = self.prime(x)?;
        Ok(-self.double_prime(x)? / (d1 * d1 * d1))
    }

    pub fn lower_end(&self) -> EndBehavior {
        self.lower
    }

    pub fn upper_end(&self) -> EndBehavior {
        self.upper
    }

    /// Range of `u` over the domain; unbounded ends are infinite.
    pub fn range(&self) -> (f64, f64) {
        (
            self.lower.limit_or(f64::NEG_INFINITY),
            self.upper.limit_or(f64::INFINITY),
        )
    }

    /// The affine image `λ·u + c` (with `λ > 0`).
    pub fn affine(&self, lambda: f64, shift: f64) -> Result<UtilityFunction> {
        if !(lambda > 0.0 && lambda.is_finite()) || !shift.is_finite() {
            return Err(Error::param("lambda", "affine rescaling needs a finite λ > 0"));
        }
        let scale = |f: &RealFn, k: f64| -> RealFn {
            let f = f.clone();
            Arc::new(move |x| Ok(k * f(x)?))
        };
        let pre = |f: &RealFn, k: f64| -> RealFn {
            let f = f.clone();
            Arc::new(move |v| Ok(k * f((v - shift) / lambda)?))
        };
        let u = self.u.clone();
        let map_end = |e: EndBehavior| match e {
            EndBehavior::Unbounded => EndBehavior::Unbounded,
            EndBehavior::Bounded { limit } => EndBehavior::Bounded {
                limit: lambda * limit + shift,
            },
        };
        Ok(UtilityFunction {
            label: format!("{lambda}*({}) + {shift}", self.label),
            domain: self.domain,
            offset: lambda * self.offset + shift,
            u: Arc::new(move |x| Ok(lambda * u(x)? + shift)),
            u_prime: scale(&self.u_prime, lambda),
            u_double_prime: scale(&self.u_double_prime, lambda),
            inverse: pre(&self.inverse, 1.0),
            inverse_prime: pre(&self.inverse_prime, 1.0 / lambda),
            inverse_double_prime: pre(&self.inverse_double_prime, 1.0 / (lambda * lambda)),
            symbolic: self
                .symbolic
                .as_ref()
                .map(|e| expr::add(expr::mul(Expr::Num(lambda), e.clone()), Expr::Num(shift))),
            ito_terms: self.ito_terms.as_ref().map(|t| t.scaled(lambda)),
            lower: map_end(self.lower),
            upper: map_end(self.upper),
            analytic: self.analytic,
        })
    }

    /// Compare with `other` on `xs` after removing both additive constants.
    pub fn agrees_with(&self, other: &UtilityFunction, xs: &[f64], rel_tol: f64) -> bool {
        xs.iter().all(|&x| match (self.value(x), other.value(x)) {
            (Ok(a), Ok(b)) => {
                let (a, b) = (a - self.offset, b - other.offset);
                (a - b).abs() <= rel_tol * (1.0 + a.abs())
            }
            _ => false,
        })
    }

    /// Finite differences near a finite endpoint are dominated by
    /// truncation error; skip points closer than `FD_MARGIN`.
    fn well_conditioned(&self, x: f64) -> bool {
        let h = crate::numeric::stats::fd_step(x);
        self.domain.contains(x - h)
            && self.domain.contains(x + h)
            && (x - self.domain.lo).abs() >= FD_MARGIN
            && (self.domain.hi - x).abs() >= FD_MARGIN
    }

    /// Check monotonicity, the inverse round trip, derivative consistency
    /// and unboundedness on a sample grid.
    pub fn validate(&self) -> UtilityReport {
        let grid = self.domain.sample_grid(MONOTONICITY_GRID);
        let mut monotone = true;
        let mut prev: Option<f64> = None;
        let mut round_trip: f64 = 0.0;
        let mut deriv: f64 = 0.0;
        let u_opt = |x: f64| self.value(x).ok();
        let up_opt = |x: f64| self.prime(x).ok();
        for &x in &grid {
            let (Ok(v), Ok(d1)) = (self.value(x), self.prime(x)) else {
                monotone = false;
                continue;
            };
            if !(d1 > 0.0) || prev.is_some_and(|p| v <= p) {
                monotone = false;
            }
            prev = Some(v);
            match self.inverse(v) {
                Ok(back) => round_trip = round_trip.max((back - x).abs() / (1.0 + x.abs())),
                Err(_) => round_trip = f64::INFINITY,
            }
            if self.well_conditioned(x) {
                if let Some(fd) = central_difference(u_opt, x) {
                    deriv = deriv.max((fd - d1).abs() / (1.0 + d1.abs()));
                }
                if let (Some(fd2), Ok(d2)) = (central_difference(up_opt, x), self.double_prime(x)) {
                    deriv = deriv.max((fd2 - d2).abs() / (1.0 + d2.abs()));
                }
            }
        }
        let mut warnings = Vec::new();
        let mut ends_ok = true;
        if let EndBehavior::Bounded { limit } = self.lower {
            warnings.push(if self.domain.lo.is_finite() {
                format!(
                    "u is bounded below by {limit} at the finite endpoint {}",
                    self.domain.lo
                )
            } else {
                format!("u is bounded below by {limit} as x -> -inf")
            });
        }
        if let EndBehavior::Bounded { limit } = self.upper {
            if self.domain.hi.is_finite() {
                warnings.push(format!(
                    "u is bounded above by {limit} at the finite endpoint {}",
                    self.domain.hi
                ));
            } else {
                ends_ok = false;
                warnings.push(format!("u is bounded above by {limit} as x -> +inf"));
            }
        }
        let passed = monotone && round_trip <= ROUND_TRIP_TOL && deriv <= DERIVATIVE_TOL && ends_ok;
        UtilityReport {
            monotone,
            round_trip_max_error: round_trip,
            derivative_max_error: deriv,
            lower: self.lower,
            upper: self.upper,
            warnings,
            passed,
        }
    }

    /// Build a utility from an expression of `x`, with derivatives obtained
    /// symbolically and the inverse by bracketed bisection.
    pub fn from_expr(e: &Expr, domain: Interval) -> Result<UtilityFunction> {
        let d1 = e.differentiate();
        let d2 = d1.differentiate();
        for x in domain.sample_grid(MONOTONICITY_GRID) {
            e.eval(x)?;
            if !(d1.eval(x)? > 0.0) {
                return Err(Error::NotMonotone { x });
            }
        }
        let grid = domain.sample_grid(MONOTONICITY_GRID);
        for w in grid.windows(2) {
            if e.eval(w[1])? <= e.eval(w[0])? {
                return Err(Error::NotMonotone { x: w[1] });
            }
        }
        let as_fn = |ex: Expr| -> RealFn { Arc::new(move |x| ex.eval(x)) };
        let u = as_fn(e.clone());
        let u_prime = as_fn(d1.clone());
        let u_double_prime = as_fn(d2.clone());
        let reference = domain.reference_point();
        let inverse = numeric_inverse(u.clone(), domain, reference, e.to_string());
        let (inverse_prime, inverse_double_prime) =
            inverse_derivatives(inverse.clone(), u_prime.clone(), u_double_prime.clone());
        let lower = probe_end(&u, domain, reference, false);
        let upper = probe_end(&u, domain, reference, true);
        let d1_cubed = expr::pow(d1.clone(), Expr::Num(3.0));
        let ito_terms = ItoTerms {
            dxdu: vec![(1.0, expr::div(Expr::Num(1.0), d1))],
            d2xdu2: vec![(-1.0, expr::div(d2, d1_cubed))],
        };
        let utility = UtilityFunction {
            label: e.to_string(),
            domain,
            offset: 0.0,
            u,
            u_prime,
            u_double_prime,
            inverse,
            inverse_prime,
            inverse_double_prime,
            symbolic: Some(e.clone()),
            ito_terms: Some(ito_terms),
            lower,
            upper,
            analytic: false,
        };
        for x in grid.iter().step_by(64) {
            let v = utility.value(*x)?;
            utility.inverse(v)?;
        }
        Ok(utility)
    }
}
