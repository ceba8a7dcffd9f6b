//! Utility functions, Itô wealth processes and the Brownian utility drift.

pub mod catalog;
mod process;
pub mod spec;
pub(crate) mod utility;

use std::fmt;
use std::sync::Arc;

use serde::de::{self, Deserializer};
use serde::ser::{SerializeTuple, Serializer};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::EvalError;

pub use process::{DerivativeSource, ItoProcess};
pub use utility::{EndBehavior, UtilityFunction, UtilityReport};

/// Real function of one variable that reports domain failures.
pub type RealFn = Arc<dyn Fn(f64) -> Result<f64, EvalError> + Send + Sync>;

/// Wrap a closed-form function, turning non-finite output into an error
/// tagged with `name`.
pub fn closed_form(name: &'static str, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> RealFn {
    Arc::new(move |x| {
        let v = f(x);
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::domain(name, x, name))
        }
    })
}

pub fn constant(v: f64) -> RealFn {
    Arc::new(move |_| Ok(v))
}

/// Half-width of the sampling window used for the doubly infinite line.
pub const REAL_LINE_WINDOW: f64 = 8.0;
/// Decades covered on each side of the reference point near a finite
/// endpoint paired with an infinite one.
pub const GEOMETRIC_DECADES: f64 = 3.0;

/// Open interval `(lo, hi)`; either end may be infinite.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo >= hi || lo == f64::INFINITY || hi == f64::NEG_INFINITY {
            return Err(Error::InvalidDomain(format!("({lo}, {hi})")));
        }
        Ok(Self { lo, hi })
    }

    pub const fn real_line() -> Self {
        Self {
            lo: f64::NEG_INFINITY,
            hi: f64::INFINITY,
        }
    }

    pub const fn positive() -> Self {
        Self {
            lo: 0.0,
            hi: f64::INFINITY,
        }
    }

    pub fn contains(&self, x: f64) -> bool {
        x > self.lo && x < self.hi
    }

    pub fn is_bounded(&self) -> bool {
        self.lo.is_finite() && self.hi.is_finite()
    }

    /// An interior point from which brackets and probes are grown.
    pub fn reference_point(&self) -> f64 {
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => 0.5 * (self.lo + self.hi),
            (true, false) => self.lo + 1.0,
            (false, true) => self.hi - 1.0,
            (false, false) => 0.0,
        }
    }

    /// `n` increasing interior sample points. Linear on bounded intervals and
    /// on the whole line (`±REAL_LINE_WINDOW`); geometric away from a finite
    /// endpoint when the other end is infinite.
    pub fn sample_grid(&self, n: usize) -> Vec<f64> {
        let n = n.max(2);
        let frac = |i: usize| i as f64 / (n - 1) as f64;
        match (self.lo.is_finite(), self.hi.is_finite()) {
            (true, true) => (0..n)
                .map(|i| self.lo + (self.hi - self.lo) * (i + 1) as f64 / (n + 1) as f64)
                .collect(),
            (true, false) => (0..n)
                .map(|i| self.lo + 10f64.powf(-GEOMETRIC_DECADES + 2.0 * GEOMETRIC_DECADES * frac(i)))
                .collect(),
            (false, true) => (0..n)
                .rev()
                .map(|i| self.hi - 10f64.powf(-GEOMETRIC_DECADES + 2.0 * GEOMETRIC_DECADES * frac(i)))
                .collect(),
            (false, false) => (0..n)
                .map(|i| -REAL_LINE_WINDOW + 2.0 * REAL_LINE_WINDOW * frac(i))
                .collect(),
        }
    }
}

impl fmt::Display for Interval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {})", self.lo, self.hi)
    }
}

fn bound_to_json(v: f64) -> serde_json::Value {
    if v == f64::INFINITY {
        "inf".into()
    } else if v == f64::NEG_INFINITY {
        "-inf".into()
    } else {
        v.into()
    }
}

impl Serialize for Interval {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut t = s.serialize_tuple(2)?;
        t.serialize_element(&bound_to_json(self.lo))?;
        t.serialize_element(&bound_to_json(self.hi))?;
        t.end()
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum Bound {
    Num(f64),
    Text(String),
}

impl Bound {
    fn value<E: de::Error>(self) -> std::result::Result<f64, E> {
        match self {
            Bound::Num(v) => Ok(v),
            Bound::Text(s) => match s.as_str() {
                "inf" | "+inf" => Ok(f64::INFINITY),
                "-inf" => Ok(f64::NEG_INFINITY),
                other => Err(E::custom(format!("bad interval bound `{other}`"))),
            },
        }
    }
}

impl<'de> Deserialize<'de> for Interval {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let (lo, hi) = <(Bound, Bound)>::deserialize(d)?;
        Interval::new(lo.value()?, hi.value()?).map_err(de::Error::custom)
    }
}

/// Drift and volatility of the utility Brownian motion `du = a_u dt + b_u dW`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BrownianDrift {
    pub a_u: f64,
    pub b_u: f64,
}

impl BrownianDrift {
    pub fn new(a_u: f64, b_u: f64) -> Result<Self> {
        if !a_u.is_finite() {
            return Err(Error::param("a_u", "must be finite"));
        }
        if !b_u.is_finite() || b_u < 0.0 {
            return Err(Error::param("b_u", "must be finite and non-negative"));
        }
        Ok(Self { a_u, b_u })
    }

    /// The ratio `a_u / b_u`, the only combination a dynamic pins down.
    pub fn ratio(&self) -> f64 {
        self.a_u / self.b_u
    }

    pub(crate) fn require_noise(&self) -> Result<()> {
        if self.b_u > 0.0 {
            Ok(())
        } else {
            Err(Error::param("b_u", "must be strictly positive here"))
        }
    }
}
