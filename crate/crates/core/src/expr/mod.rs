//! Scalar expressions in one variable `x`.
//!
//! The text grammar is the wire format for user-supplied drift, diffusion and
//! utility formulas:
//!
//! ```text
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*
//! unary  := '-' unary | power
//! power  := atom ('^' unary)?
//! atom   := number | 'x' | func '(' expr ')' | '(' expr ')'
//! func   := exp | ln | sqrt | abs | sign
//! ```
//!
//! `^` binds tighter than unary minus and is right-associative, so `-x^2` is
//! `-(x^2)` and `2^3^2` is `2^9`.

mod diff;
mod parse;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

pub use parse::{parse, ParseError, ParseErrorKind};

/// Whitelisted unary functions.
///
/// `Sign` is the derivative of `abs`; it evaluates to -1, 0 or 1 with
/// `sign(0) = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Func {
    Exp,
    Ln,
    Sqrt,
    Abs,
    Sign,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Ln => "ln",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Sign => "sign",
        }
    }

    pub fn from_name(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "ln" => Func::Ln,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "sign" => Func::Sign,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => " + ",
            BinOp::Sub => " - ",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }

    fn precedence(self) -> u8 {
        match self {
            BinOp::Add | BinOp::Sub => 1,
            BinOp::Mul | BinOp::Div => 2,
            BinOp::Pow => 4,
        }
    }
}

const PREC_NEG: u8 = 3;
const PREC_ATOM: u8 = 5;

/// Abstract syntax tree of a scalar function of `x`.
#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Num(f64),
    Var,
    Neg(Box<Expr>),
    Bin(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Box<Expr>),
}

/// Evaluation failure, carrying the printed subexpression that failed.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("domain error: {op} of {arg} in `{expr}`")]
    Domain { op: &'static str, arg: f64, expr: String },
    #[error("division by zero in `{expr}`")]
    DivisionByZero { expr: String },
    #[error("non-finite value in `{expr}`")]
    NonFinite { expr: String },
}

impl EvalError {
    /// Domain error raised by closed-form (non-`Expr`) functions.
    pub fn domain(op: &'static str, arg: f64, expr: impl Into<String>) -> Self {
        EvalError::Domain {
            op,
            arg,
            expr: expr.into(),
        }
    }
}

impl Expr {
    pub fn num(v: f64) -> Expr {
        Expr::Num(v)
    }

    pub fn var() -> Expr {
        Expr::Var
    }

    pub fn call(f: Func, arg: Expr) -> Expr {
        Expr::Call(f, Box::new(arg))
    }

    pub fn as_num(&self) -> Option<f64> {
        match self {
            Expr::Num(v) => Some(*v),
            _ => None,
        }
    }

    /// True if the tree does not mention `x`.
    pub fn is_constant(&self) -> bool {
        match self {
            Expr::Num(_) => true,
            Expr::Var => false,
            Expr::Neg(a) | Expr::Call(_, a) => a.is_constant(),
            Expr::Bin(_, a, b) => a.is_constant() && b.is_constant(),
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            Expr::Num(_) | Expr::Var => 1,
            Expr::Neg(a) | Expr::Call(_, a) => 1 + a.depth(),
            Expr::Bin(_, a, b) => 1 + a.depth().max(b.depth()),
        }
    }

    /// Evaluate at `x` in IEEE double precision.
    pub fn eval(&self, x: f64) -> Result<f64, EvalError> {
        let v = match self {
            Expr::Num(v) => *v,
            Expr::Var => x,
            Expr::Neg(a) => -a.eval(x)?,
            Expr::Call(f, a) => {
                let v = a.eval(x)?;
                match f {
                    Func::Exp => v.exp(),
                    Func::Ln => {
                        if v <= 0.0 {
                            return Err(self.domain_err("ln", v));
                        }
                        v.ln()
                    }
                    Func::Sqrt => {
                        if v < 0.0 {
                            return Err(self.domain_err("sqrt", v));
                        }
                        v.sqrt()
                    }
                    Func::Abs => v.abs(),
                    Func::Sign => sign(v),
                }
            }
            Expr::Bin(op, a, b) => {
                let l = a.eval(x)?;
                let r = b.eval(x)?;
                match op {
                    BinOp::Add => l + r,
                    BinOp::Sub => l - r,
                    BinOp::Mul => l * r,
                    BinOp::Div => {
                        if r == 0.0 {
                            return Err(EvalError::DivisionByZero { expr: self.to_string() });
                        }
                        l / r
                    }
                    BinOp::Pow => {
                        if l < 0.0 && r.fract() != 0.0 {
                            return Err(self.domain_err("non-integer power of negative base", l));
                        }
                        if l == 0.0 && r < 0.0 {
                            return Err(EvalError::DivisionByZero { expr: self.to_string() });
                        }
                        l.powf(r)
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(EvalError::NonFinite { expr: self.to_string() })
        }
    }

    fn domain_err(&self, op: &'static str, arg: f64) -> EvalError {
        EvalError::Domain {
            op,
            arg,
            expr: self.to_string(),
        }
    }

    /// Symbolic derivative with respect to `x`.
    pub fn differentiate(&self) -> Expr {
        diff::differentiate(&self.fold())
    }

    /// Fold constant subtrees into literals.
    pub fn fold(&self) -> Expr {
        match self {
            Expr::Num(_) | Expr::Var => self.clone(),
            Expr::Neg(a) => neg(a.fold()),
            Expr::Call(f, a) => {
                let a = a.fold();
                if let Some(v) = a.as_num() {
                    if let Ok(r) = Expr::call(*f, Expr::Num(v)).eval(0.0) {
                        return Expr::Num(r);
                    }
                }
                Expr::call(*f, a)
            }
            Expr::Bin(op, a, b) => binary(*op, a.fold(), b.fold()),
        }
    }

    fn precedence(&self) -> u8 {
        match self {
            Expr::Num(v) if v.is_sign_negative() => PREC_NEG,
            Expr::Num(_) | Expr::Var | Expr::Call(..) => PREC_ATOM,
            Expr::Neg(_) => PREC_NEG,
            Expr::Bin(op, ..) => op.precedence(),
        }
    }
}

pub(crate) fn sign(v: f64) -> f64 {
    if v > 0.0 {
        1.0
    } else if v < 0.0 {
        -1.0
    } else {
        0.0
    }
}

fn write_num(f: &mut fmt::Formatter<'_>, v: f64) -> fmt::Result {
    if v.fract() == 0.0 && v.abs() < 1e15 {
        write!(f, "{}", v as i64)
    } else {
        write!(f, "{:?}", v)
    }
}

fn write_child(f: &mut fmt::Formatter<'_>, e: &Expr, parens: bool) -> fmt::Result {
    if parens {
        write!(f, "({})", e)
    } else {
        write!(f, "{}", e)
    }
}

impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Num(v) => write_num(f, *v),
            Expr::Var => f.write_str("x"),
            Expr::Neg(a) => {
                f.write_str("-")?;
                write_child(f, a, a.precedence() < PREC_NEG)
            }
            Expr::Call(func, a) => write!(f, "{}({})", func.name(), a),
            Expr::Bin(op, a, b) => {
                let p = op.precedence();
                let (left_parens, right_parens) = match op {
                    BinOp::Pow => (a.precedence() <= p, b.precedence() < PREC_NEG),
                    _ => (a.precedence() < p, b.precedence() <= p),
                };
                write_child(f, a, left_parens)?;
                f.write_str(op.symbol())?;
                write_child(f, b, right_parens)
            }
        }
    }
}

impl FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse(s)
    }
}

impl Serialize for Expr {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Expr {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        parse(&s).map_err(serde::de::Error::custom)
    }
}

// Smart constructors. They fold literal arithmetic and drop additive and
// multiplicative identities; nothing more.

pub fn neg(a: Expr) -> Expr {
    match a {
        Expr::Num(v) => Expr::Num(-v),
        Expr::Neg(inner) => *inner,
        other => Expr::Neg(Box::new(other)),
    }
}

pub fn add(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Add, a, b)
}

pub fn sub(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Sub, a, b)
}

pub fn mul(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Mul, a, b)
}

pub fn div(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Div, a, b)
}

pub fn pow(a: Expr, b: Expr) -> Expr {
    binary(BinOp::Pow, a, b)
}

fn binary(op: BinOp, a: Expr, b: Expr) -> Expr {
    if let (Some(l), Some(r)) = (a.as_num(), b.as_num()) {
        let folded = Expr::Bin(op, Box::new(Expr::Num(l)), Box::new(Expr::Num(r)));
        if let Ok(v) = folded.eval(0.0) {
            return Expr::Num(v);
        }
        return folded;
    }
    let (ln, rn) = (a.as_num(), b.as_num());
    match op {
        BinOp::Add if ln == Some(0.0) => b,
        BinOp::Add | BinOp::Sub if rn == Some(0.0) => a,
        BinOp::Sub if ln == Some(0.0) => neg(b),
        BinOp::Mul if ln == Some(0.0) || rn == Some(0.0) => Expr::Num(0.0),
        BinOp::Mul if ln == Some(1.0) => b,
        BinOp::Mul if rn == Some(1.0) => a,
        BinOp::Mul if ln == Some(-1.0) => neg(b),
        BinOp::Mul if rn == Some(-1.0) => neg(a),
        BinOp::Div if rn == Some(1.0) => a,
        BinOp::Div if ln == Some(0.0) => Expr::Num(0.0),
        BinOp::Pow if rn == Some(1.0) => a,
        BinOp::Pow if rn == Some(0.0) => Expr::Num(1.0),
        _ => Expr::Bin(op, Box::new(a), Box::new(b)),
    }
}

/// Linear combination `Σ c_i · e_i`, merging structurally equal terms.
pub fn linear_combination(terms: &[(f64, Expr)]) -> Expr {
    let mut merged: Vec<(f64, Expr)> = Vec::new();
    for (c, e) in terms {
        match merged.iter_mut().find(|(_, m)| m == e) {
            Some((mc, _)) => *mc += c,
            None => merged.push((*c, e.clone())),
        }
    }
    let mut out: Option<Expr> = None;
    for (c, e) in merged.into_iter().filter(|(c, _)| *c != 0.0) {
        let term = mul(Expr::Num(c.abs()), e);
        out = Some(match out {
            None if c < 0.0 => neg(term),
            None => term,
            Some(acc) if c < 0.0 => sub(acc, term),
            Some(acc) => add(acc, term),
        });
    }
    out.unwrap_or(Expr::Num(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(s: &str) -> Expr {
        parse(s).unwrap()
    }

    #[test]
    fn eval_identity() {
        assert_eq!(p("x").eval(3.0).unwrap(), 3.0);
    }

    #[test]
    fn eval_right_associative_power() {
        assert_eq!(p("2^3^2").eval(0.0).unwrap(), 512.0);
    }

    #[test]
    fn eval_exp_test_drift_at_zero() {
        let e = p("(1/2)*exp(-x) - (1/2)*exp(-2*x)");
        assert_eq!(e.eval(0.0).unwrap(), 0.0);
    }

    #[test]
    fn unary_minus_is_looser_than_power() {
        assert_eq!(p("-x^2").eval(3.0).unwrap(), -9.0);
        assert_eq!(p("(-x)^2").eval(3.0).unwrap(), 9.0);
        assert_eq!(p("2^-1").eval(0.0).unwrap(), 0.5);
    }

    #[test]
    fn ln_of_negative_is_domain_error() {
        match p("ln(x)").eval(-1.0) {
            Err(EvalError::Domain { op, expr, .. }) => {
                assert_eq!(op, "ln");
                assert_eq!(expr, "ln(x)");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn errors_carry_offending_subexpression() {
        let err = p("1 + sqrt(x - 2)").eval(0.0).unwrap_err();
        assert_eq!(
            err,
            EvalError::Domain {
                op: "sqrt",
                arg: -2.0,
                expr: "sqrt(x - 2)".into()
            }
        );
        let err = p("3*(1/x)").eval(0.0).unwrap_err();
        assert_eq!(err, EvalError::DivisionByZero { expr: "1/x".into() });
    }

    #[test]
    fn negative_base_fractional_power_is_domain_error() {
        assert!(matches!(p("x^0.5").eval(-4.0), Err(EvalError::Domain { .. })));
        assert_eq!(p("x^3").eval(-2.0).unwrap(), -8.0);
    }

    #[test]
    fn printing_round_trips() {
        for s in [
            "x",
            "-x^2",
            "(-x)^2",
            "2^3^2",
            "(2^3)^2",
            "x - (x - 1)",
            "x - -x",
            "x/(x*2)",
            "exp(-x)*-1",
            "(1/2)*exp(-x) - (1/2)*exp(-2*x)",
            "1.5e-7*x + 1e300",
            "sign(x)*abs(x)",
        ] {
            let once = p(s).to_string();
            let twice = p(&once).to_string();
            assert_eq!(once, twice, "source {s}");
        }
    }

    #[test]
    fn negative_literal_base_is_parenthesised() {
        let e = pow(Expr::Num(-2.0), Expr::Var);
        assert_eq!(e.to_string(), "(-2)^x");
        assert_eq!(p(&e.to_string()).eval(2.0).unwrap(), 4.0);
    }

    #[test]
    fn linear_combination_merges_equal_terms() {
        let e = linear_combination(&[(0.05, Expr::Var), (0.02, Expr::Var)]);
        assert_eq!(e.to_string(), "0.07*x");
        let e = linear_combination(&[(0.5, p("exp(-x)")), (-0.5, p("exp(-2*x)"))]);
        assert_eq!(e.to_string(), "0.5*exp(-x) - 0.5*exp(-2*x)");
        assert_eq!(
            linear_combination(&[(1.0, Expr::Var), (-1.0, Expr::Var)]),
            Expr::Num(0.0)
        );
    }
}
