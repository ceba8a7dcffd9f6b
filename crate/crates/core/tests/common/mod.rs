#![allow(dead_code)]

use ergo_core::expr::{BinOp, Expr, Func};
use proptest::prelude::*;

/// Random expression trees of depth at most `depth`.
pub fn expr_tree(depth: u32) -> impl Strategy<Value = Expr> {
    let leaf = prop_oneof![
        (-3.0f64..3.0).prop_map(|v| Expr::Num((v * 4.0).round() / 4.0)),
        Just(Expr::Var),
        Just(Expr::Var),
    ];
    leaf.prop_recursive(depth.saturating_sub(1), 48, 2, |inner| {
        prop_oneof![
            inner.clone().prop_map(|a| Expr::Neg(Box::new(a))),
            (
                prop_oneof![
                    Just(BinOp::Add),
                    Just(BinOp::Sub),
                    Just(BinOp::Mul),
                    Just(BinOp::Div),
                    Just(BinOp::Pow)
                ],
                inner.clone(),
                inner.clone()
            )
                .prop_map(|(op, a, b)| Expr::Bin(op, Box::new(a), Box::new(b))),
            (
                prop_oneof![Just(Func::Exp), Just(Func::Ln), Just(Func::Sqrt), Just(Func::Abs)],
                inner
            )
                .prop_map(|(f, a)| Expr::Call(f, Box::new(a))),
        ]
    })
}

/// Largest subexpression magnitude accepted by [`tame_at`].
pub const TAME_LIMIT: f64 = 1e3;
/// Smallest magnitude of an argument to a singular operation.
pub const SINGULAR_MARGIN: f64 = 0.1;

/// Whether `e` is well-conditioned at `x`: every subexpression evaluates
/// and stays below `TAME_LIMIT`, and arguments of `ln`, `sqrt`, `abs`,
/// divisors and power bases stay at least `SINGULAR_MARGIN` from zero.
pub fn tame_at(e: &Expr, x: f64) -> bool {
    fn walk(e: &Expr, x: f64) -> Option<f64> {
        match e {
            Expr::Num(_) | Expr::Var => {}
            Expr::Neg(a) => {
                walk(a, x)?;
            }
            Expr::Call(f, a) => {
                let v = walk(a, x)?;
                if *f != Func::Exp && v.abs() < SINGULAR_MARGIN {
                    return None;
                }
            }
            Expr::Bin(op, a, b) => {
                let l = walk(a, x)?;
                let r = walk(b, x)?;
                match op {
                    BinOp::Div if r.abs() < SINGULAR_MARGIN => return None,
                    BinOp::Pow if l.abs() < SINGULAR_MARGIN => return None,
                    _ => {}
                }
            }
        }
        let v = e.eval(x).ok()?;
        (v.abs() <= TAME_LIMIT).then_some(v)
    }
    walk(e, x).is_some()
}

/// Central difference with step `cbrt(eps)·(1+|x|)`.
pub fn central_difference(f: impl Fn(f64) -> Option<f64>, x: f64) -> Option<f64> {
    let h = f64::EPSILON.cbrt() * (1.0 + x.abs());
    Some((f(x + h)? - f(x - h)?) / (2.0 * h))
}

/// `n` points evenly spread through `(lo, hi)`, jittered by `seed`.
pub fn points(lo: f64, hi: f64, n: usize, seed: u64) -> Vec<f64> {
    let mut s = seed;
    (0..n)
        .map(|i| {
            s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            let jitter = (s >> 11) as f64 / (1u64 << 53) as f64;
            lo + (hi - lo) * (i as f64 + jitter) / n as f64
        })
        .collect()
}
