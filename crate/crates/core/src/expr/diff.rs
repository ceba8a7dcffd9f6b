use super::{add, div, mul, neg, pow, sub, BinOp, Expr, Func};

pub(super) fn differentiate(e: &Expr) -> Expr {
    match e {
        Expr::Num(_) => Expr::Num(0.0),
        Expr::Var => Expr::Num(1.0),
        Expr::Neg(a) => neg(differentiate(a)),
        Expr::Call(f, a) => {
            let da = differentiate(a);
            let outer = match f {
                Func::Exp => e.clone(),
                Func::Ln => div(Expr::Num(1.0), (**a).clone()),
                Func::Sqrt => div(Expr::Num(1.0), mul(Expr::Num(2.0), e.clone())),
                Func::Abs => Expr::call(Func::Sign, (**a).clone()),
                // piecewise constant; the jump at 0 is ignored
                Func::Sign => Expr::Num(0.0),
            };
            mul(outer, da)
        }
        Expr::Bin(op, a, b) => {
            let (a, b) = (&**a, &**b);
            match op {
                BinOp::Add => add(differentiate(a), differentiate(b)),
                BinOp::Sub => sub(differentiate(a), differentiate(b)),
                BinOp::Mul => add(mul(differentiate(a), b.clone()), mul(a.clone(), differentiate(b))),
                BinOp::Div => sub(
                    div(differentiate(a), b.clone()),
                    div(mul(a.clone(), differentiate(b)), pow(b.clone(), Expr::Num(2.0))),
                ),
                BinOp::Pow if b.is_constant() => {
                    let lowered = sub(b.clone(), Expr::Num(1.0));
                    mul(mul(b.clone(), pow(a.clone(), lowered)), differentiate(a))
                }
                BinOp::Pow if a.is_constant() => mul(mul(e.clone(), Expr::call(Func::Ln, a.clone())), differentiate(b)),
                BinOp::Pow => mul(
                    e.clone(),
                    add(
                        mul(differentiate(b), Expr::call(Func::Ln, a.clone())),
                        div(mul(b.clone(), differentiate(a)), a.clone()),
                    ),
                ),
            }
        }
    }
}
