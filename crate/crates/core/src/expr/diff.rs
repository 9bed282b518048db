use super::{BinaryOp, Expr, UnaryOp};

impl Expr {
    /// Symbolic partial derivative with respect to the zero-based variable `var`.
    ///
    /// The result stays inside the grammar (`|u|' = u/|u| * u'`) and is built
    /// with the folding constructors, so constant subtrees collapse.
    pub fn derivative(&self, var: usize) -> Expr {
        match self {
            Expr::Const(_) => Expr::Const(0.0),
            Expr::Var(i) => Expr::Const(if *i == var { 1.0 } else { 0.0 }),
            Expr::Unary(op, u) => {
                let du = u.derivative(var);
                if du.as_const() == Some(0.0) {
                    return Expr::Const(0.0);
                }
                let u = (**u).clone();
                let outer = match op {
                    UnaryOp::Neg => return Expr::neg(du),
                    UnaryOp::Sin => Expr::unary(UnaryOp::Cos, u),
                    UnaryOp::Cos => Expr::neg(Expr::unary(UnaryOp::Sin, u)),
                    UnaryOp::Exp => Expr::unary(UnaryOp::Exp, u),
                    UnaryOp::Log => return Expr::div(du, u),
                    UnaryOp::Sqrt => {
                        let two_root = Expr::mul(Expr::Const(2.0), Expr::unary(UnaryOp::Sqrt, u));
                        return Expr::div(du, two_root);
                    }
                    UnaryOp::Tanh => {
                        let t = Expr::unary(UnaryOp::Tanh, u);
                        Expr::sub(Expr::Const(1.0), Expr::pow(t, Expr::Const(2.0)))
                    }
                    UnaryOp::Abs => {
                        let abs = Expr::unary(UnaryOp::Abs, u.clone());
                        Expr::div(u, abs)
                    }
                };
                Expr::mul(outer, du)
            }
            Expr::Binary(op, a, b) => {
                let da = a.derivative(var);
                let db = b.derivative(var);
                let (a, b) = ((**a).clone(), (**b).clone());
                match op {
                    BinaryOp::Add => Expr::add(da, db),
                    BinaryOp::Sub => Expr::sub(da, db),
                    BinaryOp::Mul => Expr::add(Expr::mul(da, b), Expr::mul(a, db)),
                    BinaryOp::Div => {
                        // (a'b - ab') / b^2
                        let num = Expr::sub(Expr::mul(da, b.clone()), Expr::mul(a, db));
                        Expr::div(num, Expr::pow(b, Expr::Const(2.0)))
                    }
                    BinaryOp::Pow => pow_derivative(a, b, da, db),
                }
            }
        }
    }
}

fn pow_derivative(base: Expr, exponent: Expr, dbase: Expr, dexp: Expr) -> Expr {
    if let Some(c) = exponent.as_const() {
        // c * base^(c-1) * base'
        let lowered = Expr::pow(base, Expr::Const(c - 1.0));
        return Expr::mul(Expr::mul(Expr::Const(c), lowered), dbase);
    }
    // base^e * (e' log(base) + e base'/base)
    let whole = Expr::pow(base.clone(), exponent.clone());
    let log_term = Expr::mul(dexp, Expr::unary(UnaryOp::Log, base.clone()));
    let base_term = Expr::div(Expr::mul(exponent, dbase), base);
    Expr::mul(whole, Expr::add(log_term, base_term))
}
