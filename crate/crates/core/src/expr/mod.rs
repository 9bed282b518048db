//! Scalar expressions over state variables `x1..xn`.
//!
//! An [`Expr`] is an immutable tree that can be parsed from text, printed back
//! (re-parseable), evaluated at a point for any [`Scalar`] type, and
//! differentiated symbolically. Variable indices are zero-based internally
//! and printed one-based (`Var(0)` prints as `x1`).

mod diff;
mod parse;

use std::fmt;

use thiserror::Error;

use crate::scalar::Scalar;

pub use parse::{parse, ParseError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum UnaryOp {
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
    Abs,
}

impl UnaryOp {
    /// Function-call spelling; `None` for negation.
    pub fn name(self) -> Option<&'static str> {
        match self {
            UnaryOp::Neg => None,
            UnaryOp::Sin => Some("sin"),
            UnaryOp::Cos => Some("cos"),
            UnaryOp::Exp => Some("exp"),
            UnaryOp::Log => Some("log"),
            UnaryOp::Sqrt => Some("sqrt"),
            UnaryOp::Tanh => Some("tanh"),
            UnaryOp::Abs => Some("abs"),
        }
    }

    pub(crate) fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "sin" => UnaryOp::Sin,
            "cos" => UnaryOp::Cos,
            "exp" => UnaryOp::Exp,
            "log" => UnaryOp::Log,
            "sqrt" => UnaryOp::Sqrt,
            "tanh" => UnaryOp::Tanh,
            "abs" => UnaryOp::Abs,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BinaryOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinaryOp {
    pub fn symbol(self) -> char {
        match self {
            BinaryOp::Add => '+',
            BinaryOp::Sub => '-',
            BinaryOp::Mul => '*',
            BinaryOp::Div => '/',
            BinaryOp::Pow => '^',
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(f64),
    /// Zero-based state variable index.
    Var(usize),
    Unary(UnaryOp, Box<Expr>),
    Binary(BinaryOp, Box<Expr>, Box<Expr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DomainErrorKind {
    LogOfNonPositive,
    SqrtOfNegative,
    DivisionByZero,
    FractionalPowerOfNegative,
    NonFinite,
    VariableOutOfRange,
}

impl fmt::Display for DomainErrorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            DomainErrorKind::LogOfNonPositive => "log of non-positive value",
            DomainErrorKind::SqrtOfNegative => "sqrt of negative value",
            DomainErrorKind::DivisionByZero => "division by zero",
            DomainErrorKind::FractionalPowerOfNegative => {
                "non-integer power of negative base"
            }
            DomainErrorKind::NonFinite => "non-finite result",
            DomainErrorKind::VariableOutOfRange => "variable index outside point dimension",
        })
    }
}

/// Evaluation failure, carrying the printed subexpression that failed.
#[derive(Debug, Clone, PartialEq, Error)]
#[error("{kind} in `{subexpr}`")]
pub struct EvalError {
    pub kind: DomainErrorKind,
    pub subexpr: String,
}

impl EvalError {
    fn at(kind: DomainErrorKind, e: &Expr) -> Self {
        EvalError { kind, subexpr: e.to_string() }
    }
}

#[allow(clippy::should_implement_trait)]
impl Expr {
    pub fn constant(v: f64) -> Expr {
        Expr::Const(v)
    }

    pub fn var(index: usize) -> Expr {
        Expr::Var(index)
    }

    /// Negation with constant folding.
    pub fn neg(e: Expr) -> Expr {
        match e {
            Expr::Const(c) => Expr::Const(-c),
            Expr::Unary(UnaryOp::Neg, inner) => *inner,
            e => Expr::Unary(UnaryOp::Neg, Box::new(e)),
        }
    }

    pub fn unary(op: UnaryOp, e: Expr) -> Expr {
        if op == UnaryOp::Neg {
            return Expr::neg(e);
        }
        if let Expr::Const(c) = e {
            let folded = apply_unary(op, c);
            if let Ok(v) = folded {
                return Expr::Const(v);
            }
        }
        Expr::Unary(op, Box::new(e))
    }

    /// Binary node with constant folding (`0*e → 0`, `e+0 → e`, `1*e → e`, ...).
    ///
    /// Folding never hides a domain error: constant subtrees that would fail to
    /// evaluate are left in place.
    pub fn binary(op: BinaryOp, a: Expr, b: Expr) -> Expr {
        use BinaryOp::*;
        if let (Expr::Const(x), Expr::Const(y)) = (&a, &b) {
            if let Ok(v) = apply_binary(op, *x, *y) {
                return Expr::Const(v);
            }
        }
        let is = |e: &Expr, v: f64| matches!(e, Expr::Const(c) if *c == v);
        match op {
            Add if is(&a, 0.0) => b,
            Add if is(&b, 0.0) => a,
            Sub if is(&b, 0.0) => a,
            Sub if is(&a, 0.0) => Expr::neg(b),
            Mul if is(&a, 0.0) || is(&b, 0.0) => Expr::Const(0.0),
            Mul if is(&a, 1.0) => b,
            Mul if is(&b, 1.0) => a,
            Mul if is(&a, -1.0) => Expr::neg(b),
            Mul if is(&b, -1.0) => Expr::neg(a),
            Div if is(&b, 1.0) => a,
            Pow if is(&b, 1.0) => a,
            _ => Expr::Binary(op, Box::new(a), Box::new(b)),
        }
    }

    pub fn add(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Add, a, b)
    }

    pub fn sub(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Sub, a, b)
    }

    pub fn mul(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Mul, a, b)
    }

    pub fn div(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Div, a, b)
    }

    pub fn pow(a: Expr, b: Expr) -> Expr {
        Expr::binary(BinaryOp::Pow, a, b)
    }

    pub fn as_const(&self) -> Option<f64> {
        match self {
            Expr::Const(c) => Some(*c),
            _ => None,
        }
    }

    /// Largest variable index referenced (zero-based), if any.
    pub fn max_var(&self) -> Option<usize> {
        match self {
            Expr::Const(_) => None,
            Expr::Var(i) => Some(*i),
            Expr::Unary(_, e) => e.max_var(),
            Expr::Binary(_, a, b) => match (a.max_var(), b.max_var()) {
                (Some(x), Some(y)) => Some(x.max(y)),
                (x, y) => x.or(y),
            },
        }
    }

    pub fn node_count(&self) -> usize {
        match self {
            Expr::Const(_) | Expr::Var(_) => 1,
            Expr::Unary(_, e) => 1 + e.node_count(),
            Expr::Binary(_, a, b) => 1 + a.node_count() + b.node_count(),
        }
    }

    /// Evaluates at `x`. Every non-finite intermediate is reported as a domain error.
    pub fn eval<T: Scalar>(&self, x: &[T]) -> Result<T, EvalError> {
        match self {
            Expr::Const(c) => Ok(T::lit(*c)),
            Expr::Var(i) => x
                .get(*i)
                .copied()
                .ok_or_else(|| EvalError::at(DomainErrorKind::VariableOutOfRange, self)),
            Expr::Unary(op, e) => {
                let v = e.eval(x)?;
                apply_unary(*op, v).map_err(|k| EvalError::at(k, self))
            }
            Expr::Binary(op, a, b) => {
                let u = a.eval(x)?;
                let v = b.eval(x)?;
                apply_binary(*op, u, v).map_err(|k| EvalError::at(k, self))
            }
        }
    }

    pub fn eval_grad<T: Scalar>(&self, x: &[T]) -> Result<Vec<T>, EvalError> {
        (0..x.len()).map(|i| self.derivative(i).eval(x)).collect()
    }
}

fn apply_unary<T: Scalar>(op: UnaryOp, v: T) -> Result<T, DomainErrorKind> {
    let r = match op {
        UnaryOp::Neg => -v,
        UnaryOp::Sin => v.sin(),
        UnaryOp::Cos => v.cos(),
        UnaryOp::Exp => v.exp(),
        UnaryOp::Log => {
            if v <= T::zero() {
                return Err(DomainErrorKind::LogOfNonPositive);
            }
            v.ln()
        }
        UnaryOp::Sqrt => {
            if v < T::zero() {
                return Err(DomainErrorKind::SqrtOfNegative);
            }
            v.sqrt()
        }
        UnaryOp::Tanh => v.tanh(),
        UnaryOp::Abs => v.abs(),
    };
    finite(r)
}

fn apply_binary<T: Scalar>(op: BinaryOp, u: T, v: T) -> Result<T, DomainErrorKind> {
    let r = match op {
        BinaryOp::Add => u + v,
        BinaryOp::Sub => u - v,
        BinaryOp::Mul => u * v,
        BinaryOp::Div => {
            if v == T::zero() {
                return Err(DomainErrorKind::DivisionByZero);
            }
            u / v
        }
        BinaryOp::Pow => {
            if u < T::zero() && v.fract() != T::zero() {
                return Err(DomainErrorKind::FractionalPowerOfNegative);
            }
            if u == T::zero() && v < T::zero() {
                return Err(DomainErrorKind::DivisionByZero);
            }
            match v.to_i32() {
                Some(k) if T::lit(k as f64) == v => u.powi(k),
                _ => u.powf(v),
            }
        }
    };
    finite(r)
}

fn finite<T: Scalar>(r: T) -> Result<T, DomainErrorKind> {
    if r.is_finite() {
        Ok(r)
    } else {
        Err(DomainErrorKind::NonFinite)
    }
}

/// Fully parenthesised, re-parseable rendering; constants use the shortest
/// round-trip decimal form.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Const(c) if *c < 0.0 || (*c == 0.0 && c.is_sign_negative()) => {
                write!(f, "(-{:?})", -c)
            }
            Expr::Const(c) => write!(f, "{c:?}"),
            Expr::Var(i) => write!(f, "x{}", i + 1),
            Expr::Unary(UnaryOp::Neg, e) => write!(f, "(-{e})"),
            Expr::Unary(op, e) => write!(f, "{}({e})", op.name().unwrap_or("")),
            Expr::Binary(op, a, b) => write!(f, "({a} {} {b})", op.symbol()),
        }
    }
}
