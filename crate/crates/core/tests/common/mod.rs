#![allow(dead_code)]

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use szbf::expr::{BinaryOp, UnaryOp};
use szbf::{parse, BoxRegion, Expr, Region, SdeModel};

pub fn m2() -> SdeModel {
    SdeModel::from_strs("m2", &["-x1 - x2", "x1 - x2"], &[&["-x2", "x1"]]).unwrap()
}

pub fn m3() -> SdeModel {
    SdeModel::from_strs("m3", &["x1", "x2"], &[&["-x2", "x1"]]).unwrap()
}

pub fn ou() -> SdeModel {
    SdeModel::from_strs("ou", &["-x1"], &[&["0.5"]]).unwrap()
}

pub fn disk_h() -> Expr {
    parse("1 - x1^2 - x2^2", 2).unwrap()
}

pub fn square(half: f64) -> Region {
    Region::Box(BoxRegion::symmetric(2, half).unwrap())
}

/// Random expression tree of depth at most `depth` over `dim` variables.
pub fn random_expr(rng: &mut StdRng, depth: usize, dim: usize) -> Expr {
    if depth == 0 || rng.random_bool(0.25) {
        return if rng.random_bool(0.6) {
            Expr::Var(rng.random_range(0..dim))
        } else {
            Expr::Const((rng.random_range(-2.0..2.0f64) * 100.0).round() / 100.0)
        };
    }
    if rng.random_bool(0.35) {
        let op = [
            UnaryOp::Neg,
            UnaryOp::Sin,
            UnaryOp::Cos,
            UnaryOp::Exp,
            UnaryOp::Log,
            UnaryOp::Sqrt,
            UnaryOp::Tanh,
            UnaryOp::Abs,
        ][rng.random_range(0..8)];
        return Expr::Unary(op, Box::new(random_expr(rng, depth - 1, dim)));
    }
    let op = [BinaryOp::Add, BinaryOp::Sub, BinaryOp::Mul, BinaryOp::Div, BinaryOp::Pow][rng.random_range(0..5)];
    let lhs = random_expr(rng, depth - 1, dim);
    let rhs = if op == BinaryOp::Pow {
        if rng.random_bool(0.8) {
            Expr::Const([2.0, 3.0, -1.0, 0.5, 1.5][rng.random_range(0..5)])
        } else {
            random_expr(rng, depth - 1, dim)
        }
    } else {
        random_expr(rng, depth - 1, dim)
    };
    Expr::Binary(op, Box::new(lhs), Box::new(rhs))
}

pub fn central_difference(e: &Expr, p: &[f64], i: usize, step: f64) -> Option<f64> {
    let mut hi = p.to_vec();
    let mut lo = p.to_vec();
    hi[i] += step;
    lo[i] -= step;
    Some((e.eval(&hi).ok()? - e.eval(&lo).ok()?) / (2.0 * step))
}

/// Largest magnitude accepted for `e`, its gradient and its pure second
/// derivatives at a finite-difference test point. Near poles the central
/// difference's truncation error, not the symbolic derivative, dominates.
pub const CONDITIONING_BOUND: f64 = 1e3;

/// Whether `p` is a usable finite-difference test point for `e`.
pub fn well_conditioned(e: &Expr, grad: &[Expr], p: &[f64], step: f64) -> bool {
    let small = |v: Result<f64, _>| matches!(v, Ok(x) if x.abs() <= CONDITIONING_BOUND);
    small(e.eval(p))
        && grad.iter().enumerate().all(|(i, g)| {
            small(g.eval(p)) && small(g.derivative(i).eval(p)) && central_difference(e, p, i, step).is_some()
        })
}

pub fn seeded(seed: u64) -> StdRng {
    StdRng::seed_from_u64(seed)
}

/// `Lh` assembled from scratch: gradient and Hessian by differentiating `h`
/// here, coefficients by direct evaluation.
pub fn independent_generator(model: &SdeModel, h: &Expr, x: &[f64]) -> f64 {
    let n = model.dim();
    let grad: Vec<f64> = (0..n).map(|i| h.derivative(i).eval(x).unwrap()).collect();
    let b: Vec<f64> = model.drift().iter().map(|e| e.eval(x).unwrap()).collect();
    let mut total: f64 = grad.iter().zip(&b).map(|(g, bi)| g * bi).sum();
    for col in model.diffusion_columns() {
        let s: Vec<f64> = col.iter().map(|e| e.eval(x).unwrap()).collect();
        for i in 0..n {
            for j in 0..n {
                let hij = h.derivative(i).derivative(j).eval(x).unwrap();
                total += 0.5 * s[i] * s[j] * hij;
            }
        }
    }
    total
}

/// `grad h . sigma_k` by direct evaluation.
pub fn independent_coupling(model: &SdeModel, h: &Expr, x: &[f64], k: usize) -> f64 {
    model.diffusion_columns()[k]
        .iter()
        .enumerate()
        .map(|(i, s)| h.derivative(i).eval(x).unwrap() * s.eval(x).unwrap())
        .sum()
}

/// Rotational family: `b = (-a x1 - x2, x1 - a x2)`, `sigma = (-x2, x1)`;
/// with the disk barrier `Lh = (2a - 1)|x|^2`.
pub fn rotational(a: f64) -> SdeModel {
    SdeModel::from_strs(
        "rot",
        &[&format!("-{a} * x1 - x2"), &format!("x1 - {a} * x2")],
        &[&["-x2", "x1"]],
    )
    .unwrap()
}
