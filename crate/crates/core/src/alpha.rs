//! Extended class-K functions (strictly increasing, `alpha(0) = 0`).

use std::fmt;

use serde::Serialize;
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AlphaError {
    #[error("alpha parameter c must be positive and finite, got {0}")]
    BadParameter(f64),
    #[error("custom alpha must use only x1 as its argument")]
    BadVariable,
    #[error("custom alpha has alpha(0) = {0}, expected 0")]
    NonZeroAtOrigin(f64),
    #[error("custom alpha is not strictly increasing: alpha({a}) = {fa} >= alpha({b}) = {fb}")]
    NotIncreasing { a: f64, fa: f64, b: f64, fb: f64 },
    #[error("custom alpha is undefined at {at}: {source}")]
    Undefined { at: f64, source: EvalError },
    #[error("alpha validation range [{0}, {1}] is empty")]
    EmptyRange(f64, f64),
}

/// User-facing description of alpha before validation.
#[derive(Debug, Clone, PartialEq)]
pub enum AlphaSpec {
    Linear { c: f64 },
    Cubic { c: f64 },
    /// Expression in the single variable `x1`.
    Custom { expr: Expr },
}

impl Default for AlphaSpec {
    fn default() -> Self {
        AlphaSpec::Linear { c: 1.0 }
    }
}

/// A validated extended class-K function.
#[derive(Debug, Clone, PartialEq)]
pub enum ClassKeFn {
    Linear { c: f64 },
    Cubic { c: f64 },
    Custom { expr: Expr, checked_range: (f64, f64) },
}

const MONOTONICITY_GRID: usize = 1001;

/// Validates `spec`; custom functions are scanned for monotonicity and
/// `alpha(0) = 0` on `range` (typically the range of `h` over the domain).
pub fn make_alpha(spec: &AlphaSpec, range: (f64, f64)) -> Result<ClassKeFn, AlphaError> {
    match spec {
        AlphaSpec::Linear { c } | AlphaSpec::Cubic { c } if !(c.is_finite() && *c > 0.0) => {
            Err(AlphaError::BadParameter(*c))
        }
        AlphaSpec::Linear { c } => Ok(ClassKeFn::Linear { c: *c }),
        AlphaSpec::Cubic { c } => Ok(ClassKeFn::Cubic { c: *c }),
        AlphaSpec::Custom { expr } => {
            if expr.max_var().is_some_and(|v| v > 0) {
                return Err(AlphaError::BadVariable);
            }
            let (lo, hi) = (range.0.min(0.0), range.1.max(0.0));
            if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) {
                return Err(AlphaError::EmptyRange(range.0, range.1));
            }
            let at = |r: f64| expr.eval(&[r]).map_err(|source| AlphaError::Undefined { at: r, source });
            let zero = at(0.0)?;
            if zero.abs() > 1e-15 {
                return Err(AlphaError::NonZeroAtOrigin(zero));
            }
            let mut grid: Vec<f64> = (0..MONOTONICITY_GRID)
                .map(|i| lo + (hi - lo) * i as f64 / (MONOTONICITY_GRID - 1) as f64)
                .collect();
            grid.push(0.0);
            grid.sort_by(f64::total_cmp);
            grid.dedup();
            let mut prev = (grid[0], at(grid[0])?);
            for &r in &grid[1..] {
                let v = at(r)?;
                if v <= prev.1 {
                    return Err(AlphaError::NotIncreasing { a: prev.0, fa: prev.1, b: r, fb: v });
                }
                prev = (r, v);
            }
            Ok(ClassKeFn::Custom { expr: expr.clone(), checked_range: (lo, hi) })
        }
    }
}

impl ClassKeFn {
    pub fn linear(c: f64) -> Self {
        make_alpha(&AlphaSpec::Linear { c }, (-1.0, 1.0)).expect("positive slope")
    }

    pub fn eval<T: Scalar>(&self, r: T) -> Result<T, EvalError> {
        match self {
            ClassKeFn::Linear { c } => Ok(T::lit(*c) * r),
            ClassKeFn::Cubic { c } => Ok(T::lit(*c) * r * r * r),
            ClassKeFn::Custom { expr, .. } => expr.eval(&[r]),
        }
    }

    /// `2 * alpha`, used to probe how certification depends on the decay rate.
    pub fn scaled(&self, factor: f64) -> ClassKeFn {
        match self {
            ClassKeFn::Linear { c } => ClassKeFn::Linear { c: c * factor },
            ClassKeFn::Cubic { c } => ClassKeFn::Cubic { c: c * factor },
            ClassKeFn::Custom { expr, checked_range } => ClassKeFn::Custom {
                expr: Expr::mul(Expr::Const(factor), expr.clone()),
                checked_range: *checked_range,
            },
        }
    }
}

impl fmt::Display for ClassKeFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ClassKeFn::Linear { c } => write!(f, "linear(c={c})"),
            ClassKeFn::Cubic { c } => write!(f, "cubic(c={c})"),
            ClassKeFn::Custom { expr, .. } => write!(f, "custom({expr})"),
        }
    }
}

impl Serialize for ClassKeFn {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_string())
    }
}
