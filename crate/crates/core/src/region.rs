//! Verification domains.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::expr::{EvalError, Expr};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RegionError {
    #[error("box bounds have mismatched lengths {0} and {1}")]
    LengthMismatch(usize, usize),
    #[error("box axis {axis} has invalid bounds [{min}, {max}]")]
    BadAxis { axis: usize, min: f64, max: f64 },
    #[error("box must have at least one axis")]
    Empty,
}

/// Axis-aligned box with finite bounds and `min < max` on every axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    min: Vec<f64>,
    max: Vec<f64>,
}

impl BoxRegion {
    pub fn new(min: Vec<f64>, max: Vec<f64>) -> Result<Self, RegionError> {
        if min.len() != max.len() {
            return Err(RegionError::LengthMismatch(min.len(), max.len()));
        }
        if min.is_empty() {
            return Err(RegionError::Empty);
        }
        for (axis, (&lo, &hi)) in min.iter().zip(&max).enumerate() {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(RegionError::BadAxis { axis, min: lo, max: hi });
            }
        }
        Ok(BoxRegion { min, max })
    }

    /// The cube `[-half, half]^dim`.
    pub fn symmetric(dim: usize, half: f64) -> Result<Self, RegionError> {
        Self::new(vec![-half; dim], vec![half; dim])
    }

    pub fn dim(&self) -> usize {
        self.min.len()
    }

    pub fn min(&self) -> &[f64] {
        &self.min
    }

    pub fn max(&self) -> &[f64] {
        &self.max
    }

    pub fn center(&self) -> Vec<f64> {
        self.min.iter().zip(&self.max).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn contains<T: Scalar>(&self, x: &[T]) -> bool {
        x.len() == self.dim()
            && x.iter().zip(self.min.iter().zip(&self.max)).all(|(&v, (&lo, &hi))| {
                let v = v.to_f64_lossy();
                v >= lo && v <= hi
            })
    }
}

/// A verification domain `D`: either a box or `{x in bounds : g(x) >= 0}`.
#[derive(Debug, Clone, PartialEq)]
pub enum Region {
    Box(BoxRegion),
    Superlevel { g: Expr, bounds: BoxRegion },
}

impl Region {
    pub fn bounds(&self) -> &BoxRegion {
        match self {
            Region::Box(b) => b,
            Region::Superlevel { bounds, .. } => bounds,
        }
    }

    pub fn dim(&self) -> usize {
        self.bounds().dim()
    }

    /// Membership test. Points where `g` fails to evaluate are outside.
    pub fn contains<T: Scalar>(&self, x: &[T]) -> bool {
        match self {
            Region::Box(b) => b.contains(x),
            Region::Superlevel { g, bounds } => {
                bounds.contains(x) && matches!(g.eval(x), Ok(v) if v >= T::zero())
            }
        }
    }

    /// Strict membership variant that surfaces evaluation failures of `g`.
    pub fn try_contains<T: Scalar>(&self, x: &[T]) -> Result<bool, EvalError> {
        match self {
            Region::Box(b) => Ok(b.contains(x)),
            Region::Superlevel { g, bounds } => {
                Ok(bounds.contains(x) && g.eval(x)? >= T::zero())
            }
        }
    }

    pub fn describe(&self) -> String {
        let b = self.bounds();
        let bx = format!("box {:?}..{:?}", b.min(), b.max());
        match self {
            Region::Box(_) => bx,
            Region::Superlevel { g, .. } => format!("{{{g} >= 0}} within {bx}"),
        }
    }
}
