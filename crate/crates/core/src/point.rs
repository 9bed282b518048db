use std::ops::{Deref, Index};

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

/// A finite point in state space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Point<T = f64>(Vec<T>);

impl<T: Scalar> Point<T> {
    /// Returns `None` if any coordinate is non-finite or the point is empty.
    pub fn new(coords: Vec<T>) -> Option<Self> {
        if coords.is_empty() || coords.iter().any(|c| !c.is_finite()) {
            return None;
        }
        Some(Point(coords))
    }

    pub(crate) fn from_vec_unchecked(coords: Vec<T>) -> Self {
        Point(coords)
    }

    pub fn from_f64(coords: &[f64]) -> Option<Self> {
        Self::new(coords.iter().map(|&c| T::lit(c)).collect())
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<T> {
        self.0
    }

    pub fn norm(&self) -> T {
        crate::scalar::norm(&self.0)
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(|c| c.to_f64_lossy()).collect()
    }
}

impl<T> Deref for Point<T> {
    type Target = [T];

    fn deref(&self) -> &[T] {
        &self.0
    }
}

impl<T> Index<usize> for Point<T> {
    type Output = T;

    fn index(&self, i: usize) -> &T {
        &self.0[i]
    }
}
