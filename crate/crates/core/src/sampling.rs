//! Deterministic point sets for the sampled checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::point::Point;
use crate::region::Region;
use crate::rng;
use crate::scalar::Scalar;

/// Which part of `D` the plan's points are restricted to.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum Restriction {
    Domain,
    /// `D \ C`, i.e. points with `h < 0`.
    DomainMinusC,
    /// `{x in D : |h(x)| <= width}`; `width` defaults to 5% of the range of `h` over the grid.
    BoundaryShell { width: Option<f64> },
}

type PointFilter<'a, T> = Box<dyn Fn(&[T]) -> Result<bool> + 'a>;

pub const DEFAULT_GRID_PER_AXIS: usize = 101;
pub const DEFAULT_SHELL_FRACTION: f64 = 0.05;
const MAX_GRID_POINTS: usize = 50_000_000;
/// Rejection sampling gives up after this many draws per requested point.
const REJECTION_FACTOR: usize = 1000;

/// Grid over the domain's bounding box (endpoints included) followed by
/// seeded uniform draws, all filtered by domain membership and the restriction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplingPlan {
    pub grid_per_axis: usize,
    pub random_samples: usize,
    pub seed: u64,
    pub restrict_to: Restriction,
}

impl Default for SamplingPlan {
    fn default() -> Self {
        SamplingPlan {
            grid_per_axis: DEFAULT_GRID_PER_AXIS,
            random_samples: 0,
            seed: 0,
            restrict_to: Restriction::Domain,
        }
    }
}

impl SamplingPlan {
    pub fn grid(grid_per_axis: usize) -> Self {
        SamplingPlan { grid_per_axis, ..Default::default() }
    }

    pub fn with_random(mut self, samples: usize, seed: u64) -> Self {
        self.random_samples = samples;
        self.seed = seed;
        self
    }

    pub fn restricted(mut self, restrict_to: Restriction) -> Self {
        self.restrict_to = restrict_to;
        self
    }

    fn grid_points<T: Scalar>(&self, domain: &Region) -> Result<Vec<Vec<T>>> {
        let b = domain.bounds();
        let n = b.dim();
        let g = self.grid_per_axis;
        let total = g
            .checked_pow(n as u32)
            .filter(|&t| t <= MAX_GRID_POINTS)
            .ok_or_else(|| Error::Precondition(format!("grid {g}^{n} is too large")))?;
        let axis = |a: usize, i: usize| {
            T::lit(b.min()[a] + (b.max()[a] - b.min()[a]) * i as f64 / (g - 1) as f64)
        };
        let mut out = Vec::with_capacity(total);
        let mut idx = vec![0usize; n];
        for _ in 0..total {
            let x: Vec<T> = (0..n).map(|a| axis(a, idx[a])).collect();
            if domain.contains(&x) {
                out.push(x);
            }
            for a in (0..n).rev() {
                idx[a] += 1;
                if idx[a] < g {
                    break;
                }
                idx[a] = 0;
            }
        }
        Ok(out)
    }

    fn shell_width(&self, domain: &Region, h: &Expr, explicit: Option<f64>) -> Result<f64> {
        if let Some(w) = explicit {
            return Ok(w);
        }
        let probe = SamplingPlan { grid_per_axis: self.grid_per_axis.min(51), ..self.clone() };
        let (lo, hi) = h_range(h, &probe.grid_points::<f64>(domain)?)?;
        Ok(DEFAULT_SHELL_FRACTION * (hi - lo))
    }

    /// Enumerates the plan's points. The sequence depends only on the plan,
    /// the domain and `h`.
    pub fn points<T: Scalar>(&self, domain: &Region, h: &Expr) -> Result<Vec<Point<T>>> {
        if self.grid_per_axis < 2 {
            return Err(Error::Precondition("grid_per_axis must be at least 2".into()));
        }
        let keep: PointFilter<'_, T> = match self.restrict_to {
            Restriction::Domain => Box::new(|_| Ok(true)),
            Restriction::DomainMinusC => Box::new(move |x: &[T]| {
                Ok(h.eval(x).map_err(|e| Error::eval_at(x, e))? < T::zero())
            }),
            Restriction::BoundaryShell { width } => {
                let w = T::lit(self.shell_width(domain, h, width)?);
                Box::new(move |x: &[T]| {
                    Ok(h.eval(x).map_err(|e| Error::eval_at(x, e))?.abs() <= w)
                })
            }
        };
        let mut out = Vec::new();
        for x in self.grid_points::<T>(domain)? {
            if keep(&x)? {
                out.push(Point::from_vec_unchecked(x));
            }
        }
        if self.random_samples > 0 {
            let b = domain.bounds();
            let mut r = rng::sampler_stream(self.seed, 0);
            let mut accepted = 0;
            let budget = self.random_samples.saturating_mul(REJECTION_FACTOR);
            for _ in 0..budget {
                let x: Vec<T> = (0..b.dim())
                    .map(|a| rng::uniform::<T>(&mut r, b.min()[a], b.max()[a]))
                    .collect();
                if domain.contains(&x) && keep(&x)? {
                    out.push(Point::from_vec_unchecked(x));
                    accepted += 1;
                    if accepted == self.random_samples {
                        break;
                    }
                }
            }
        }
        if out.is_empty() {
            return Err(Error::Precondition("sampling plan produced no points".into()));
        }
        Ok(out)
    }
}

/// `(min h, max h)` over `points`.
pub fn h_range<P: AsRef<[f64]>>(h: &Expr, points: &[P]) -> Result<(f64, f64)> {
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for p in points {
        let v = h.eval(p.as_ref()).map_err(|e| Error::eval_at(p.as_ref(), e))?;
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if lo > hi {
        return Err(Error::Precondition("empty point set".into()));
    }
    Ok((lo, hi))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parse;
    use crate::region::BoxRegion;

    fn square() -> Region {
        Region::Box(BoxRegion::symmetric(2, 1.3).unwrap())
    }

    #[test]
    fn grid_covers_box_with_endpoints() {
        let h = parse("1 - x1^2 - x2^2", 2).unwrap();
        let pts: Vec<Point<f64>> = SamplingPlan::grid(101).points(&square(), &h).unwrap();
        assert_eq!(pts.len(), 101 * 101);
        assert_eq!(pts[0].coords(), &[-1.3, -1.3]);
        assert_eq!(pts[pts.len() - 1].coords(), &[1.3, 1.3]);
        assert!(pts.iter().any(|p| p.norm() < 1e-12));
    }

    #[test]
    fn restrictions_filter_points() {
        let h = parse("1 - x1^2 - x2^2", 2).unwrap();
        let outside = SamplingPlan::grid(11)
            .with_random(500, 3)
            .restricted(Restriction::DomainMinusC)
            .points::<f64>(&square(), &h)
            .unwrap();
        assert!(outside.iter().all(|p| h.eval(p).unwrap() < 0.0));
        assert!(outside.len() >= 500);

        let shell = SamplingPlan::grid(41)
            .with_random(200, 3)
            .restricted(Restriction::BoundaryShell { width: None })
            .points::<f64>(&square(), &h)
            .unwrap();
        // range of h on the box is [1 - 3.38, 1]
        let w = 0.05 * 3.38;
        assert!(shell.iter().all(|p| h.eval(p).unwrap().abs() <= w + 1e-12));
        assert!(shell.len() >= 200);
    }

    #[test]
    fn deterministic_and_validated() {
        let h = parse("x1", 2).unwrap();
        let plan = SamplingPlan::grid(3).with_random(50, 9);
        let a: Vec<Point<f64>> = plan.points(&square(), &h).unwrap();
        assert_eq!(a, plan.points(&square(), &h).unwrap());
        assert!(SamplingPlan::grid(1).points::<f64>(&square(), &h).is_err());
        let never = parse("-1 - x1^2", 2).unwrap();
        let r = SamplingPlan::grid(3).restricted(Restriction::BoundaryShell { width: Some(0.1) });
        assert!(r.points::<f64>(&square(), &never).is_err());
    }
}
