//! Lyapunov function induced by a barrier: `V_C = 0` on `C`, `-h` on `D \ C`,
//! and the sampled decrease condition `LV_C = -Lh <= alpha(h) = alpha(-V_C) <= 0` off `C`.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alpha::ClassKeFn;
use crate::check::Conclusion;
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::generator::Generator;
use crate::model::SdeModel;
use crate::point::Point;
use crate::region::Region;
use crate::rng;
use crate::sampling::SamplingPlan;
use crate::scalar::{norm, Scalar};
use crate::simulate::{run_path, step_count};

/// `max(0, -h(p))`.
pub fn lyapunov_value<T: Scalar>(h: &Expr, p: &[T]) -> Result<T> {
    let v = h.eval(p).map_err(|e| Error::eval_at(p, e))?;
    Ok(if v >= T::zero() { T::zero() } else { -v })
}

/// `LV_C(p)`: zero in the interior of `C`; `-Lh(p)` on `D \ C` and on `∂C`
/// (the boundary is evaluated on the outside branch).
pub fn apply_generator_lyapunov<T: Scalar>(model: &SdeModel, h: &Expr, p: &Point<T>) -> Result<T> {
    let hv = h.eval(p).map_err(|e| Error::eval_at(p, e))?;
    if hv > T::zero() {
        return Ok(T::zero());
    }
    Ok(-Generator::new(model, h)?.apply(p)?)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovCondition<T = f64> {
    pub holds: bool,
    pub points: usize,
    pub violations: usize,
    pub witness: Option<Point<T>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovReport<T = f64> {
    pub conclusion: Conclusion,
    /// `V_C = 0` on sampled points of `C`.
    pub zero_on_c: LyapunovCondition<T>,
    /// `V_C > 0` on sampled points of `D \ C`.
    pub positive_off_c: LyapunovCondition<T>,
    /// `LV_C <= alpha(-V_C) <= 0` on sampled points of `D \ C`, within `tol_i`.
    pub decrease_off_c: LyapunovCondition<T>,
    /// Largest `LV_C - alpha(-V_C)` seen off `C`.
    pub max_decrease_gap: Option<T>,
    /// Samples with `h = 0` exactly; `V_C` is not twice differentiable there.
    pub boundary_points: usize,
    pub points_checked: usize,
    pub tol_factor: f64,
    pub assumed_hypotheses: Vec<String>,
}

pub(crate) const ASSUMED_HYPOTHESES: [&str; 1] =
    ["zero set of h along trajectories is closed (not numerically verifiable)"];

/// Checks the three Lyapunov conditions on the plan's samples.
pub fn check_lyapunov_conditions<T: Scalar>(
    model: &SdeModel,
    h: &Expr,
    alpha: &ClassKeFn,
    domain: &Region,
    plan: &SamplingPlan,
    tol_factor: f64,
) -> Result<LyapunovReport<T>> {
    let generator = Generator::new(model, h)?;
    let points: Vec<Point<T>> = plan.points(domain, h)?;
    let tol = T::lit(tol_factor);
    let zero = T::zero();

    struct Row<T> {
        h: T,
        v: T,
        lv: T,
        alpha_h: T,
        tol_i: T,
    }
    let rows: Vec<Row<T>> = points
        .par_iter()
        .map(|p| {
            let hv = h.eval(p).map_err(|e| Error::eval_at(p, e))?;
            let v = lyapunov_value(h, p)?;
            if hv >= zero {
                return Ok(Row { h: hv, v, lv: zero, alpha_h: zero, tol_i: zero });
            }
            let lh = generator.apply(p)?;
            let a = alpha.eval(hv).map_err(|e| Error::eval_at(p, e))?;
            Ok(Row { h: hv, v, lv: -lh, alpha_h: a, tol_i: tol * (T::one() + lh.abs() + a.abs()) })
        })
        .collect::<Result<_>>()?;

    let empty = || LyapunovCondition { holds: true, points: 0, violations: 0, witness: None };
    let (mut c1, mut c2, mut c3) = (empty(), empty(), empty());
    let mut max_gap: Option<T> = None;
    let mut worst_gap = T::neg_infinity();
    let mut boundary_points = 0;
    let fail = |c: &mut LyapunovCondition<T>, p: &Point<T>| {
        c.violations += 1;
        if c.witness.is_none() {
            c.witness = Some(p.clone());
        }
    };
    for (p, r) in points.iter().zip(&rows) {
        if r.h == zero {
            boundary_points += 1;
        }
        if r.h >= zero {
            c1.points += 1;
            if r.v != zero {
                fail(&mut c1, p);
            }
            continue;
        }
        c2.points += 1;
        c3.points += 1;
        if r.v <= zero {
            fail(&mut c2, p);
        }
        let gap = r.lv - r.alpha_h;
        max_gap = Some(max_gap.map_or(gap, |g: T| g.max(gap)));
        if gap > r.tol_i || r.alpha_h > r.tol_i {
            c3.violations += 1;
            if gap > worst_gap {
                worst_gap = gap;
                c3.witness = Some(p.clone());
            }
        }
    }
    for c in [&mut c1, &mut c2, &mut c3] {
        c.holds = c.violations == 0;
    }
    let conclusion = if !(c1.holds && c2.holds && c3.holds) {
        Conclusion::Refuted
    } else if c2.points == 0 {
        Conclusion::Inconclusive
    } else {
        Conclusion::CertifiedOnSamples
    };
    Ok(LyapunovReport {
        conclusion,
        zero_on_c: c1,
        positive_off_c: c2,
        decrease_off_c: c3,
        max_decrease_gap: max_gap,
        boundary_points,
        points_checked: points.len(),
        tol_factor,
        assumed_hypotheses: ASSUMED_HYPOTHESES.iter().map(|s| s.to_string()).collect(),
    })
}

/// Inputs of [`estimate_stability_profile`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileSettings<T = f64> {
    pub eps_levels: Vec<f64>,
    pub init_distances: Vec<f64>,
    pub n_paths: usize,
    pub dt: T,
    pub horizon: T,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LyapunovProfile<T = f64> {
    pub model: String,
    pub eps_levels: Vec<f64>,
    pub init_distances: Vec<f64>,
    /// `prob_matrix[d][e]` estimates `P[sup_{t <= horizon} dist(x_t, C) > eps_levels[e]]`
    /// for paths started at `init_distances[d]`.
    pub prob_matrix: Vec<Vec<f64>>,
    /// Rows where `|grad h|` fell below `1e-12` at a point outside `C`.
    pub unreliable_rows: Vec<bool>,
    pub n_paths: usize,
    pub dt: T,
    pub horizon: T,
    pub seed: u64,
    pub prng: String,
    pub distance_surrogate: String,
    pub placement: String,
    pub assumed_hypotheses: Vec<String>,
}

const DEGENERATE_GRAD: f64 = 1e-12;
const DIRECTION_CHANNEL: u64 = 1 << 40;

/// Interior anchor for the outward rays: the domain center when it lies in
/// `C`, else the grid point with the largest `h`.
fn anchor_point(h: &Expr, domain: &Region) -> Result<Vec<f64>> {
    let center = domain.bounds().center();
    if matches!(h.eval(&center), Ok(v) if v > 0.0) {
        return Ok(center);
    }
    let pts: Vec<Point<f64>> = SamplingPlan::grid(21).points(domain, h)?;
    let mut best: Option<(f64, Vec<f64>)> = None;
    for p in pts {
        if let Ok(v) = h.eval(&p) {
            if v > 0.0 && best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, p.into_inner()));
            }
        }
    }
    best.map(|(_, p)| p)
        .ok_or_else(|| Error::Precondition("no sampled point of D lies in the interior of C".into()))
}

/// Point of `∂C` on the ray `anchor + s u`, found by bracketing and bisection.
fn boundary_along(h: &Expr, anchor: &[f64], u: &[f64], reach: f64) -> Result<Vec<f64>> {
    let at = |s: f64| -> Vec<f64> { anchor.iter().zip(u).map(|(a, d)| a + s * d).collect() };
    let hv = |s: f64| h.eval(&at(s)).map_err(|e| Error::eval_at(&at(s), e));
    let (mut lo, mut hi) = (0.0, reach);
    let mut expansions = 0;
    while hv(hi)? >= 0.0 {
        lo = hi;
        hi *= 2.0;
        expansions += 1;
        if expansions > 30 {
            return Err(Error::Precondition("C appears unbounded along a sampled direction".into()));
        }
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if hv(mid)? >= 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(at(lo))
}

fn distance_surrogate<T: Scalar>(h: &Expr, grad: &[Expr], x: &[T], buf: &mut [T]) -> (T, bool) {
    let hv = match h.eval(x) {
        Ok(v) => v,
        Err(_) => return (T::infinity(), false),
    };
    if hv >= T::zero() {
        return (T::zero(), false);
    }
    for (b, g) in buf.iter_mut().zip(grad) {
        match g.eval(x) {
            Ok(v) => *b = v,
            Err(_) => return (T::infinity(), true),
        }
    }
    let gn = norm(buf);
    if gn < T::lit(DEGENERATE_GRAD) {
        return (T::infinity(), true);
    }
    (-hv / gn, false)
}

/// Estimates `P[sup_t dist(x_t, C) > eps]` for each initial distance and level.
///
/// Path `i` of every row starts on the ray from the interior anchor in the
/// direction drawn from sampler substream `2^40 + i`, at the requested distance
/// outside `∂C` along the outward normal `-grad h / |grad h|`. Distance zero
/// starts at the anchor itself, inside `C`. Path `i` of every row uses
/// Brownian substream `i`. `dist(x, C)` is the first-order surrogate
/// `max(0, -h) / |grad h|`, and one supremum per path serves every level, so
/// each row is nonincreasing in `eps`.
pub fn estimate_stability_profile<T: Scalar>(
    model: &SdeModel,
    h: &Expr,
    domain: &Region,
    settings: &ProfileSettings<T>,
) -> Result<LyapunovProfile<T>> {
    let ProfileSettings { eps_levels, init_distances, n_paths, dt, horizon, seed } = settings;
    let (dt, horizon, seed, n_paths) = (*dt, *horizon, *seed, *n_paths);
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    let sorted_positive = |v: &[f64], allow_zero: bool| {
        !v.is_empty()
            && v.iter().all(|&x| x.is_finite() && (x > 0.0 || (allow_zero && x == 0.0)))
            && v.windows(2).all(|w| w[0] < w[1])
    };
    if !sorted_positive(eps_levels, false) {
        return Err(Error::Precondition("eps levels must be positive and strictly increasing".into()));
    }
    if !sorted_positive(init_distances, true) {
        return Err(Error::Precondition("initial distances must be non-negative and strictly increasing".into()));
    }
    step_count(dt, horizon)?;
    let n = model.dim();
    let grad: Vec<Expr> = (0..n).map(|i| h.derivative(i)).collect();
    let anchor = anchor_point(h, domain)?;
    let reach = domain.bounds().min().iter().zip(domain.bounds().max()).map(|(a, b)| b - a).fold(0.0, f64::max);

    let starts: Vec<Vec<Vec<f64>>> = init_distances
        .iter()
        .map(|&d| {
            (0..n_paths as u64)
                .map(|i| {
                    if d == 0.0 {
                        return Ok(anchor.clone());
                    }
                    let mut r = rng::sampler_stream(seed, DIRECTION_CHANNEL + i);
                    let u = loop {
                        let z: Vec<f64> = (0..n).map(|_| rng::standard_normal::<f64>(&mut r)).collect();
                        let len = norm(&z);
                        if len > 1e-12 {
                            break z.iter().map(|v| v / len).collect::<Vec<_>>();
                        }
                    };
                    let b = boundary_along(h, &anchor, &u, reach)?;
                    let g: Vec<f64> = grad.iter().map(|e| e.eval(&b)).collect::<std::result::Result<_, _>>()
                        .map_err(|e| Error::eval_at(&b, e))?;
                    let gn = norm(&g);
                    if gn < DEGENERATE_GRAD {
                        return Err(Error::Precondition(format!("degenerate gradient of h at boundary point {b:?}")));
                    }
                    Ok(b.iter().zip(&g).map(|(x, gi)| x - d * gi / gn).collect())
                })
                .collect::<Result<_>>()
        })
        .collect::<Result<_>>()?;

    let max_eps = T::lit(*eps_levels.last().expect("non-empty"));
    let mut prob_matrix = Vec::with_capacity(init_distances.len());
    let mut unreliable_rows = Vec::with_capacity(init_distances.len());
    for row in &starts {
        let sups: Vec<(T, bool)> = row
            .par_iter()
            .enumerate()
            .map(|(i, x0)| {
                let x0: Vec<T> = x0.iter().map(|&v| T::lit(v)).collect();
                let mut buf = vec![T::zero(); n];
                let mut sup = T::zero();
                let mut degenerate = false;
                let end = run_path(model, &x0, dt, horizon, seed, i as u64, |_, _, x| {
                    let (d, flag) = distance_surrogate(h, &grad, x, &mut buf);
                    degenerate |= flag;
                    sup = sup.max(d);
                    Ok(if sup > max_eps { ControlFlow::Break(()) } else { ControlFlow::Continue(()) })
                })?;
                if end.exploded.is_some() {
                    sup = T::infinity();
                }
                Ok((sup, degenerate))
            })
            .collect::<Result<_>>()?;
        let probs = eps_levels
            .iter()
            .map(|&e| {
                let e = T::lit(e);
                sups.iter().filter(|(s, _)| *s > e).count() as f64 / n_paths as f64
            })
            .collect();
        prob_matrix.push(probs);
        unreliable_rows.push(sups.iter().any(|(_, d)| *d));
    }

    Ok(LyapunovProfile {
        model: model.name().to_string(),
        eps_levels: eps_levels.clone(),
        init_distances: init_distances.clone(),
        prob_matrix,
        unreliable_rows,
        n_paths,
        dt,
        horizon,
        seed,
        prng: rng::PRNG_ID.to_string(),
        distance_surrogate: "max(0, -h(x)) / |grad h(x)| (first-order)".into(),
        placement: "outward normal from the boundary point on a random ray from the interior anchor; distance 0 starts at the anchor".into(),
        assumed_hypotheses: ASSUMED_HYPOTHESES.iter().map(|s| s.to_string()).collect(),
    })
}
