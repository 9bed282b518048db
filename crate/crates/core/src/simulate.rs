//! Euler–Maruyama sample paths, exit detection and invariance statistics.
//!
//! One step is `x <- x + b(x) dt + sum_k sigma_k(x) dW_k` with
//! `dW_k = sqrt(dt) Z_k`, `Z_k` standard normal from the path's substream
//! (see [`crate::rng`]). All `m` normals are drawn every step, so a path
//! with zero diffusion is identical for every seed.

use std::ops::ControlFlow;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::model::SdeModel;
use crate::point::Point;
use crate::region::Region;
use crate::rng::{self, StreamRng};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SamplePath<T = f64> {
    pub model: String,
    pub seed: u64,
    pub path_index: u64,
    pub dt: T,
    pub horizon: T,
    pub times: Vec<T>,
    pub states: Vec<Point<T>>,
    /// Set when a state became non-finite or a coefficient failed to
    /// evaluate; the path is truncated at the last good state.
    pub exploded: bool,
    pub explosion_reason: Option<String>,
}

pub(crate) fn step_count<T: Scalar>(dt: T, horizon: T) -> Result<usize> {
    if !(dt > T::zero() && dt.is_finite()) {
        return Err(Error::Precondition(format!("dt must be positive, got {dt}")));
    }
    if !(horizon >= dt && horizon.is_finite()) {
        return Err(Error::Precondition(format!("horizon must be at least dt, got {horizon}")));
    }
    let steps = (horizon / dt).round();
    steps
        .to_usize()
        .filter(|&s| s >= 1)
        .ok_or_else(|| Error::Precondition("step count out of range".into()))
}

pub(crate) struct Stepper<T> {
    drift: Vec<T>,
    sigma: Vec<T>,
    dw: Vec<T>,
    next: Vec<T>,
}

impl<T: Scalar> Stepper<T> {
    pub(crate) fn new(model: &SdeModel) -> Self {
        Stepper {
            drift: vec![T::zero(); model.dim()],
            sigma: vec![T::zero(); model.dim()],
            dw: vec![T::zero(); model.noise_dim()],
            next: vec![T::zero(); model.dim()],
        }
    }

    /// Advances `x` by one step. On failure `x` is left unchanged.
    pub(crate) fn step(
        &mut self,
        model: &SdeModel,
        x: &mut [T],
        dt: T,
        sqrt_dt: T,
        rng: &mut StreamRng,
    ) -> std::result::Result<(), String> {
        for w in self.dw.iter_mut() {
            *w = sqrt_dt * rng::standard_normal::<T>(rng);
        }
        model.drift_at(x, &mut self.drift).map_err(|e| e.to_string())?;
        for ((ni, &xi), &bi) in self.next.iter_mut().zip(x.iter()).zip(&self.drift) {
            *ni = xi + bi * dt;
        }
        for k in 0..model.noise_dim() {
            model.diffusion_at(x, k, &mut self.sigma).map_err(|e| e.to_string())?;
            for (ni, &si) in self.next.iter_mut().zip(&self.sigma) {
                *ni = *ni + si * self.dw[k];
            }
        }
        if self.next.iter().any(|v| !v.is_finite()) {
            return Err("non-finite state".into());
        }
        x.copy_from_slice(&self.next);
        Ok(())
    }
}

pub(crate) struct PathEnd {
    pub exploded: Option<String>,
}

/// Streams one path to `visit(step, time, state)`; `visit` may stop early.
pub(crate) fn run_path<T: Scalar, F>(
    model: &SdeModel,
    x0: &[T],
    dt: T,
    horizon: T,
    seed: u64,
    index: u64,
    mut visit: F,
) -> Result<PathEnd>
where
    F: FnMut(usize, T, &[T]) -> Result<ControlFlow<()>>,
{
    if x0.len() != model.dim() {
        return Err(Error::Precondition(format!(
            "initial point has dimension {}, model has {}",
            x0.len(),
            model.dim()
        )));
    }
    if x0.iter().any(|v| !v.is_finite()) {
        return Err(Error::Precondition("initial point must be finite".into()));
    }
    let steps = step_count(dt, horizon)?;
    let sqrt_dt = dt.sqrt();
    let mut rng = rng::path_stream(seed, index);
    let mut stepper = Stepper::new(model);
    let mut x = x0.to_vec();
    if visit(0, T::zero(), &x)?.is_break() {
        return Ok(PathEnd { exploded: None });
    }
    for j in 1..=steps {
        if let Err(reason) = stepper.step(model, &mut x, dt, sqrt_dt, &mut rng) {
            return Ok(PathEnd { exploded: Some(reason) });
        }
        if visit(j, T::lit(j as f64) * dt, &x)?.is_break() {
            break;
        }
    }
    Ok(PathEnd { exploded: None })
}

/// Full path from `x0`, using Brownian substream 0 of `seed`.
pub fn simulate_path<T: Scalar>(
    model: &SdeModel,
    x0: &Point<T>,
    dt: T,
    horizon: T,
    seed: u64,
) -> Result<SamplePath<T>> {
    simulate_path_indexed(model, x0, dt, horizon, seed, 0)
}

pub fn simulate_path_indexed<T: Scalar>(
    model: &SdeModel,
    x0: &Point<T>,
    dt: T,
    horizon: T,
    seed: u64,
    path_index: u64,
) -> Result<SamplePath<T>> {
    let mut times = Vec::new();
    let mut states = Vec::new();
    let end = run_path(model, x0, dt, horizon, seed, path_index, |_, t, x| {
        times.push(t);
        states.push(Point::from_vec_unchecked(x.to_vec()));
        Ok(ControlFlow::Continue(()))
    })?;
    Ok(SamplePath {
        model: model.name().to_string(),
        seed,
        path_index,
        dt,
        horizon,
        times,
        states,
        exploded: end.exploded.is_some(),
        explosion_reason: end.exploded,
    })
}

/// Terminal state of path `index` at time `horizon`.
pub(crate) fn endpoint<T: Scalar>(
    model: &SdeModel,
    x0: &[T],
    dt: T,
    horizon: T,
    seed: u64,
    index: u64,
) -> Result<Vec<T>> {
    let mut last = x0.to_vec();
    let end = run_path(model, x0, dt, horizon, seed, index, |_, _, x| {
        last.copy_from_slice(x);
        Ok(ControlFlow::Continue(()))
    })?;
    match end.exploded {
        Some(reason) => Err(Error::Precondition(format!("path {index} exploded: {reason}"))),
        None => Ok(last),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitEvent<T = f64> {
    /// Crossing time, linearly interpolated between the bracketing samples.
    pub time: T,
    /// State interpolated with the same weight as `time`.
    pub point: Point<T>,
    /// Index of the first sample with `h < 0`.
    pub step_index: usize,
}

fn interpolate_exit<T: Scalar>(
    step: usize,
    t_prev: T,
    t_cur: T,
    h_prev: T,
    h_cur: T,
    x_prev: &[T],
    x_cur: &[T],
) -> ExitEvent<T> {
    let theta = h_prev / (h_prev - h_cur);
    let point = x_prev.iter().zip(x_cur).map(|(&a, &b)| a + theta * (b - a)).collect();
    ExitEvent {
        time: t_prev + theta * (t_cur - t_prev),
        point: Point::from_vec_unchecked(point),
        step_index: step,
    }
}

/// First exit of `path` from `{h >= 0}`.
pub fn exit_time<T: Scalar>(path: &SamplePath<T>, h: &Expr) -> Result<Option<ExitEvent<T>>> {
    let mut prev: Option<T> = None;
    for (j, x) in path.states.iter().enumerate() {
        let hv = h.eval(x).map_err(|e| Error::eval_at(x, e))?;
        if hv < T::zero() {
            return Ok(Some(match prev {
                None => ExitEvent { time: path.times[0], point: x.clone(), step_index: 0 },
                Some(hp) => interpolate_exit(
                    j,
                    path.times[j - 1],
                    path.times[j],
                    hp,
                    hv,
                    &path.states[j - 1],
                    x,
                ),
            }));
        }
        prev = Some(hv);
    }
    Ok(None)
}

/// How initial conditions are chosen for [`estimate_invariance`].
#[derive(Debug, Clone, PartialEq)]
pub enum InitialCondition<T = f64> {
    Fixed(Point<T>),
    /// Uniform over `region ∩ {h >= 0}` by rejection from the region's bounding box.
    Uniform(Region),
}

const INIT_ATTEMPTS: usize = 100_000;

/// Start point of path `index`; uniform draws use sampler substream `index`.
pub fn draw_initial<T: Scalar>(
    init: &InitialCondition<T>,
    h: &Expr,
    seed: u64,
    index: u64,
) -> Result<Vec<T>> {
    match init {
        InitialCondition::Fixed(p) => {
            let hv = h.eval(p).map_err(|e| Error::eval_at(p, e))?;
            if hv < T::zero() {
                return Err(Error::Precondition(format!(
                    "initial point {:?} is outside C (h = {hv})",
                    p.to_f64()
                )));
            }
            Ok(p.to_vec())
        }
        InitialCondition::Uniform(region) => {
            let b = region.bounds();
            let mut r = rng::sampler_stream(seed, index);
            for _ in 0..INIT_ATTEMPTS {
                let x: Vec<T> = (0..b.dim())
                    .map(|a| rng::uniform::<T>(&mut r, b.min()[a], b.max()[a]))
                    .collect();
                if region.contains(&x) && matches!(h.eval(&x), Ok(v) if v >= T::zero()) {
                    return Ok(x);
                }
            }
            Err(Error::Precondition("could not sample an initial point in region ∩ C".into()))
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitTimeSummary<T = f64> {
    pub min: T,
    pub median: T,
    pub max: T,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExitStats<T = f64> {
    pub model: String,
    pub seed: u64,
    pub prng: String,
    pub n_paths: usize,
    pub n_exited: usize,
    /// Paths that exploded; each is also counted in `n_exited`.
    pub n_exploded: usize,
    pub empirical_exit_prob: f64,
    pub wilson_ci_95: (f64, f64),
    /// Over paths with an interpolated crossing (exploded paths excluded).
    pub exit_times: Option<ExitTimeSummary<T>>,
    pub horizon: T,
    pub dt: T,
    /// Finite-horizon wording of the result.
    pub evidence: String,
    pub exit_detection: String,
}

const Z_95: f64 = 1.959_963_984_540_054;

/// Wilson score interval for `k` successes out of `n`, clamped to `[0, 1]`.
pub fn wilson_interval(k: usize, n: usize) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (k, n) = (k as f64, n as f64);
    let p = k / n;
    let z2 = Z_95 * Z_95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z_95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    ((center - half).clamp(0.0, p), (center + half).clamp(p, 1.0))
}

enum PathOutcome<T> {
    Stayed,
    Exited(T),
    Exploded,
}

/// Runs `n_paths` independent paths and counts exits from `C = {h >= 0}`.
///
/// Path `i` uses Brownian substream `i`; with a uniform initial condition its
/// start point comes from sampler substream `i`. Exploded paths count as exits.
pub fn estimate_invariance<T: Scalar>(
    model: &SdeModel,
    h: &Expr,
    init: &InitialCondition<T>,
    n_paths: usize,
    dt: T,
    horizon: T,
    seed: u64,
) -> Result<ExitStats<T>> {
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    step_count(dt, horizon)?;
    let outcomes: Vec<PathOutcome<T>> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let x0 = draw_initial(init, h, seed, i)?;
            let mut prev: Option<(T, T, Vec<T>)> = None;
            let mut exit = None;
            let end = run_path(model, &x0, dt, horizon, seed, i, |j, t, x| {
                let hv = match h.eval(x) {
                    Ok(v) => v,
                    // undefined h means the state cannot be verified to lie in C
                    Err(_) => T::neg_infinity(),
                };
                if hv < T::zero() {
                    exit = Some(match &prev {
                        Some((tp, hp, xp)) if hv.is_finite() => {
                            interpolate_exit(j, *tp, t, *hp, hv, xp, x).time
                        }
                        _ => t,
                    });
                    return Ok(ControlFlow::Break(()));
                }
                prev = Some((t, hv, x.to_vec()));
                Ok(ControlFlow::Continue(()))
            })?;
            Ok(match (exit, end.exploded) {
                (Some(t), _) => PathOutcome::Exited(t),
                (None, Some(_)) => PathOutcome::Exploded,
                (None, None) => PathOutcome::Stayed,
            })
        })
        .collect::<Result<_>>()?;

    let mut times: Vec<T> = outcomes
        .iter()
        .filter_map(|o| match o {
            PathOutcome::Exited(t) => Some(*t),
            _ => None,
        })
        .collect();
    let n_exploded = outcomes.iter().filter(|o| matches!(o, PathOutcome::Exploded)).count();
    let n_exited = times.len() + n_exploded;
    times.sort_by(|a, b| a.partial_cmp(b).expect("finite exit times"));
    let exit_times = (!times.is_empty()).then(|| {
        let mid = times.len() / 2;
        let median = if times.len() % 2 == 1 {
            times[mid]
        } else {
            (times[mid - 1] + times[mid]) / T::lit(2.0)
        };
        ExitTimeSummary { min: times[0], median, max: times[times.len() - 1] }
    });
    let evidence = if n_exited == 0 {
        format!("no exit observed over horizon {horizon} with {n_paths} paths (finite-horizon evidence, not proof of invariance)")
    } else {
        format!("{n_exited} of {n_paths} paths left C within horizon {horizon}; invariance refuted empirically")
    };
    Ok(ExitStats {
        model: model.name().to_string(),
        seed,
        prng: rng::PRNG_ID.to_string(),
        n_paths,
        n_exited,
        n_exploded,
        empirical_exit_prob: n_exited as f64 / n_paths as f64,
        wilson_ci_95: wilson_interval(n_exited, n_paths),
        exit_times,
        horizon,
        dt,
        evidence,
        exit_detection: "first sample with h < 0, crossing time linearly interpolated; no Brownian-bridge correction (O(sqrt(dt)) bias)".into(),
    })
}
