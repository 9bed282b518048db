//! The Itô SDE `dx = b(x) dt + sum_k sigma_k(x) dw^k` and its regularity diagnostics.

use serde::{Deserialize, Serialize};

use crate::alpha::AlphaSpec;
use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr};
use crate::region::Region;
use crate::rng;
use crate::scalar::{norm_sq, Scalar};

#[derive(Debug, Clone, PartialEq)]
pub struct SdeModel {
    name: String,
    dim: usize,
    drift: Vec<Expr>,
    /// `diffusion[k][i]` is component `i` of noise column `sigma_k`.
    diffusion: Vec<Vec<Expr>>,
}

impl SdeModel {
    /// Builds a model from the drift vector and the noise columns.
    pub fn new(name: impl Into<String>, drift: Vec<Expr>, diffusion: Vec<Vec<Expr>>) -> Result<Self> {
        let dim = drift.len();
        if dim == 0 {
            return Err(Error::Model("state dimension must be at least 1".into()));
        }
        if diffusion.is_empty() {
            return Err(Error::Model("noise dimension must be at least 1".into()));
        }
        for (k, col) in diffusion.iter().enumerate() {
            if col.len() != dim {
                return Err(Error::Model(format!(
                    "diffusion column sigma{} has {} entries, expected {dim}",
                    k + 1,
                    col.len()
                )));
            }
        }
        let out_of_range = drift
            .iter()
            .chain(diffusion.iter().flatten())
            .filter_map(Expr::max_var)
            .find(|&v| v >= dim);
        if let Some(v) = out_of_range {
            return Err(Error::Model(format!("expression references x{} but n = {dim}", v + 1)));
        }
        Ok(SdeModel { name: name.into(), dim, drift, diffusion })
    }

    /// Parses the drift and diffusion columns from text.
    pub fn from_strs(name: &str, drift: &[&str], diffusion: &[&[&str]]) -> Result<Self> {
        let n = drift.len();
        let drift = drift.iter().map(|s| crate::parse(s, n.max(1))).collect::<Result<_, _>>()?;
        let diffusion = diffusion
            .iter()
            .map(|col| col.iter().map(|s| crate::parse(s, n.max(1))).collect::<Result<_, _>>())
            .collect::<Result<_, _>>()?;
        Self::new(name, drift, diffusion)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn set_name(&mut self, name: impl Into<String>) {
        self.name = name.into();
    }

    /// State dimension `n`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Noise dimension `m`.
    pub fn noise_dim(&self) -> usize {
        self.diffusion.len()
    }

    pub fn drift(&self) -> &[Expr] {
        &self.drift
    }

    pub fn diffusion_column(&self, k: usize) -> &[Expr] {
        &self.diffusion[k]
    }

    pub fn diffusion_columns(&self) -> &[Vec<Expr>] {
        &self.diffusion
    }

    pub fn drift_at<T: Scalar>(&self, x: &[T], out: &mut [T]) -> Result<(), EvalError> {
        for (o, e) in out.iter_mut().zip(&self.drift) {
            *o = e.eval(x)?;
        }
        Ok(())
    }

    pub fn diffusion_at<T: Scalar>(&self, x: &[T], k: usize, out: &mut [T]) -> Result<(), EvalError> {
        for (o, e) in out.iter_mut().zip(&self.diffusion[k]) {
            *o = e.eval(x)?;
        }
        Ok(())
    }

    /// The same model with every diffusion entry replaced by zero.
    pub fn drift_only(&self) -> SdeModel {
        let zeros = vec![vec![Expr::Const(0.0); self.dim]; self.noise_dim()];
        SdeModel { diffusion: zeros, ..self.clone() }
    }
}

/// Safe-set description attached to a model: barrier `h`, class-K_e function and domain `D`.
#[derive(Debug, Clone, PartialEq)]
pub struct BarrierSpec {
    pub h: Expr,
    pub alpha: AlphaSpec,
    pub domain: Region,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Severity {
    Warn,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub message: String,
}

/// Checks the origin conditions `b(0) = 0`, `sigma_k(0) = 0` and that every
/// coefficient evaluates at `center`.
pub fn validate(model: &SdeModel, center: &[f64], tol: f64) -> Vec<Diagnostic> {
    let mut out = Vec::new();
    let origin = vec![0.0; model.dim()];
    let mut warn_origin = |label: String, e: &Expr| match e.eval::<f64>(&origin) {
        Ok(v) if v.abs() > tol => out.push(Diagnostic {
            severity: Severity::Warn,
            message: format!("{label}(0) = {v} != 0"),
        }),
        Ok(_) => {}
        Err(err) => out.push(Diagnostic {
            severity: Severity::Warn,
            message: format!("{label}(0) undefined: {err}"),
        }),
    };
    for (i, e) in model.drift().iter().enumerate() {
        warn_origin(format!("b^{}", i + 1), e);
    }
    for (k, col) in model.diffusion_columns().iter().enumerate() {
        for (i, e) in col.iter().enumerate() {
            warn_origin(format!("sigma_{}^{}", k + 1, i + 1), e);
        }
    }
    let labelled = model
        .drift()
        .iter()
        .enumerate()
        .map(|(i, e)| (format!("b^{}", i + 1), e))
        .chain(model.diffusion_columns().iter().enumerate().flat_map(|(k, col)| {
            col.iter().enumerate().map(move |(i, e)| (format!("sigma_{}^{}", k + 1, i + 1), e))
        }));
    for (label, e) in labelled {
        if let Err(err) = e.eval(center) {
            out.push(Diagnostic {
                severity: Severity::Error,
                message: format!("{label} fails at domain center {center:?}: {err}"),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RegularityKind {
    Growth,
    Lipschitz,
}

/// Sampled lower bound on a linear-growth or Lipschitz constant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityEstimate {
    pub kind: RegularityKind,
    /// Largest observed ratio; a lower bound on the best constant.
    pub constant_l: f64,
    pub num_samples: usize,
    /// The sample (growth) or the pair of samples (Lipschitz) attaining the maximum.
    pub witness: Vec<Vec<f64>>,
    pub seed: u64,
}

const ESTIMATOR_CHUNK: usize = 4096;

/// Sample `j` of the estimator sequence for `seed` is fixed regardless of how
/// many samples are requested, so the running maximum is monotone in `count`.
fn domain_sample_sequence(
    domain: &Region,
    count: usize,
    per_sample: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>> {
    let bounds = domain.bounds();
    let n = bounds.dim();
    let mut out = Vec::with_capacity(count);
    let chunks = count.div_ceil(ESTIMATOR_CHUNK);
    for c in 0..chunks {
        let mut r = rng::estimator_stream(seed, c as u64);
        let take = ESTIMATOR_CHUNK.min(count - c * ESTIMATOR_CHUNK);
        for _ in 0..take {
            let mut sample = Vec::with_capacity(n * per_sample);
            for _ in 0..per_sample {
                let mut tries = 0usize;
                loop {
                    let x: Vec<f64> = (0..n)
                        .map(|a| rng::uniform::<f64>(&mut r, bounds.min()[a], bounds.max()[a]))
                        .collect();
                    if domain.contains(&x) {
                        sample.extend(x);
                        break;
                    }
                    tries += 1;
                    if tries > 100_000 {
                        return Err(Error::Precondition(
                            "domain has negligible volume inside its bounding box".into(),
                        ));
                    }
                }
            }
            out.push(sample);
        }
    }
    Ok(out)
}

/// Largest observed `(|b|^2 + sum_k |sigma_k|^2) / (1 + |x|^2)` over `samples` draws from `domain`.
pub fn estimate_growth_constant(
    model: &SdeModel,
    domain: &Region,
    samples: usize,
    seed: u64,
) -> Result<RegularityEstimate> {
    if samples == 0 {
        return Err(Error::Precondition("samples must be at least 1".into()));
    }
    let n = model.dim();
    let mut buf = vec![0.0; n];
    let mut best = (0.0, Vec::new());
    for x in domain_sample_sequence(domain, samples, 1, seed)? {
        let mut total = 0.0;
        model.drift_at(&x, &mut buf).map_err(|e| Error::eval_at(&x, e))?;
        total += norm_sq(&buf);
        for k in 0..model.noise_dim() {
            model.diffusion_at(&x, k, &mut buf).map_err(|e| Error::eval_at(&x, e))?;
            total += norm_sq(&buf);
        }
        let ratio = total / (1.0 + norm_sq(&x));
        if ratio > best.0 || best.1.is_empty() {
            best = (ratio, x);
        }
    }
    Ok(RegularityEstimate {
        kind: RegularityKind::Growth,
        constant_l: best.0,
        num_samples: samples,
        witness: vec![best.1],
        seed,
    })
}

/// Largest observed `(|b(x)-b(y)| + sum_k |sigma_k(x)-sigma_k(y)|) / |x-y|` over sampled pairs.
pub fn estimate_lipschitz(
    model: &SdeModel,
    domain: &Region,
    pairs: usize,
    seed: u64,
) -> Result<RegularityEstimate> {
    if pairs == 0 {
        return Err(Error::Precondition("pairs must be at least 1".into()));
    }
    let n = model.dim();
    let (mut bx, mut by) = (vec![0.0; n], vec![0.0; n]);
    let mut best = (0.0, Vec::new());
    for pair in domain_sample_sequence(domain, pairs, 2, seed)? {
        let (x, y) = pair.split_at(n);
        let sep: Vec<f64> = x.iter().zip(y).map(|(a, b)| a - b).collect();
        let dist = norm_sq(&sep).sqrt();
        if dist == 0.0 {
            continue;
        }
        let diff_norm = |bx: &[f64], by: &[f64]| {
            bx.iter().zip(by).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
        };
        model.drift_at(x, &mut bx).map_err(|e| Error::eval_at(x, e))?;
        model.drift_at(y, &mut by).map_err(|e| Error::eval_at(y, e))?;
        let mut total = diff_norm(&bx, &by);
        for k in 0..model.noise_dim() {
            model.diffusion_at(x, k, &mut bx).map_err(|e| Error::eval_at(x, e))?;
            model.diffusion_at(y, k, &mut by).map_err(|e| Error::eval_at(y, e))?;
            total += diff_norm(&bx, &by);
        }
        let ratio = total / dist;
        if ratio > best.0 || best.1.is_empty() {
            best = (ratio, pair);
        }
    }
    let witness = if best.1.is_empty() {
        Vec::new()
    } else {
        vec![best.1[..n].to_vec(), best.1[n..].to_vec()]
    };
    Ok(RegularityEstimate {
        kind: RegularityKind::Lipschitz,
        constant_l: best.0,
        num_samples: pairs,
        witness,
        seed,
    })
}
