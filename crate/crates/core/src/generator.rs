//! Infinitesimal generator of the SDE acting on a barrier candidate `h`:
//!
//! ```text
//! Lh(x) = sum_i b^i dh/dx^i + 1/2 sum_{i,j} sum_k sigma_k^i sigma_k^j d2h/dx^i dx^j
//! dh(x_t) = Lh dt + sum_k (grad h . sigma_k) dw^k
//! ```
//!
//! Itô products `dt dt = 0`, `dt dw = 0`, `dw^j dw^k = delta_jk dt` are built
//! into the assembly; there is no Stratonovich variant.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{EvalError, Expr};
use crate::model::SdeModel;
use crate::point::Point;
use crate::scalar::{dot, Scalar};
use crate::simulate;

/// Symbolic gradient and Hessian of `h`, differentiated once and evaluated many times.
#[derive(Debug, Clone)]
pub struct BarrierDerivatives {
    h: Expr,
    grad: Vec<Expr>,
    /// Row-major `n x n`; entry `(i, j)` for `j < i` is a copy of `(j, i)`.
    hessian: Vec<Expr>,
    dim: usize,
}

impl BarrierDerivatives {
    pub fn new(h: &Expr, dim: usize) -> Result<Self> {
        if let Some(v) = h.max_var().filter(|&v| v >= dim) {
            return Err(Error::Model(format!("barrier references x{} but n = {dim}", v + 1)));
        }
        let grad: Vec<Expr> = (0..dim).map(|i| h.derivative(i)).collect();
        let mut hessian = vec![Expr::Const(0.0); dim * dim];
        for i in 0..dim {
            for j in i..dim {
                let d = grad[i].derivative(j);
                hessian[j * dim + i] = d.clone();
                hessian[i * dim + j] = d;
            }
        }
        Ok(BarrierDerivatives { h: h.clone(), grad, hessian, dim })
    }

    pub fn h(&self) -> &Expr {
        &self.h
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn gradient_exprs(&self) -> &[Expr] {
        &self.grad
    }

    pub fn hessian_expr(&self, i: usize, j: usize) -> &Expr {
        &self.hessian[i * self.dim + j]
    }

    pub fn value<T: Scalar>(&self, x: &[T]) -> Result<T, EvalError> {
        self.h.eval(x)
    }

    pub fn gradient<T: Scalar>(&self, x: &[T], out: &mut [T]) -> Result<(), EvalError> {
        for (o, g) in out.iter_mut().zip(&self.grad) {
            *o = g.eval(x)?;
        }
        Ok(())
    }
}

/// Everything the checkers need at one point, from a single evaluation pass.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalTerms<T> {
    pub h: T,
    pub grad: Vec<T>,
    pub drift: Vec<T>,
    /// `diffusion[k]` is the column `sigma_k(x)`.
    pub diffusion: Vec<Vec<T>>,
    /// `grad h . b`.
    pub first_order: T,
    /// `1/2 sum sigma sigma H`.
    pub second_order: T,
    /// Sum of the magnitudes of the individual second-order summands; scale for zero tests.
    pub second_order_scale: T,
    /// `grad h . sigma_k` for each channel.
    pub couplings: Vec<T>,
}

impl<T: Scalar> LocalTerms<T> {
    pub fn generator(&self) -> T {
        self.first_order + self.second_order
    }
}

/// `dh = drift_term dt + sum_k noise_coeffs[k] dw^k` at `point`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ItoDecomposition<T = f64> {
    pub drift_term: T,
    pub first_order: T,
    pub second_order: T,
    pub noise_coeffs: Vec<T>,
    pub point: Point<T>,
}

/// Generator of `model` applied to a fixed barrier.
#[derive(Debug, Clone)]
pub struct Generator<'a> {
    model: &'a SdeModel,
    derivs: BarrierDerivatives,
}

impl<'a> Generator<'a> {
    pub fn new(model: &'a SdeModel, h: &Expr) -> Result<Self> {
        Ok(Generator { model, derivs: BarrierDerivatives::new(h, model.dim())? })
    }

    pub fn model(&self) -> &SdeModel {
        self.model
    }

    pub fn derivatives(&self) -> &BarrierDerivatives {
        &self.derivs
    }

    fn check_dim<T>(&self, x: &[T]) -> Result<()> {
        if x.len() != self.model.dim() {
            return Err(Error::Precondition(format!(
                "point has dimension {}, model has {}",
                x.len(),
                self.model.dim()
            )));
        }
        Ok(())
    }

    /// Evaluates every generator ingredient at `x`.
    pub fn local_terms<T: Scalar>(&self, x: &[T]) -> Result<LocalTerms<T>> {
        self.check_dim(x)?;
        let n = self.model.dim();
        let m = self.model.noise_dim();
        let at = |e: EvalError| Error::eval_at(x, e);

        let h = self.derivs.value(x).map_err(at)?;
        let mut grad = vec![T::zero(); n];
        self.derivs.gradient(x, &mut grad).map_err(at)?;
        let mut drift = vec![T::zero(); n];
        self.model.drift_at(x, &mut drift).map_err(at)?;
        let mut diffusion = vec![vec![T::zero(); n]; m];
        for (k, col) in diffusion.iter_mut().enumerate() {
            self.model.diffusion_at(x, k, col).map_err(at)?;
        }

        let first_order = dot(&grad, &drift);
        let half = T::lit(0.5);
        let (mut second_order, mut second_order_scale) = (T::zero(), T::zero());
        for i in 0..n {
            for j in 0..n {
                let hij = self.derivs.hessian_expr(i, j);
                if hij.as_const() == Some(0.0) {
                    continue;
                }
                let hij = hij.eval(x).map_err(at)?;
                for col in &diffusion {
                    let term = half * col[i] * col[j] * hij;
                    second_order = second_order + term;
                    second_order_scale = second_order_scale + term.abs();
                }
            }
        }
        let couplings = diffusion.iter().map(|col| dot(&grad, col)).collect();
        Ok(LocalTerms {
            h,
            grad,
            drift,
            diffusion,
            first_order,
            second_order,
            second_order_scale,
            couplings,
        })
    }

    /// `Lh(x)`.
    pub fn apply<T: Scalar>(&self, x: &[T]) -> Result<T> {
        Ok(self.local_terms(x)?.generator())
    }

    /// `grad h(x) . sigma_k(x)` for zero-based channel `k`.
    pub fn coupling<T: Scalar>(&self, x: &[T], k: usize) -> Result<T> {
        if k >= self.model.noise_dim() {
            return Err(Error::Precondition(format!(
                "channel {} out of range 1..={}",
                k + 1,
                self.model.noise_dim()
            )));
        }
        Ok(self.local_terms(x)?.couplings[k])
    }

    pub fn decompose<T: Scalar>(&self, p: &Point<T>) -> Result<ItoDecomposition<T>> {
        let t = self.local_terms(p)?;
        Ok(ItoDecomposition {
            drift_term: t.generator(),
            first_order: t.first_order,
            second_order: t.second_order,
            noise_coeffs: t.couplings,
            point: p.clone(),
        })
    }
}

/// `Lh(p)` for a one-off evaluation; build a [`Generator`] when evaluating at many points.
pub fn apply_generator<T: Scalar>(model: &SdeModel, h: &Expr, p: &Point<T>) -> Result<T> {
    Generator::new(model, h)?.apply(p)
}

/// `grad h(p) . sigma_k(p)` for zero-based channel `k`.
pub fn diffusion_coupling<T: Scalar>(model: &SdeModel, h: &Expr, p: &Point<T>, k: usize) -> Result<T> {
    Generator::new(model, h)?.coupling(p, k)
}

pub fn ito_decomposition<T: Scalar>(model: &SdeModel, h: &Expr, p: &Point<T>) -> Result<ItoDecomposition<T>> {
    Generator::new(model, h)?.decompose(p)
}

/// Monte Carlo estimate of `(E[h(x_t)] - h(p)) / t` from Euler–Maruyama paths.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeneratorEstimate<T = f64> {
    pub estimate: T,
    pub std_error: T,
    pub n_paths: usize,
    pub t: T,
    pub dt: T,
    pub seed: u64,
}

/// Difference-quotient estimate of `Lh(p)`, independent of the symbolic assembly.
pub fn estimate_generator_mc<T: Scalar>(
    model: &SdeModel,
    h: &Expr,
    p: &Point<T>,
    t: T,
    n_paths: usize,
    dt: T,
    seed: u64,
) -> Result<GeneratorEstimate<T>> {
    if n_paths == 0 {
        return Err(Error::Precondition("n_paths must be at least 1".into()));
    }
    if !(dt > T::zero() && dt <= t) {
        return Err(Error::Precondition("need 0 < dt <= t".into()));
    }
    let h0 = h.eval(p).map_err(|e| Error::eval_at(p, e))?;
    let mut diffs = Vec::with_capacity(n_paths);
    for i in 0..n_paths {
        let end = simulate::endpoint(model, p, dt, t, seed, i as u64)?;
        let ht = h.eval(&end).map_err(|e| Error::eval_at(&end, e))?;
        diffs.push(ht - h0);
    }
    let count = T::lit(n_paths as f64);
    let mean = diffs.iter().copied().sum::<T>() / count;
    let var = if n_paths > 1 {
        diffs.iter().map(|&d| (d - mean) * (d - mean)).sum::<T>() / T::lit((n_paths - 1) as f64)
    } else {
        T::zero()
    };
    Ok(GeneratorEstimate {
        estimate: mean / t,
        std_error: (var / count).sqrt() / t,
        n_paths,
        t,
        dt,
        seed,
    })
}
