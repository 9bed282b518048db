//! Numerical and empirical verification of stochastic zeroing barrier
//! functions (SZBF) for Itô SDEs `dx = b(x) dt + sum_k sigma_k(x) dw^k`.
//!
//! A candidate `h` defines the safe set `C = {h >= 0}`. The crate provides
//!
//! * a symbolic expression engine ([`Expr`]) for `b`, `sigma_k`, `h` and their derivatives,
//! * the infinitesimal generator `Lh` and the Itô decomposition of `dh` ([`generator`]),
//! * sampled checks of the SZBF, drift-only ZBF and Lemma 1 conditions ([`check`]),
//! * Euler–Maruyama simulation with exit statistics ([`simulate`]),
//! * the induced Lyapunov function `V_C` and a stability-in-probability profile ([`stability`]).
//!
//! Numeric routines are generic over [`Scalar`] (`f32` or `f64`); the
//! aliases at the crate root fix the scalar to `f64` or `f32`.

pub mod alpha;
pub mod check;
mod error;
pub mod expr;
pub mod generator;
pub mod model;
pub mod model_file;
pub mod point;
pub mod region;
pub mod rng;
pub mod sampling;
mod scalar;
pub mod simulate;
pub mod stability;

pub use alpha::{make_alpha, AlphaSpec, ClassKeFn};
pub use check::{
    check_lemma1, check_szbf, check_zbf_drift_only, CheckOptions, Conclusion, CouplingMode,
};
pub use error::{Error, Result};
pub use expr::{parse, Expr};
pub use generator::{apply_generator, diffusion_coupling, estimate_generator_mc, ito_decomposition, Generator};
pub use model::{estimate_growth_constant, estimate_lipschitz, validate, BarrierSpec, SdeModel};
pub use model_file::load_model;
pub use point::Point;
pub use region::{BoxRegion, Region};
pub use sampling::{Restriction, SamplingPlan};
pub use scalar::Scalar;
pub use simulate::{estimate_invariance, exit_time, simulate_path, InitialCondition};
pub use stability::{
    apply_generator_lyapunov, check_lyapunov_conditions, estimate_stability_profile, lyapunov_value,
};

pub type Point64 = Point<f64>;
pub type Point32 = Point<f32>;
pub type ItoDecomposition64 = generator::ItoDecomposition<f64>;
pub type ItoDecomposition32 = generator::ItoDecomposition<f32>;
pub type VerificationReport64 = check::VerificationReport<f64>;
pub type VerificationReport32 = check::VerificationReport<f32>;
pub type Lemma1Report64 = check::Lemma1Report<f64>;
pub type SamplePath64 = simulate::SamplePath<f64>;
pub type SamplePath32 = simulate::SamplePath<f32>;
pub type ExitStats64 = simulate::ExitStats<f64>;
pub type ExitStats32 = simulate::ExitStats<f32>;
pub type LyapunovReport64 = stability::LyapunovReport<f64>;
pub type LyapunovProfile64 = stability::LyapunovProfile<f64>;
