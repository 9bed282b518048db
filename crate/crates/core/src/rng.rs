//! Reproducible random streams.
//!
//! Every stream is a ChaCha8 keystream keyed by the user seed; the 64-bit
//! ChaCha stream id selects an independent substream. Path `i` of a
//! simulation uses stream `i`; samplers and estimators use stream ids with
//! the top bits set so they never collide with path streams. Gaussian
//! variates come from the ziggurat sampler of `rand_distr::StandardNormal`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::scalar::Scalar;

/// Identifier echoed into every randomized report.
pub const PRNG_ID: &str = "ChaCha8 (rand_chacha 0.9) stream-per-path; normals: rand_distr 0.5 StandardNormal ziggurat";

const SAMPLER_TAG: u64 = 0x8000_0000_0000_0000;
const ESTIMATOR_TAG: u64 = 0xC000_0000_0000_0000;

pub type StreamRng = ChaCha8Rng;

fn stream(seed: u64, id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Brownian substream for simulation path `index`.
pub fn path_stream(seed: u64, index: u64) -> StreamRng {
    stream(seed, index & !ESTIMATOR_TAG)
}

/// Stream used by point samplers (sampling plans, initial-condition draws).
pub fn sampler_stream(seed: u64, channel: u64) -> StreamRng {
    stream(seed, SAMPLER_TAG | (channel & !ESTIMATOR_TAG))
}

/// Stream for chunk `chunk` of a sample-count-extensible estimator.
pub fn estimator_stream(seed: u64, chunk: u64) -> StreamRng {
    stream(seed, ESTIMATOR_TAG | chunk)
}

pub fn standard_normal<T: Scalar>(rng: &mut StreamRng) -> T {
    let z: f64 = StandardNormal.sample(rng);
    T::lit(z)
}

pub fn uniform<T: Scalar>(rng: &mut StreamRng, lo: f64, hi: f64) -> T {
    use rand::Rng;
    let u: f64 = rng.random();
    T::lit(lo + (hi - lo) * u)
}
