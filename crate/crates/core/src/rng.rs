//! Seeded random streams.
//!
//! Every consumer draws from a ChaCha20 generator keyed by the run seed and a
//! 64-bit stream id, so per-path or per-point streams are independent of each
//! other and of the order in which they are consumed. Gaussian variates use
//! the ziggurat sampler behind `rand_distr::StandardNormal` (rand_distr 0.5).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;

/// Stream-id namespaces, so different consumers of one seed never collide.
pub mod domain {
    pub const BROWNIAN: u64 = 1 << 56;
    pub const INITIAL_PATH: u64 = 2 << 56;
    pub const NET_INIT: u64 = 3 << 56;
    pub const MINIBATCH: u64 = 4 << 56;
    pub const SBO: u64 = 5 << 56;
    pub const GAUSSIAN_OFFSET: u64 = 6 << 56;
    pub const INJECT: u64 = 7 << 56;
    pub const BOUND_SAMPLES: u64 = 8 << 56;
}

pub fn stream(seed: u64, stream_id: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream_id);
    rng
}

#[inline]
pub fn standard_normal<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}
