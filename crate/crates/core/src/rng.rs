//! Random streams.
//!
//! Every replication gets its own generator, seeded from the experiment's
//! master seed and the replication index, so results do not depend on which
//! worker runs which replication or in what order.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Seedable deterministic generator used for data generation and sampling.
pub type StreamRng = ChaCha8Rng;

/// Stream id used for MCMC draws; data generation uses stream 0.
const CHAIN_STREAM: u64 = 1;

/// Minimal contract the simulation code relies on.
pub trait RandomSource {
    /// Uniform on `[0, 1)`.
    fn next_uniform(&mut self) -> f64;
    /// Standard normal.
    fn next_gaussian(&mut self) -> f64;
}

impl<R: Rng + ?Sized> RandomSource for R {
    #[inline]
    fn next_uniform(&mut self) -> f64 {
        self.random::<f64>()
    }

    #[inline]
    fn next_gaussian(&mut self) -> f64 {
        self.sample(StandardNormal)
    }
}

/// Generator for synthetic data of one replication.
pub fn data_stream(seed: u64) -> StreamRng {
    StreamRng::seed_from_u64(seed)
}

/// Generator for the MCMC chain; independent of [`data_stream`] for the same seed.
pub fn chain_stream(seed: u64) -> StreamRng {
    let mut rng = StreamRng::seed_from_u64(seed);
    rng.set_stream(CHAIN_STREAM);
    rng
}

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for replication `rep` (1-based) of an experiment.
///
/// Each step (odd multiply, xor with the master, finaliser) is a bijection
/// on `u64`, so the map is injective in `rep` for a fixed master seed.
pub fn derive_seed(master_seed: u64, rep: u64) -> u64 {
    splitmix64(master_seed ^ rep.wrapping_mul(0x9e37_79b9_7f4a_7c15))
}
