//! Seed derivation.
//!
//! Every stochastic routine takes a `u64` seed. Independent sub-streams
//! (Monte-Carlo trials, few-shot tasks, support draws) use the ChaCha stream
//! selector: stream `k` of a seed is the generator for counter `k`. Growing the
//! number of trials therefore never changes the draws of earlier trials.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The root generator for `seed`.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Generator for sub-stream `counter` of `seed`.
pub fn stream(seed: u64, counter: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(counter);
    rng
}

/// Packs two counters into one stream id (`hi` in the upper 32 bits).
pub fn stream2(seed: u64, hi: u32, lo: u32) -> ChaCha8Rng {
    stream(seed, (u64::from(hi) << 32) | u64::from(lo))
}
