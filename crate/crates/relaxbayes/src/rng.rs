//! Counter-based random streams.
//!
//! Every stream is a ChaCha8 generator keyed by the run seed, selected by the
//! optimizer step (stream id) and positioned by the split index, so that the
//! noise drawn for `(seed, step, k)` does not depend on evaluation order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

const SPLIT_STRIDE: u128 = 1 << 48;

/// Stream for optimizer step `step` and split `k` of run `seed`.
pub fn stream(seed: u64, step: u64, k: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(step);
    rng.set_word_pos(k as u128 * SPLIT_STRIDE);
    rng
}

/// Plain seeded generator for data generation and sampling outside the optimizer.
pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn normal_vec<R: rand::Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<f64> {
    (0..n).map(|_| StandardNormal.sample(rng)).collect()
}

pub fn normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}
