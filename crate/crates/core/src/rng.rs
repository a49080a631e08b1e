//! Seed derivation. Every random draw in the crate comes from a ChaCha8
//! stream keyed by the user seed and a purpose tag, so independent consumers
//! (weight init, shuffling, augmentation) never share a sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const INIT: u64 = 0x696e_6974;
pub const SHUFFLE: u64 = 0x7368_7566;
pub const SPLIT: u64 = 0x7370_6c74;
pub const AUGMENT: u64 = 0x6175_676d;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for `(seed, purpose)` positioned on counter stream `stream`.
pub fn derive(seed: u64, purpose: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(purpose)));
    rng.set_stream(stream);
    rng
}

/// Per-sample augmentation stream for `(seed, epoch, sample_index)`.
pub fn per_sample(seed: u64, epoch: u32, sample_index: u32) -> ChaCha8Rng {
    derive(seed, AUGMENT, (u64::from(epoch) << 32) | u64::from(sample_index))
}
