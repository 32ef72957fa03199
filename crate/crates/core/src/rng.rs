//! Seeded random streams.
//!
//! Every run owns one seed. Independent consumers (training draws, reward
//! batches, simulator noise, simulator construction) read from separate
//! ChaCha streams of that seed, so adding draws to one consumer never shifts
//! another.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type RunRng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Training = 0,
    RewardBatches = 1,
    WorldNoise = 2,
    WorldInit = 3,
}

pub fn stream(seed: u64, which: Stream) -> RunRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(which as u64);
    rng
}

/// SplitMix64 finalizer. Used for stateless per-example hashing.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Maps a hash to a uniform value in `[-1, 1)`.
pub fn unit_symmetric(h: u64) -> f64 {
    // 53 high bits -> [0, 1)
    let u = (h >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
    2.0 * u - 1.0
}
