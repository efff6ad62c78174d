//! Seed derivation. Every consumer of randomness draws from its own ChaCha
//! stream keyed by the master seed, so changing one part of a run (say the
//! epoch count) leaves every other stream untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Stream {
    Instance = 1,
    TrainData = 2,
    TestData = 3,
    MaskModel = 4,
    RffBanks = 5,
    WeightInit = 6,
    PredictorInit = 7,
    Shuffle = 8,
    Calibration = 9,
}

/// Rng for `stream`, sub-indexed by `index` (e.g. the test level or seed replicate).
pub fn stream_rng(master_seed: u64, stream: Stream, index: u32) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(((stream as u64) << 32) | index as u64);
    rng
}

pub fn seeded(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
