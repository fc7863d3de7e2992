//! Seeded random streams.
//!
//! Every consumer (data sampling, minibatch shuffling, network init, generator
//! noise, ...) draws from its own ChaCha8 stream keyed by the same seed, so
//! adding draws to one consumer never shifts another. ChaCha8 output is
//! specified bit for bit, so streams agree across platforms.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Logical consumers of randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Data = 1,
    Minibatch = 2,
    NetInit = 3,
    GeneratorNoise = 4,
    PairSampling = 5,
    Calibration = 6,
    Aux = 7,
}

pub fn substream(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

/// SplitMix64 finalizer.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for trial `k` of an experiment with `master` seed.
pub fn trial_seed(master: u64, trial: u64) -> u64 {
    splitmix64(master ^ splitmix64(trial.wrapping_add(1)))
}
