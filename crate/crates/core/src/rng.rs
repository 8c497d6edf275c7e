//! Counter-based seeding: every random stream is addressed by
//! `(base_seed, trial, purpose)` so results never depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps the field and detector noise of one
/// trial independent.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    FieldNoise = 0,
    DetectorNoise = 1,
    ReferencePhase = 2,
    Ramsey = 3,
    Misc = 4,
}

const PURPOSES: u64 = 8;

pub fn stream(base_seed: u64, trial: u64, purpose: Purpose) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial.wrapping_mul(PURPOSES).wrapping_add(purpose as u64));
    rng
}

/// Seed for trial `trial` of an ensemble, usable as a fresh `base_seed`.
pub fn trial_seed(base_seed: u64, trial: u64) -> u64 {
    // splitmix64 finaliser over the pair
    let mut z = base_seed ^ trial.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
