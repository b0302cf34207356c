//! Counter-based random substreams.
//!
//! Every random draw in a campaign comes from a ChaCha stream keyed by
//! `(campaign seed, iteration, purpose, index)`. Draws therefore do not
//! depend on evaluation order or thread count, and two cells that share an
//! iteration see the same users, schedules and loss realisations.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

/// What a substream is used for. Distinct purposes never share draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
#[repr(u64)]
pub enum Purpose {
    Drop = 1,
    Reseed = 2,
    Heading = 3,
    Schedule = 4,
    LossEstimation = 5,
    LossTransmission = 6,
}

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed of one Monte Carlo iteration.
pub fn iteration_seed(campaign_seed: u64, iteration: u32) -> u64 {
    mix64(campaign_seed ^ mix64(0x6974_6572 ^ u64::from(iteration)))
}

/// Independent stream for `(purpose, index)` under an iteration seed.
pub fn substream(seed: u64, purpose: Purpose, index: u64) -> SimRng {
    let key = mix64(seed ^ mix64((purpose as u64) << 56 ^ mix64(index)));
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(purpose as u64);
    rng
}
