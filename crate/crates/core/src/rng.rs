//! Seeded randomness. Every component draws from its own ChaCha stream
//! derived from the run seed, so adding draws in one place never shifts
//! another component's sequence.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// Stream identifiers for the components that consume randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Split = 1,
    /// Factorization and stand-alone tensor initialization.
    Init = 2,
    /// Factorization mini-batch order.
    Shuffle = 3,
    Synth = 4,
    Clicks = 5,
    UserInit = 6,
    ItemInit = 7,
    UserShuffle = 8,
    ItemShuffle = 9,
}

pub fn rng_for(seed: u64, stream: Stream) -> Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
