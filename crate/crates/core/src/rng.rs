//! Counter-based random streams.
//!
//! Every consumer of randomness draws from a ChaCha8 stream selected by the
//! run seed, a purpose tag and a tuple of loop counters. Draws therefore
//! depend only on where they happen in the loop structure, never on thread
//! scheduling or on how many values other consumers took.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Init = 1,
    Shuffle = 2,
    Sampling = 3,
    Noise = 4,
    Dropout = 5,
    Synth = 6,
    Cluster = 7,
    Simulate = 8,
    Head = 9,
}

fn splitmix(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Generator for `(seed, purpose, counters)`.
pub fn stream(seed: u64, purpose: Stream, counters: &[u64]) -> ChaCha8Rng {
    let mut id = splitmix(purpose as u64);
    for &c in counters {
        id = splitmix(id ^ c);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}
