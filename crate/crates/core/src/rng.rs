//! Reproducible random streams.
//!
//! Every parallel unit of work (a document, an input location, a GP output)
//! draws from its own lane, keyed by `(seed, chain, sweep, lane)`. Results are
//! therefore independent of how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type LaneRng = ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives the stream for one lane of one sweep of one chain.
pub fn lane_rng(seed: u64, chain: u64, sweep: u64, lane: u64) -> LaneRng {
    let mut state = seed;
    let mut key = [0u8; 32];
    for (i, word) in [chain, sweep, 0x5EED, 0x1A4E].into_iter().enumerate() {
        state = state.wrapping_add(word.wrapping_mul(0xD6E8_FEB8_6659_FD93));
        let v = splitmix64(&mut state);
        key[i * 8..(i + 1) * 8].copy_from_slice(&v.to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(lane);
    rng
}

/// Cheap source of per-sweep keys for a single chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Lanes {
    pub seed: u64,
    pub chain: u64,
}

impl Lanes {
    pub fn new(seed: u64, chain: u64) -> Self {
        Self { seed, chain }
    }

    pub fn rng(&self, sweep: u64, lane: u64) -> LaneRng {
        lane_rng(self.seed, self.chain, sweep, lane)
    }
}
