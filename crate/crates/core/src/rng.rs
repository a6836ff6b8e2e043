//! Keyed random substreams.
//!
//! Every stochastic step (a covariate's permutation test, a split
//! candidate's test, a simulation replicate) draws from its own ChaCha8
//! stream whose seed is derived from the run seed and a key path. Two runs
//! with the same seed therefore produce identical draws no matter in which
//! order, or on how many threads, the steps execute.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Purpose tags mixed into a key path so that unrelated consumers sharing a
/// parent key never collide.
pub mod tag {
    pub const SELECT: u64 = 0x5e_1ec7;
    pub const SPLIT_CANDIDATE: u64 = 0x5b_1175;
    pub const COMPONENT: u64 = 0xc0_3b0;
    pub const LEFT: u64 = 0x1ef7;
    pub const RIGHT: u64 = 0x5167;
    pub const REPLICATE: u64 = 0x5e_b11c;
    pub const ROOT: u64 = 0x5007;
    pub const DATA: u64 = 0xda7a;
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// A position in the tree of random substreams.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Streams {
    seed: u64,
    key: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed, key: tag::ROOT }
    }

    /// Derives the substream for `(tag, index)` below this one.
    pub fn child(&self, tag: u64, index: u64) -> Self {
        let mut state = self.key ^ self.seed.rotate_left(17);
        let a = splitmix64(&mut state);
        let mut state = a ^ tag.wrapping_mul(0xd6e8_feb8_6659_fd93);
        let b = splitmix64(&mut state);
        let mut state = b ^ index.wrapping_mul(0xa076_1d64_78bd_642f);
        Self { seed: self.seed, key: splitmix64(&mut state) }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// A fresh generator positioned at the start of this substream.
    pub fn rng(&self) -> StreamRng {
        let mut state = self.key ^ self.seed;
        let mut bytes = [0u8; 32];
        for chunk in bytes.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(bytes)
    }
}
