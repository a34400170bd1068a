//! Reproducible random streams keyed by `(master seed, path)`.
//!
//! A stream is a value: cloning it or handing it to another thread never
//! shares state. The generator behind a stream is ChaCha8, a counter-based
//! cipher, keyed by a SplitMix64 digest of the seed and the path. Two
//! different paths give unrelated keys, so replicate/region substreams can
//! be drawn in any order or on any thread and still reproduce bit-for-bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct RngStream {
    pub master_seed: u64,
    pub path: Vec<u64>,
}

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl RngStream {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: Vec::new(),
        }
    }

    /// Substream one level deeper.
    pub fn child(&self, index: u64) -> Self {
        let mut path = self.path.clone();
        path.push(index);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    /// Substream several levels deeper.
    pub fn descend(&self, indices: &[u64]) -> Self {
        let mut path = self.path.clone();
        path.extend_from_slice(indices);
        Self {
            master_seed: self.master_seed,
            path,
        }
    }

    fn key(&self) -> [u8; 32] {
        // Absorb seed, path length and every path element so that prefixes
        // and zero-padded paths never collide.
        let mut state = self.master_seed ^ 0x6A09_E667_F3BC_C908;
        let mut acc = splitmix64(&mut state);
        state ^= self.path.len() as u64;
        acc ^= splitmix64(&mut state);
        for &p in &self.path {
            state = state.rotate_left(23) ^ p.wrapping_mul(0xD6E8_FEB8_6659_FD93);
            acc = acc.rotate_left(17) ^ splitmix64(&mut state);
        }
        let mut key = [0u8; 32];
        let mut s = acc ^ state;
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut s).to_le_bytes());
        }
        key
    }

    /// Fresh generator positioned at the start of this stream.
    pub fn rng(&self) -> ChaCha8Rng {
        ChaCha8Rng::from_seed(self.key())
    }
}
