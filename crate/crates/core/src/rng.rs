//! Seeded randomness.
//!
//! Every random draw in the crate goes through [`Rng`], a ChaCha8 stream
//! cipher keyed from a 64-bit [`Seed`]. The 32-byte key is the little-endian
//! concatenation of four successive SplitMix64 outputs starting from the
//! seed (increment `0x9E37_79B9_7F4A_7C15`, multipliers
//! `0xBF58_476D_1CE4_E5B9` and `0x94D0_49BB_1331_11EB`). Child seeds for
//! per-item streams are derived by folding indices through the same mixer, so
//! item `i` draws the same values whether items run sequentially or in
//! parallel.

use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub type Rng = ChaCha8Rng;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(GOLDEN);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Seed(pub u64);

impl Seed {
    pub fn rng(self) -> Rng {
        let mut state = self.0;
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
        }
        ChaCha8Rng::from_seed(key)
    }

    /// Seed for the sub-stream identified by `path` (e.g. table index, row index).
    pub fn child(self, path: &[u64]) -> Seed {
        let mut state = self.0;
        let mut out = splitmix64(&mut state);
        for &p in path {
            let mut s = out ^ p.wrapping_mul(GOLDEN);
            out = splitmix64(&mut s);
        }
        Seed(out)
    }

    /// Draws a fresh seed from a generator (used to hand seeds to sub-tasks).
    pub fn draw(rng: &mut Rng) -> Seed {
        Seed(rng.gen())
    }
}

impl From<u64> for Seed {
    fn from(v: u64) -> Self {
        Seed(v)
    }
}

/// Uniform integer in `lo..=hi`. Always samples through `u64` so results do
/// not depend on the platform's pointer width.
pub fn uniform(rng: &mut Rng, lo: usize, hi: usize) -> usize {
    debug_assert!(lo <= hi);
    rng.gen_range(lo as u64..=hi as u64) as usize
}

/// Uniform index in `0..n`.
pub fn index(rng: &mut Rng, n: usize) -> usize {
    debug_assert!(n > 0);
    rng.gen_range(0..n as u64) as usize
}

/// `amount` distinct indices from `0..n`, in draw order (partial Fisher-Yates
/// over a sparse map, so `n` may be large).
pub fn sample_distinct(rng: &mut Rng, n: u64, amount: usize) -> Vec<u64> {
    debug_assert!(amount as u64 <= n);
    let mut swapped = std::collections::HashMap::new();
    let mut out = Vec::with_capacity(amount);
    for i in 0..amount as u64 {
        let j = rng.gen_range(i..n);
        let vj = *swapped.get(&j).unwrap_or(&j);
        let vi = *swapped.get(&i).unwrap_or(&i);
        swapped.insert(j, vi);
        out.push(vj);
    }
    out
}
