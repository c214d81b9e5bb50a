//! Counter-based random streams.
//!
//! Every random draw in the library comes from a [`SeedSpec`]: a master seed
//! plus a four-component path `(trial, fold, i, j)`. The path is hashed
//! together with the master seed into a 256-bit ChaCha key, so sibling paths
//! give independent streams and a given path can be replayed in isolation,
//! regardless of the order in which other streams were consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// Random generator handed out by [`SeedSpec::rng`].
pub type StreamRng = ChaCha12Rng;

/// Master seed plus the derivation path of one random stream.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct SeedSpec {
    pub master_seed: u64,
    /// `(trial, fold, i, j)`.
    pub path: [u64; 4],
}

impl SeedSpec {
    pub fn new(master_seed: u64) -> Self {
        Self {
            master_seed,
            path: [0; 4],
        }
    }

    pub fn at(self, trial: u64, fold: u64, i: u64, j: u64) -> Self {
        Self {
            path: [trial, fold, i, j],
            ..self
        }
    }

    pub fn with_trial(mut self, trial: u64) -> Self {
        self.path[0] = trial;
        self
    }

    pub fn with_fold(mut self, fold: u64) -> Self {
        self.path[1] = fold;
        self
    }

    pub fn with_i(mut self, i: u64) -> Self {
        self.path[2] = i;
        self
    }

    pub fn with_j(mut self, j: u64) -> Self {
        self.path[3] = j;
        self
    }

    /// 256-bit key of this stream.
    pub fn key(&self) -> [u8; 32] {
        let mut state = splitmix64(self.master_seed ^ 0x5eed_5eed_5eed_5eed);
        for (k, &p) in self.path.iter().enumerate() {
            state = splitmix64(state ^ splitmix64(p.wrapping_add((k as u64 + 1) << 56)));
        }
        let mut key = [0u8; 32];
        for chunk in key.chunks_exact_mut(8) {
            state = splitmix64(state);
            chunk.copy_from_slice(&state.to_le_bytes());
        }
        key
    }

    pub fn rng(&self) -> StreamRng {
        StreamRng::from_seed(self.key())
    }
}

impl core::fmt::Display for SeedSpec {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        let [t, k, i, j] = self.path;
        write!(f, "{}/{}/{}/{}/{}", self.master_seed, t, k, i, j)
    }
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}
