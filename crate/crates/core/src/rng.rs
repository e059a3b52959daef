//! Counter-based randomness keyed by (seed, trial, purpose, index).
//!
//! Every random quantity used by a trial is a pure function of its key, so
//! trials can be replayed individually, evaluated in any order, and split
//! across workers without changing results.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Map 64 random bits to a uniform double in [0, 1).
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Independent randomness lanes. Adding a purpose never perturbs the others.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Purpose {
    State = 1,
    Order = 2,
    VertexSeed = 3,
    Accept = 4,
    CoupleThin = 5,
    CoupleSplit = 6,
    Drop = 7,
    SecondRound = 8,
    FirstRound = 9,
    Gw = 10,
    Subset = 11,
    Shape = 12,
    Fixture = 13,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct CoinStream {
    base: u64,
}

impl CoinStream {
    pub fn new(seed: u64, trial: u64) -> Self {
        let s = mix64(seed ^ 0x5851_F42D_4C95_7F2D);
        CoinStream {
            base: mix64(s ^ trial.wrapping_mul(GOLDEN).wrapping_add(0x1405_7B7E_F767_814F)),
        }
    }

    #[inline]
    pub fn lane(&self, purpose: Purpose) -> Lane {
        self.lane_tagged(purpose, 0)
    }

    /// Lane for a purpose with an extra tag (used for stacked drop layers).
    #[inline]
    pub fn lane_tagged(&self, purpose: Purpose, tag: u64) -> Lane {
        let p = (purpose as u64).wrapping_mul(0xD6E8_FEB8_6659_FD93);
        Lane {
            key: mix64(self.base ^ p ^ mix64(tag.wrapping_add(GOLDEN))),
        }
    }

    #[inline]
    pub fn uniform(&self, purpose: Purpose, index: u64) -> f64 {
        self.lane(purpose).uniform(index)
    }

    /// Sequential generator for consumers that draw a variable number of values.
    pub fn rng(&self, purpose: Purpose) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(self.lane(purpose).key)
    }
}

#[derive(Clone, Copy, Debug)]
pub struct Lane {
    key: u64,
}

impl Lane {
    #[inline]
    pub fn uniform(&self, index: u64) -> f64 {
        unit_f64(mix64(self.key.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN))))
    }
}
