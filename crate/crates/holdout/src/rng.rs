//! Seeded random streams.
//!
//! Every stochastic operation in this crate takes an explicit [`RngStream`],
//! so any result can be replayed from the seed recorded in its report.
//! Sub-streams are derived by mixing a label into the parent seed, which keeps
//! parallel work (per-tree, per-repetition) deterministic regardless of
//! scheduling order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha12Rng;

/// A named, seeded random stream backed by ChaCha12.
#[derive(Debug, Clone)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    /// Seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derive an independent child stream for `label`.
    ///
    /// Children depend only on the parent's seed and the label, never on how
    /// much of the parent stream has been consumed.
    pub fn derive(&self, label: u64) -> Self {
        Self::new(mix(self.seed, label))
    }

    /// Derive a child stream for a (label, index) pair, e.g. one stream per
    /// Monte-Carlo repetition.
    pub fn derive_indexed(&self, label: u64, index: u64) -> Self {
        Self::new(mix(mix(self.seed, label), index))
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }
}

/// splitmix64 finalizer over the pair; good avalanche, cheap.
fn mix(seed: u64, label: u64) -> u64 {
    let mut z = seed ^ label.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
