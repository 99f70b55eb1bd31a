//! Reproducible randomness.
//!
//! All randomness in the crate flows from a single 64-bit seed through a
//! counter-based splitting scheme with three levels:
//!
//! 1. `substream_seed(root, k)` derives independent 64-bit seeds for logical
//!    substreams (one per experiment arm, pilot run, and so on). Substream `k`
//!    is the `k`-th output of a ChaCha8 generator keyed by `root`, reached by
//!    an O(1) jump, so distinct counters never share state.
//! 2. Within a replicated run, replication `i` uses seed `base + i`. The
//!    offset convention (rather than another derivation pass) keeps the
//!    mapping between a replication index and its seed trivially auditable.
//! 3. Within one run, sample `n` draws from lane `n` of its [`RngStream`].
//!    Lanes are ChaCha8 streams of the same key, so the draws for sample `n`
//!    are identical no matter how many values earlier samples consumed. This
//!    is what makes common-random-number comparisons between two proposals
//!    pair up exactly.
//!
//! The same per-index seeding makes parallel and sequential execution produce
//! bitwise-identical results.

use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Derives the seed of logical substream `k` of the stream rooted at `root`.
pub fn substream_seed(root: u64, k: u64) -> u64 {
    let mut g = ChaCha8Rng::seed_from_u64(root);
    // each u64 output occupies two 32-bit words of the keystream
    g.set_word_pos(u128::from(k) * 2);
    g.next_u64()
}

/// One logical randomness stream: a ChaCha8 generator plus the seed that
/// created it, kept so output records can state their provenance.
#[derive(Clone, Debug)]
pub struct RngStream {
    seed: u64,
    rng: ChaCha8Rng,
}

impl RngStream {
    pub fn from_seed(seed: u64) -> Self {
        Self {
            seed,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// The seed this stream was created from.
    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Derives the child stream with counter `k`.
    pub fn substream(&self, k: u64) -> RngStream {
        RngStream::from_seed(substream_seed(self.seed, k))
    }

    /// Positions the generator at the start of lane `lane`. Draws from
    /// different lanes never overlap, regardless of how much is consumed
    /// from each.
    pub fn select_lane(&mut self, lane: u64) {
        self.rng.set_stream(lane);
        self.rng.set_word_pos(0);
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
