//! Counter-based random streams.
//!
//! Every (point, round, phase) triple owns an independent ChaCha stream, so
//! results do not depend on how work is scheduled across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SolverRng = ChaCha8Rng;

/// Which half of a solver round a stream belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Phase {
    /// Stage-1 boundary walks.
    Sample = 0,
    /// Stage-2 reuse (fresh source samples for every pair).
    Reuse = 1,
}

/// Deterministic stream factory keyed by a 64-bit seed.
#[derive(Clone, Copy, Debug)]
pub struct Streams {
    seed: u64,
}

impl Streams {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Stream for `point` in `round` (0-based) and `phase`.
    ///
    /// The ChaCha stream id selects the point; the word position encodes the
    /// round and phase, leaving 2^32 words per (round, phase).
    pub fn stream(&self, point: usize, round: u64, phase: Phase) -> SolverRng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(point as u64);
        let block = (u128::from(round) << 1) | phase as u128;
        rng.set_word_pos(block << 32);
        rng
    }
}
