//! Counter-based randomness for reproducible solver runs.
//!
//! Stochastic solvers draw their k-th sample from a fixed stream position
//! derived from the global step counter, never from accumulated generator
//! state. Two runs with the same seed therefore sample identically at the
//! same step even if one of them skips draws (e.g. full-coverage iterations
//! that need no index), which is what makes the degenerate-radius
//! equivalence between solvers exact.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// 128-bit words of ChaCha output reserved per draw position.
const WORDS_PER_STEP: u128 = 32;

/// A seeded stream of uniform draws addressed by step counter.
pub struct DrawStream {
    rng: ChaCha8Rng,
}

impl DrawStream {
    /// `stream` separates independent uses of the same seed (index sampling
    /// vs. batch selection, etc.).
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream);
        DrawStream { rng }
    }

    /// Uniform index in `0..len` at step `t`.
    pub fn index_at(&mut self, t: u64, len: usize) -> usize {
        debug_assert!(len > 0);
        self.rng.set_word_pos(t as u128 * WORDS_PER_STEP);
        self.rng.gen_range(0..len)
    }

    /// Uniform sample without replacement of `k` items from `pool`, at step
    /// `t` (partial Fisher-Yates on a copy).
    pub fn subset_at(&mut self, t: u64, pool: &[usize], k: usize) -> Vec<usize> {
        debug_assert!(k <= pool.len());
        self.rng.set_word_pos(t as u128 * WORDS_PER_STEP * 4);
        let mut arena = pool.to_vec();
        for j in 0..k {
            let pick = j + self.rng.gen_range(0..arena.len() - j);
            arena.swap(j, pick);
        }
        arena.truncate(k);
        arena
    }
}
