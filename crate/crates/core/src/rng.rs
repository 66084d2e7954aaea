//! Per-turn deterministic random streams.
//!
//! A stream is keyed by `(global seed, dialogue id, turn id, purpose)`. The
//! key is hashed with SHA-256 into a ChaCha8 seed, so draws never depend on
//! the order in which dialogues are processed.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// What a stream is used for. Separate purposes get independent streams
/// from the same seed tuple.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Act,
    Realize,
    ValueSubstitution,
}

impl Stream {
    fn tag(self) -> &'static [u8] {
        match self {
            Stream::Act => b"act",
            Stream::Realize => b"realize",
            Stream::ValueSubstitution => b"vs",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SeedTuple {
    pub global_seed: u64,
    pub dialogue_id: String,
    pub turn_id: usize,
}

impl SeedTuple {
    pub fn new(global_seed: u64, dialogue_id: &str, turn_id: usize) -> Self {
        SeedTuple {
            global_seed,
            dialogue_id: dialogue_id.to_string(),
            turn_id,
        }
    }

    pub fn rng(&self, stream: Stream) -> TurnRng {
        let mut h = Sha256::new();
        h.update(self.global_seed.to_le_bytes());
        h.update((self.dialogue_id.len() as u64).to_le_bytes());
        h.update(self.dialogue_id.as_bytes());
        h.update((self.turn_id as u64).to_le_bytes());
        h.update(stream.tag());
        let seed: [u8; 32] = h.finalize().into();
        TurnRng(ChaCha8Rng::from_seed(seed))
    }
}

/// The random source handed to every stochastic operation.
#[derive(Clone, Debug)]
pub struct TurnRng(ChaCha8Rng);

impl TurnRng {
    /// A stream not tied to any dialogue, for tests and synthetic runs.
    pub fn from_seed(seed: u64) -> Self {
        TurnRng(ChaCha8Rng::seed_from_u64(seed))
    }

    /// Bernoulli draw. `p <= 0` never fires and `p >= 1` always fires; one
    /// value is consumed either way so the draw sequence stays aligned.
    pub fn chance(&mut self, p: f64) -> bool {
        let u: f64 = self.0.gen();
        u < p
    }

    /// Uniform index in `0..n`. `n` must be positive.
    pub fn index(&mut self, n: usize) -> usize {
        assert!(n > 0, "index draw over an empty range");
        self.0.gen_range(0..n)
    }

    pub fn pick<'a, T>(&mut self, items: &'a [T]) -> &'a T {
        &items[self.index(items.len())]
    }

    /// Index drawn from unnormalized non-negative weights.
    pub fn weighted(&mut self, weights: &[f64]) -> usize {
        let total: f64 = weights.iter().sum();
        let mut u = self.0.gen::<f64>() * total;
        for (i, w) in weights.iter().enumerate() {
            if u < *w {
                return i;
            }
            u -= w;
        }
        // rounding slack lands on the last positive weight
        weights.iter().rposition(|w| *w > 0.0).unwrap_or(0)
    }

    /// `k` distinct indices from `0..n` in draw order (partial Fisher-Yates).
    pub fn sample_indices(&mut self, n: usize, k: usize) -> Vec<usize> {
        let mut pool: Vec<usize> = (0..n).collect();
        let k = k.min(n);
        for i in 0..k {
            let j = i + self.index(n - i);
            pool.swap(i, j);
        }
        pool.truncate(k);
        pool
    }

    pub fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }
}
