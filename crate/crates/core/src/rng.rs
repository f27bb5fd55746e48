//! Reproducible random streams.
//!
//! Every run derives all randomness from one root seed. The root seed is
//! expanded into a ChaCha8 key with [`SeedableRng::seed_from_u64`], and each
//! consumer gets its own ChaCha stream id on that key:
//!
//! | stream      | consumer                                          |
//! |-------------|---------------------------------------------------|
//! | `0`         | run level: starting point, output-iterate choice |
//! | `1 + i`     | agent `i`: every mini-batch it draws              |
//!
//! Distinct stream ids on the same key produce non-overlapping keystreams, so
//! agent batches are mutually independent and each agent's draws depend only
//! on its own stream. A stream is fully described by its [`StreamState`]
//! (key, stream id, word position), which is what checkpoints store.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const RUN_STREAM: u64 = 0;

/// Stream id owned by agent `agent`.
pub fn agent_stream_id(agent: usize) -> u64 {
    1 + agent as u64
}

pub fn stream(root_seed: u64, stream_id: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(root_seed);
    rng.set_stream(stream_id);
    rng
}

pub fn run_stream(root_seed: u64) -> StreamRng {
    stream(root_seed, RUN_STREAM)
}

pub fn agent_stream(root_seed: u64, agent: usize) -> StreamRng {
    stream(root_seed, agent_stream_id(agent))
}

/// Exact position of a stream, enough to resume it bit for bit.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct StreamState {
    pub key: [u8; 32],
    pub stream: u64,
    pub word_pos: u128,
}

impl StreamState {
    pub fn capture(rng: &StreamRng) -> Self {
        Self { key: rng.get_seed(), stream: rng.get_stream(), word_pos: rng.get_word_pos() }
    }

    pub fn restore(&self) -> StreamRng {
        let mut rng = ChaCha8Rng::from_seed(self.key);
        rng.set_stream(self.stream);
        rng.set_word_pos(self.word_pos);
        rng
    }
}
