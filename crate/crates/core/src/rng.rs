//! Counter-based derivation of independent random streams from one master seed.
//!
//! The master seed keys a ChaCha8 generator; each (cell, trial, lane) triple
//! selects its own ChaCha stream via
//! `stream = cell << 40 | trial << 2 | lane`. Adding cells or trials never
//! changes the values any other stream produces.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub const MAX_CELLS: u64 = 1 << 24;
pub const MAX_TRIALS: u64 = 1 << 38;

/// Which consumer inside a trial a stream feeds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Lane {
    /// Parameter draws: bits, wobble angles, index choices, masks.
    Classical = 0,
    /// Measurement outcomes.
    Quantum = 1,
    /// Per-cell setup such as fixture angle vectors.
    Setup = 2,
}

pub fn stream_id(cell: u64, trial: u64, lane: Lane) -> u64 {
    assert!(cell < MAX_CELLS, "cell index out of range");
    assert!(trial < MAX_TRIALS, "trial index out of range");
    (cell << 40) | (trial << 2) | lane as u64
}

pub fn derive_stream(master_seed: u64, cell: u64, trial: u64, lane: Lane) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
    rng.set_stream(stream_id(cell, trial, lane));
    rng
}

/// The classical and quantum streams of one trial.
pub struct TrialStreams {
    pub classical: StreamRng,
    pub quantum: StreamRng,
}

impl TrialStreams {
    pub fn derive(master_seed: u64, cell: u64, trial: u64) -> Self {
        TrialStreams {
            classical: derive_stream(master_seed, cell, trial, Lane::Classical),
            quantum: derive_stream(master_seed, cell, trial, Lane::Quantum),
        }
    }
}
