//! Seeded random streams, split by purpose.
//!
//! Every consumer of randomness asks for a stream keyed by `(seed, purpose,
//! index)`. Streams for different purposes never overlap, so e.g. changing the
//! evaluation sample count leaves the training data untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Stream = ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Purpose {
    Init = 1,
    TrainingData = 2,
    Dither = 3,
    Evaluation = 4,
    FixedDataset = 5,
    Oracle = 6,
    Test = 7,
    Probe = 8,
}

/// Stream for `purpose` under `seed`; `index` selects a sub-stream (e.g. a sample block).
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> Stream {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 48) ^ index);
    rng
}
