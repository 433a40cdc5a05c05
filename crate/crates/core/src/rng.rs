//! Named random streams.
//!
//! Every consumer of randomness asks for its own stream by name. The stream is
//! a ChaCha8 generator keyed by the run seed, with the ChaCha stream id set to
//! the FNV-1a hash of the name, so adding a new consumer never shifts the
//! numbers seen by existing ones.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::hash::fnv1a;

pub type StreamRng = ChaCha8Rng;

pub const SHUFFLE: &str = "shuffle";
pub const DROPOUT: &str = "dropout";
pub const INIT: &str = "init";
pub const EMBEDDING: &str = "embedding";
pub const SYNTH: &str = "synth";

pub fn stream(seed: u64, name: &str) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(name.as_bytes()));
    rng
}
