//! Deterministic random substreams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator keyed by a
//! SplitMix64 hash of `(seed, stream, a, b)`, so draws for one query (or one
//! item) never depend on how many draws another query consumed.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Identifier recorded in run metadata.
pub const RNG_ID: &str = "chacha8/splitmix64-substreams/v1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Population = 1,
    QueryCandidates = 2,
    Labels = 3,
    Relabel = 4,
    EoddsScore = 5,
    Shuffle = 6,
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn substream_key(seed: u64, stream: Stream, a: u64, b: u64) -> u64 {
    let mut h = splitmix64(seed);
    h = splitmix64(h ^ stream as u64);
    h = splitmix64(h ^ a);
    splitmix64(h ^ b)
}

pub fn substream(seed: u64, stream: Stream, a: u64, b: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_key(seed, stream, a, b))
}
