//! Seeded random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 stream addressed by
//! `(seed, stream)`. ChaCha is counter based, so a stream can be opened at
//! any point without touching the others; graph sampling gives each edge
//! its own stream, which makes the result independent of iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Stream reserved for community labels.
const LABEL_STREAM: u64 = u64::MAX;

/// Streams at or above this value are free for auxiliary use.
const AUX_BASE: u64 = u64::MAX - (1 << 16);

pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Stream for the edge `{i, j}`; symmetric in its arguments.
pub fn edge_rng(seed: u64, i: usize, j: usize) -> ChaCha8Rng {
    let (lo, hi) = if i < j { (i, j) } else { (j, i) };
    stream_rng(seed, ((lo as u64) << 32) | hi as u64)
}

pub fn label_rng(seed: u64) -> ChaCha8Rng {
    stream_rng(seed, LABEL_STREAM)
}

/// Auxiliary stream `k` (initialisation, bootstrap, ...).
pub fn aux_rng(seed: u64, k: u16) -> ChaCha8Rng {
    stream_rng(seed, AUX_BASE + k as u64)
}

/// Derive a child seed, e.g. per replicate or per task.
pub fn derive_seed(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the combined input
    let mut z = seed ^ index.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
