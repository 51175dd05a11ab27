//! Deterministic random streams.
//!
//! Every stream is a ChaCha8 generator seeded from `(master seed, purpose tag,
//! index...)` through SplitMix64, so runs, episodes and evaluation sequences
//! get independent streams that do not depend on scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = x;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn tag_hash(tag: &str) -> u64 {
    // FNV-1a
    tag.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| (h ^ b as u64).wrapping_mul(0x0100_0000_01b3))
}

/// Derives a 64-bit seed from a master seed, a tag and a path of indices.
pub fn derive_seed(master: u64, tag: &str, path: &[u64]) -> u64 {
    let mut s = splitmix64(master ^ tag_hash(tag));
    for &p in path {
        s = splitmix64(s ^ splitmix64(p.wrapping_add(0x5851_F42D_4C95_7F2D)));
    }
    s
}

pub fn stream(master: u64, tag: &str, path: &[u64]) -> StreamRng {
    StreamRng::seed_from_u64(derive_seed(master, tag, path))
}

/// Human-readable description stored alongside checkpoints.
pub const DERIVATION: &str =
    "ChaCha8Rng::seed_from_u64(splitmix64 chain over master ^ fnv1a(tag), then each path index)";
