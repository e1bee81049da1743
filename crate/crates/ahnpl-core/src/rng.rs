//! Seeded randomness with named sub-streams.
//!
//! Every random draw in the engine flows from a single `u64` seed through a
//! labelled sub-stream, so changing how one stage consumes randomness never
//! perturbs another stage.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// FNV-1a over bytes; stable across platforms and builds.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Deterministic generator for a named stage (`"data"`, `"negatives"`,
/// `"init"`, `"shuffle"`, ...) derived from the run seed.
pub fn substream(seed: u64, label: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}

/// Sub-stream further keyed by an item id, so per-item work is
/// order-independent and parallelizable.
pub fn substream_for(seed: u64, label: &str, item: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ fnv1a(item.as_bytes()));
    rng.set_stream(fnv1a(label.as_bytes()));
    rng
}
