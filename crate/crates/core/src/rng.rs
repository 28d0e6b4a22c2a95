//! Seeded random sources.
//!
//! Every component of a run draws from its own named stream, derived from the
//! master seed. Streams never share state, so adding draws to one (say, more
//! evaluation episodes) leaves every other stream untouched.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The random source used throughout the crate.
pub type SeededRng = ChaCha8Rng;

/// SplitMix64 finalizer.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Order-sensitive combination of several words into one seed.
pub fn combine(parts: &[u64]) -> u64 {
    parts
        .iter()
        .fold(0x6A09_E667_F3BC_C908, |acc, &p| mix64(acc ^ mix64(p)))
}

fn name_hash(name: &str) -> u64 {
    // FNV-1a
    name.bytes().fold(0xCBF2_9CE4_8422_2325, |h, b| {
        (h ^ u64::from(b)).wrapping_mul(0x0000_0100_0000_01B3)
    })
}

/// A random stream identified by `(master seed, name)`.
pub fn stream(master: u64, name: &str) -> SeededRng {
    SeededRng::seed_from_u64(combine(&[master, name_hash(name)]))
}

/// A random stream identified by `(master seed, name, index...)`.
pub fn indexed_stream(master: u64, name: &str, index: &[u64]) -> SeededRng {
    let mut parts = vec![master, name_hash(name)];
    parts.extend_from_slice(index);
    SeededRng::seed_from_u64(combine(&parts))
}
