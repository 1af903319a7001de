//! Seed derivation.
//!
//! One global seed fans out into independent streams keyed by stage, task,
//! user, window and epoch, so any sample can be regenerated in isolation and
//! generation order never affects the output.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SampleRng = ChaCha8Rng;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over the tag bytes; stable across platforms and releases.
fn tag_hash(tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.as_bytes() {
        h ^= u64::from(*b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Mix a seed with a tag and any number of integer coordinates.
pub fn derive(seed: u64, tag: &str, parts: &[u64]) -> u64 {
    let mut h = splitmix64(seed ^ tag_hash(tag));
    for &p in parts {
        h = splitmix64(h ^ p.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    }
    h
}

pub fn rng(seed: u64, tag: &str, parts: &[u64]) -> SampleRng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, parts))
}
