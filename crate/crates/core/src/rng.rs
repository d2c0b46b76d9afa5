//! Seed plumbing. Every random draw in the crate comes from a ChaCha stream
//! derived from a user seed plus a stream label, so any artifact can be
//! regenerated from its manifest entry alone.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type Rng = ChaCha8Rng;

/// splitmix64 finaliser
pub fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed and a stream label.
pub fn derive(seed: u64, stream: u64) -> u64 {
    mix(seed ^ mix(stream.wrapping_add(0x5851_f42d_4c95_7f2d)))
}

pub fn derive_str(seed: u64, label: &str) -> u64 {
    // FNV-1a over the label
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in label.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    derive(seed, h)
}

pub fn rng(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream(seed: u64, label: &str) -> Rng {
    rng(derive_str(seed, label))
}
