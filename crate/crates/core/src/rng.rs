//! Seed derivation for reproducible, order-independent random streams.
//!
//! Every random draw in the crate comes from a ChaCha8 generator whose seed is
//! derived from a base seed and a tuple of integer coordinates (record index,
//! trial, SNR index, ...). Two draws with different coordinates never share a
//! stream, and the value of a draw never depends on how many other draws were
//! made before it or on which thread made them.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a child seed from `base` and a path of coordinates.
pub fn derive_seed(base: u64, path: &[u64]) -> u64 {
    path.iter().fold(mix(base), |acc, &p| mix(acc ^ mix(p)))
}

/// Generator keyed by `(base, path)`.
pub fn stream(base: u64, path: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(base, path))
}
