//! Reproducible sub-seeding.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Generator used throughout the crate.
pub type Rng = ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Mixes a master seed with a sequence of indices into an independent seed.
pub fn derive_seed(seed: u64, indices: &[u64]) -> u64 {
    indices.iter().fold(splitmix64(seed), |acc, &i| splitmix64(acc ^ splitmix64(i.wrapping_add(0x5851_F42D_4C95_7F2D))))
}

pub fn rng_from(seed: u64, indices: &[u64]) -> Rng {
    Rng::seed_from_u64(derive_seed(seed, indices))
}
