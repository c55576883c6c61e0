//! Seeded random streams.
//!
//! Every random draw in the crate comes from ChaCha8 (a counter-based stream
//! cipher generator). A run seed fixes the key; independent 64-bit stream ids
//! separate the network draw, each trial, and each Monte Carlo replicate, so
//! results do not depend on evaluation order or thread count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name recorded in output metadata.
pub const RNG_ALGORITHM: &str = "chacha8 (rand_chacha 0.10, seed_from_u64 key, 64-bit stream ids)";

/// Stream purposes occupy the top byte of the stream id.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum Purpose {
    Network = 1,
    Trial = 2,
    Replicate = 3,
    Training = 4,
}

/// A generator keyed by `seed` on the stream `(purpose, index)`.
pub fn stream(seed: u64, purpose: Purpose, index: u64) -> ChaCha8Rng {
    assert!(index < 1 << 56, "stream index {index} out of range");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((purpose as u64) << 56) | index);
    rng
}

/// Derives a child seed (splitmix64 finalizer), used for nested replicate seeds.
pub fn derive(seed: u64, purpose: Purpose, index: u64) -> u64 {
    let mut z = seed
        .wrapping_add(((purpose as u64) << 56) ^ index)
        .wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngExt;

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let a: Vec<u64> = (0..4).map({
            let mut r = stream(7, Purpose::Trial, 3);
            move |_| r.random()
        }).collect();
        let b: Vec<u64> = (0..4).map({
            let mut r = stream(7, Purpose::Trial, 3);
            move |_| r.random()
        }).collect();
        let c: Vec<u64> = (0..4).map({
            let mut r = stream(7, Purpose::Trial, 4);
            move |_| r.random()
        }).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn derived_seeds_differ() {
        assert_ne!(derive(1, Purpose::Replicate, 0), derive(1, Purpose::Replicate, 1));
        assert_ne!(derive(1, Purpose::Replicate, 0), derive(1, Purpose::Training, 0));
        assert_eq!(derive(9, Purpose::Replicate, 5), derive(9, Purpose::Replicate, 5));
    }
}
