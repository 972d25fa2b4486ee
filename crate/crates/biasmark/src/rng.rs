//! Deterministic randomness.
//!
//! Every random quantity in this crate is drawn from a ChaCha12 stream keyed
//! by a 64-bit seed. Experiment code derives per-trial sub-seeds with
//! SplitMix64 over a tag list, so results do not depend on evaluation order
//! and a fixed master seed reproduces every byte of output.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, StandardNormal};

/// Identity of the generator stack recorded in key files. Covers both the
/// stream cipher and the normal sampler; bump if either changes.
pub const PRNG_ID: &str = "chacha12-ziggurat-v1";

/// Creates the named generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> ChaCha12Rng {
    ChaCha12Rng::seed_from_u64(seed)
}

/// SplitMix64 finalizer. Bijective on u64 with good avalanche behaviour.
pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a sub-seed from a master seed and a tag path.
///
/// Distinct tag paths give independent-looking streams; the same path always
/// gives the same seed regardless of when or where it is computed.
pub fn derive_seed(master: u64, tags: &[u64]) -> u64 {
    let mut acc = splitmix64(master ^ 0x6269_616d_6172_6b00);
    for &t in tags {
        acc = splitmix64(acc ^ t);
    }
    acc
}

/// Samples `len` independent N(0, sd²) values.
pub fn normal_vec(rng: &mut ChaCha12Rng, len: usize, sd: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(len);
    for _ in 0..len {
        let z: f64 = StandardNormal.sample(rng);
        out.push(z * sd);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_seed_same_stream() {
        let a = normal_vec(&mut rng_from_seed(7), 64, 1.0);
        let b = normal_vec(&mut rng_from_seed(7), 64, 1.0);
        assert_eq!(a, b);
    }

    #[test]
    fn different_tags_different_seeds() {
        let s1 = derive_seed(1, &[0, 0]);
        let s2 = derive_seed(1, &[0, 1]);
        let s3 = derive_seed(1, &[1, 0]);
        assert_ne!(s1, s2);
        assert_ne!(s1, s3);
        assert_ne!(s2, s3);
    }

    #[test]
    fn derive_is_order_stable() {
        // Calling in any order yields the same mapping.
        let forward: Vec<u64> = (0..8).map(|t| derive_seed(42, &[3, t])).collect();
        let backward: Vec<u64> = (0..8).rev().map(|t| derive_seed(42, &[3, t])).collect();
        let reversed: Vec<u64> = backward.into_iter().rev().collect();
        assert_eq!(forward, reversed);
    }

    #[test]
    fn splitmix_reference_values() {
        // First two outputs of the reference SplitMix64 sequence seeded with
        // 0; the state advances by the golden gamma before mixing.
        assert_eq!(splitmix64(0), 0xe220a8397b1dcdaf);
        assert_eq!(splitmix64(0x9e3779b97f4a7c15), 0x6e789e6aa1b965f4);
    }

    #[test]
    fn normal_vec_scales_by_sd() {
        let unit = normal_vec(&mut rng_from_seed(3), 16, 1.0);
        let scaled = normal_vec(&mut rng_from_seed(3), 16, 2.5);
        for (u, s) in unit.iter().zip(&scaled) {
            assert_eq!(u * 2.5, *s);
        }
    }
}
