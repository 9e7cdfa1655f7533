//! Seed derivation and RNG construction.
//!
//! All randomness in the crate flows from a single root seed per run. Child
//! seeds are derived by folding integer tags (class index, trial index, grid
//! index, ...) through splitmix64, so that e.g. trial 17 of class 1 gets the
//! same sample stream no matter which scorer consumes it or which thread runs
//! it. Generators are ChaCha8: fast, portable, and stable across platforms.

use rand_chacha::ChaCha8Rng;
use rand_chacha::rand_core::SeedableRng;

/// Purpose tags for seed derivation, so different uses of one root seed can
/// never collide even with equal index arguments.
pub const TAG_CENTERS: u64 = 0x5EED_0001;
pub const TAG_SPLIT: u64 = 0x5EED_0002;
pub const TAG_TRIAL: u64 = 0x5EED_0003;
pub const TAG_SWEEP_POINT: u64 = 0x5EED_0004;
pub const TAG_DIVERGENCE: u64 = 0x5EED_0005;

/// One round of splitmix64.
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive a child seed from `root` and a path of integer tags.
///
/// Deterministic, order-sensitive, and well dispersed: changing any tag (or
/// the tag count) changes the result, and `derive_seed(s, &[])` differs from
/// `s` itself so a root seed is never reused verbatim.
pub fn derive_seed(root: u64, tags: &[u64]) -> u64 {
    let mut state = splitmix64(root);
    for &t in tags {
        state = splitmix64(state ^ splitmix64(t));
    }
    state
}

/// ChaCha8 generator for a derived seed path.
pub fn rng_from(root: u64, tags: &[u64]) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive_seed(root, tags))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::RngCore;

    #[test]
    fn derivation_is_deterministic() {
        assert_eq!(derive_seed(42, &[1, 2, 3]), derive_seed(42, &[1, 2, 3]));
        let mut a = rng_from(42, &[7]);
        let mut b = rng_from(42, &[7]);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn tags_and_root_both_matter() {
        let base = derive_seed(42, &[1, 2]);
        assert_ne!(base, derive_seed(42, &[2, 1]), "order must matter");
        assert_ne!(base, derive_seed(42, &[1]), "length must matter");
        assert_ne!(base, derive_seed(43, &[1, 2]), "root must matter");
        assert_ne!(derive_seed(42, &[]), 42, "root must not pass through");
    }

    #[test]
    fn distinct_seeds_give_distinct_streams() {
        let mut a = rng_from(1, &[0]);
        let mut b = rng_from(1, &[1]);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }
}
