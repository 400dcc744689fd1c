//! Deterministic seed derivation.
//!
//! All randomness in the crate flows from an explicit master seed through
//! named substreams. Substream keys are hashed with a fixed FNV-1a/SplitMix
//! construction so that derived seeds are stable across platforms, runs, and
//! item iteration order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

fn fnv1a(mut state: u64, bytes: &[u8]) -> u64 {
    for &b in bytes {
        state ^= b as u64;
        state = state.wrapping_mul(FNV_PRIME);
    }
    state
}

// SplitMix64 finalizer; decorrelates nearby FNV states.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stable 64-bit seed for the substream `(master_seed, domain, key)`.
///
/// `domain` separates uses (e.g. subset shuffling vs. per-item noise) so the
/// same key never feeds two different purposes from one stream.
pub fn substream_seed(master_seed: u64, domain: &str, key: &str) -> u64 {
    let mut h = fnv1a(FNV_OFFSET, &master_seed.to_le_bytes());
    h = fnv1a(h, domain.as_bytes());
    h = fnv1a(h, &[0x1f]); // separator so ("ab","c") != ("a","bc")
    h = fnv1a(h, key.as_bytes());
    mix(h)
}

/// ChaCha stream for a named substream.
pub fn substream_rng(master_seed: u64, domain: &str, key: &str) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(substream_seed(master_seed, domain, key))
}

/// ChaCha stream directly from a raw 64-bit seed.
pub fn rng_from_seed(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn seeds_are_stable() {
        // Frozen values: a change here breaks reproducibility of receipts.
        let a = substream_seed(42, "z", "item-001");
        let b = substream_seed(42, "z", "item-001");
        assert_eq!(a, b);
        assert_ne!(a, substream_seed(42, "z", "item-002"));
        assert_ne!(a, substream_seed(42, "noise", "item-001"));
        assert_ne!(a, substream_seed(43, "z", "item-001"));
    }

    #[test]
    fn domain_key_boundary_is_unambiguous() {
        assert_ne!(
            substream_seed(1, "ab", "c"),
            substream_seed(1, "a", "bc")
        );
    }

    #[test]
    fn rng_streams_are_reproducible() {
        use rand::Rng;
        let mut r1 = substream_rng(7, "test", "k");
        let mut r2 = substream_rng(7, "test", "k");
        for _ in 0..16 {
            assert_eq!(r1.gen::<u64>(), r2.gen::<u64>());
        }
    }
}
