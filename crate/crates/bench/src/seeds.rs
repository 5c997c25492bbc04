//! Counter-based seed derivation: every (cell, trial) job gets a seed that
//! depends only on the master seed and its own coordinates, never on the
//! order jobs run in.

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for the job at `coords` under `master`.
pub fn derive_seed(master: u64, coords: &[u64]) -> u64 {
    coords.iter().fold(mix(master), |acc, &c| {
        mix(acc.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_add(mix(c)))
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    #[test]
    fn distinct_and_stable() {
        let mut seen = HashSet::new();
        for cell in 0..50 {
            for trial in 0..50 {
                assert!(seen.insert(derive_seed(7, &[cell, trial])));
            }
        }
        assert_eq!(derive_seed(7, &[3, 4]), derive_seed(7, &[3, 4]));
        assert_ne!(derive_seed(7, &[3, 4]), derive_seed(7, &[4, 3]));
        assert_ne!(derive_seed(7, &[3, 4]), derive_seed(8, &[3, 4]));
    }
}
