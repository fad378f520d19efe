//! Seeded random number generation shared by simulation and resampling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Name of the generator recorded in output metadata.
pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9)";

/// The generator used everywhere in the crate.
pub type Rng = ChaCha8Rng;

pub fn rng_from_seed(seed: u64) -> Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Child seed for a stream identified by `path` (e.g. `[replication]` or
/// `[horizon, replication]`). Distinct paths give unrelated seeds.
pub fn derive_seed(master: u64, path: &[u64]) -> u64 {
    let mut s = splitmix64(master);
    for &p in path {
        s = splitmix64(s ^ splitmix64(p.wrapping_add(0x5851_f42d_4c95_7f2d)));
    }
    s
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng as _;

    #[test]
    fn derived_seeds_differ_and_repeat() {
        let a = derive_seed(7, &[0]);
        assert_eq!(a, derive_seed(7, &[0]));
        assert_ne!(a, derive_seed(7, &[1]));
        assert_ne!(a, derive_seed(8, &[0]));
        assert_ne!(derive_seed(7, &[1, 0]), derive_seed(7, &[0, 1]));
    }

    #[test]
    fn generator_is_replayable() {
        let mut a = rng_from_seed(42);
        let mut b = rng_from_seed(42);
        for _ in 0..100 {
            assert_eq!(a.random::<u64>(), b.random::<u64>());
        }
    }
}
