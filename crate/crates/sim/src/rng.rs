//! Counter-based seeding so every random draw depends only on its coordinates.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub(crate) const SCENE: u64 = 1;
pub(crate) const DRIFT: u64 = 2;
pub(crate) const JITTER: u64 = 3;
pub(crate) const CLUTTER: u64 = 4;
pub(crate) const MOT_APPEARANCE: u64 = 5;

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

pub(crate) fn stream(seed: u64, parts: &[u64]) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for &p in parts {
        h = splitmix(h ^ p);
    }
    ChaCha8Rng::seed_from_u64(h)
}
