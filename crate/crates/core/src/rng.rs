//! Seeded random streams.
//!
//! Every stochastic operation takes a caller-owned [`RandomStream`]. Derived
//! streams are keyed by integer tuples so that parallel execution order never
//! changes results.

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

pub type RandomStream = ChaCha12Rng;

pub fn stream(seed: u64) -> RandomStream {
    ChaCha12Rng::seed_from_u64(seed)
}

/// Stream for `(master, keys...)`; distinct key tuples give unrelated streams.
pub fn derived_stream(master: u64, keys: &[u64]) -> RandomStream {
    stream(derive_seed(master, keys))
}

pub fn derive_seed(master: u64, keys: &[u64]) -> u64 {
    let mut h = splitmix(master ^ 0x5eed_0f_b175);
    for &k in keys {
        h = splitmix(h ^ splitmix(k.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    h
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
