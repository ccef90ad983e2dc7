//! Counter-derived random streams.
//!
//! Every consumer of randomness draws from a ChaCha stream selected by
//! `(seed, domain, index)`, so per-record and per-sample work produces the
//! same values whether it runs serially or in parallel.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Domain tags separating independent uses of the same user seed.
pub mod domain {
    pub const SLOTS: u64 = 0x736c_6f74;
    pub const SYNTH: u64 = 0x7379_6e74;
    pub const SAMPLE: u64 = 0x7361_6d70;
    pub const CORRUPT: u64 = 0x636f_7272;
    pub const PREDICT: u64 = 0x7072_6564;
    pub const PAYLOAD: u64 = 0x7061_796c;
    pub const KEYGEN: u64 = 0x6b65_7967;
}

/// SplitMix64 finalizer, used to spread structured seeds over the key space.
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Random stream for item `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(mix64(seed ^ mix64(domain)));
    rng.set_stream(index);
    rng
}
