//! Counter-based seed derivation.
//!
//! Every random draw in the crate comes from a generator seeded by
//! `derive_seed(master, stream, index)`, so work can be split across threads in
//! any order and still reproduce the serial result bit for bit.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Named random streams, one per independent consumer.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    Camera = 1,
    Content = 2,
    SensorNoise = 3,
    EveSubset = 4,
    H0Bootstrap = 5,
    H1Bootstrap = 6,
    SetupAImage = 7,
}

/// Mixes a master seed with a stream tag and a counter.
pub fn derive_seed(master: u64, stream: Stream, index: u64) -> u64 {
    let a = splitmix64(master ^ 0xA076_1D64_78BD_642F);
    let b = splitmix64(a ^ (stream as u64).wrapping_mul(0xE703_7ED1_A0B4_28DB));
    splitmix64(b ^ index.wrapping_mul(0x8EBC_6AF0_9C88_C6E3))
}

pub fn rng_from(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn stream_rng(master: u64, stream: Stream, index: u64) -> ChaCha8Rng {
    rng_from(derive_seed(master, stream, index))
}
