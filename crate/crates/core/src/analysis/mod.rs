//! Experiment harnesses: BER Monte Carlo, ambiguity functions, PAPR and the
//! mismatched-chirp security experiment, plus CSV rendering.

mod ambiguity;
mod ber;
mod estimation;
mod papr;
mod report;
mod security;

pub use ambiguity::*;
pub use ber::*;
pub use estimation::*;
pub use papr::*;
pub use report::*;
pub use security::*;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use sha2::{Digest, Sha256};

/// Purpose tags that keep the random streams of one run independent.
#[derive(Debug, Clone, Copy)]
#[repr(u64)]
pub(crate) enum Stream {
    Channel = 1,
    Bits = 2,
    Noise = 3,
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Counter-derived generator for `(seed, purpose, a, b)`; any trial can be
/// regenerated without replaying earlier ones.
pub(crate) fn stream(seed: u64, purpose: Stream, a: u64, b: u64) -> ChaCha8Rng {
    let mut h = splitmix(seed);
    for v in [purpose as u64, a, b] {
        h = splitmix(h ^ v);
    }
    ChaCha8Rng::seed_from_u64(h)
}

/// Hex SHA-256 of a canonical config text.
pub fn fingerprint(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}
