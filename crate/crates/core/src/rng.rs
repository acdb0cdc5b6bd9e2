//! Seeded random streams. Every consumer derives its own ChaCha stream from
//! the root seed, a domain and an index, so results never depend on how work
//! is split across threads.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// What a stream is used for; keeps event generation and shot sampling
/// from sharing randomness.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Domain {
    Events,
    Shots,
    Other(u64),
}

impl Domain {
    fn key(self) -> u64 {
        match self {
            Domain::Events => 0,
            Domain::Shots => 1,
            Domain::Other(k) => 0x100 + k,
        }
    }
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Stream `index` of `domain` under `seed`.
pub fn stream(seed: u64, domain: Domain, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix64(seed ^ splitmix64(domain.key())));
    rng.set_stream(index);
    rng
}

/// Mixes several labels into one stream index.
pub fn mix(parts: &[u64]) -> u64 {
    parts.iter().fold(0x2545_F491_4F6C_DD1D, |acc, &p| splitmix64(acc ^ p))
}
