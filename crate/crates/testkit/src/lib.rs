//! Fixture generators and deliberately naive reference implementations.
//!
//! Nothing here calls into the algorithms under test; the references are
//! written from their definitions so they can serve as oracles.

pub mod fixtures;
pub mod oracles;

pub use rand_chacha::ChaCha8Rng;

use rand::SeedableRng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
