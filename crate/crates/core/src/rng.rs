//! Seeded random streams. Trial `i` of an experiment with base seed `b` uses
//! ChaCha stream `i` of key `b`, so results do not depend on how trials are
//! scheduled across workers.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type SimRng = ChaCha8Rng;

pub fn stream(base_seed: u64, trial: u64) -> SimRng {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed);
    rng.set_stream(trial);
    rng
}
