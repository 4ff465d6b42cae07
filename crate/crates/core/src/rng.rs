//! Seeded, portable random streams. Every stochastic draw (scenario
//! generation, agent sort-direction assignment, gateway choice, random
//! ranking) uses its own stream of the run seed, so adding a strategy or
//! drawing more gateways never perturbs scenario generation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const STREAM_SCENARIO: u64 = 1;
pub const STREAM_SORT_DIRECTION: u64 = 2;
pub const STREAM_GATEWAY: u64 = 3;
pub const STREAM_RANKING: u64 = 4;

/// A named substream of the given seed.
pub fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}
