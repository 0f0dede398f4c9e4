//! Reproducible random streams.
//!
//! Every Monte Carlo run is driven by one master seed. Parallel workers never
//! share a generator: each takes its own ChaCha stream, addressed by a stream
//! id, so results do not depend on thread scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub type StreamRng = ChaCha8Rng;

/// Generator for substream `stream` of the master `seed`.
pub fn substream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Master generator (stream 0).
pub fn master(seed: u64) -> StreamRng {
    substream(seed, 0)
}

/// Number of worker threads requested through `GENBOUND_THREADS`, if set.
pub fn thread_cap() -> Option<usize> {
    std::env::var("GENBOUND_THREADS")
        .ok()
        .and_then(|v| v.trim().parse::<usize>().ok())
        .filter(|&n| n > 0)
}
