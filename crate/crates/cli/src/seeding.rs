//! Counter-based seed derivation: every run gets its own ChaCha stream of
//! the master seed, so results do not depend on scheduling or worker count.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u64)]
pub enum Stream {
    /// Initial estimate and plant history of a configured run.
    Initial = 1,
    /// Plant coefficients drawn from a coefficient box.
    Plant = 2,
    /// Initial conditions of sweep and fitting runs.
    Run = 3,
    /// Initial conditions of held-out validation runs.
    Holdout = 4,
}

const FIELD: u64 = (1 << 24) - 1;

/// Generator for `(stream, plant, run)` under `master`. Plant and run
/// indices are taken modulo 2^24.
pub fn stream_rng(master: u64, stream: Stream, plant: u64, run: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    rng.set_stream(((stream as u64) << 48) | ((plant & FIELD) << 24) | (run & FIELD));
    rng
}
