//! Seeded random substreams.
//!
//! Every run seed fans out into independent ChaCha streams so that, for
//! example, the KAN and DCT-KAN variants of one run see the same series and
//! target noise while drawing their own initialization.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stream {
    Series = 0,
    TargetNoise = 1,
    Init = 2,
    Shuffle = 3,
    Probe = 4,
}

pub fn substream(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
