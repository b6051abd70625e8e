use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent random streams. Each stream of a seed is a separate ChaCha
/// keystream, so adding draws to one never shifts another.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Positions = 1,
    Direct = 2,
    Ris = 3,
    Noise = 4,
    Agent = 5,
    Replay = 6,
    Tasks = 7,
}

pub fn stream_rng(seed: u64, stream: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream as u64);
    rng
}
