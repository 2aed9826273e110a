use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Independent stream `index` of the generator seeded with `seed`.
///
/// Every trajectory of an ensemble draws from its own stream, so results do
/// not depend on how trajectories are scheduled across threads.
pub fn stream_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
