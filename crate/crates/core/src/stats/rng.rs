use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// The generator used for every random draw in the crate.
pub type StreamRng = ChaCha8Rng;

/// Generator for stream `stream` of the root `seed`.
///
/// Streams of one seed are independent keystreams of the same ChaCha key, so work
/// split by stream index is reproducible regardless of scheduling.
pub fn stream_rng(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Mixes a root seed with a path of labels into a child seed (SplitMix64 finalizer).
pub fn derive_seed(root: u64, path: &[u64]) -> u64 {
    let mut state = splitmix(root ^ 0x0005_eed0_f5a4_5e7a);
    for &label in path {
        state = splitmix(state ^ splitmix(label.wrapping_add(0x9e37_79b9_7f4a_7c15)));
    }
    state
}

fn splitmix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
