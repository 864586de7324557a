use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Words of keystream consumed per projection (one `u64` draw).
const WORDS_PER_DRAW: u128 = 2;

/// Random stream for the weights of one layer at one iteration, positioned at
/// weight `offset`.
///
/// Every `(seed, layer, iteration, weight)` maps to a fixed slice of a ChaCha8
/// keystream: the layer selects the stream, and iteration and weight index
/// select the word position. Updates are therefore reproducible regardless of
/// how the weights are split across threads.
pub fn transition_rng(seed: u64, layer: u64, iteration: u64, layer_len: usize, offset: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(layer);
    let draw = iteration as u128 * layer_len as u128 + offset as u128;
    rng.set_word_pos(draw * WORDS_PER_DRAW);
    rng
}
