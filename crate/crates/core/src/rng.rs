//! Deterministic, hierarchically keyed random substreams.
//!
//! Every stochastic component draws from a ChaCha stream derived from the
//! master seed plus an explicit integer path, e.g. `(seed, trial)` for a Monte
//! Carlo trial or `(seed, round, agent, attempt)` for an agent invocation.
//! Identical paths yield identical streams on every platform, which is what
//! makes paired-seed comparisons and bit-reproducible reports possible.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha12Rng;

/// SplitMix64 finalizer; mixes one word into the running state.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent stream from `seed` and a key path.
///
/// The path is mixed word by word, so `substream(s, &[1, 2])` and
/// `substream(s, &[2, 1])` are unrelated streams.
pub fn substream(seed: u64, path: &[u64]) -> ChaCha12Rng {
    let mut state = seed ^ 0x6a09_e667_f3bc_c908;
    let mut acc = splitmix64(&mut state);
    for &word in path {
        state ^= word.wrapping_mul(0xd6e8_feb8_6659_fd93);
        acc ^= splitmix64(&mut state);
    }
    let mut key = [0u8; 32];
    for chunk in key.chunks_exact_mut(8) {
        acc = splitmix64(&mut state) ^ acc.rotate_left(17);
        chunk.copy_from_slice(&acc.to_le_bytes());
    }
    ChaCha12Rng::from_seed(key)
}

/// Standard normal draw via Box-Muller; two uniforms per call.
pub fn standard_normal(rng: &mut ChaCha12Rng) -> f64 {
    use rand::Rng;
    // Guard the log against u1 == 0.
    let u1: f64 = loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            break u;
        }
    };
    let u2: f64 = rng.random();
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}
