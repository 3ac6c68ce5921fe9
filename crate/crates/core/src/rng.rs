//! Keyed random streams.
//!
//! Every random draw in the crate comes from a ChaCha20 stream whose key is
//! derived from a user seed plus a tuple of identifiers (start index, study
//! condition, replication, ...). Streams therefore do not depend on the
//! order or the thread in which jobs execute.

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Generator for the stream identified by `(seed, key...)`.
pub fn keyed_rng(seed: u64, key: &[u64]) -> ChaCha20Rng {
    let mut state = seed;
    let mut acc = splitmix64(&mut state);
    for &k in key {
        state ^= k.wrapping_mul(0xd6e8_feb8_6659_fd93) ^ acc;
        acc = splitmix64(&mut state);
    }
    let mut bytes = [0u8; 32];
    for chunk in bytes.chunks_mut(8) {
        chunk.copy_from_slice(&splitmix64(&mut state).to_le_bytes());
    }
    ChaCha20Rng::from_seed(bytes)
}
