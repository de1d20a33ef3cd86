//! Seed derivation for reproducible, parallel-safe Monte Carlo.
//!
//! Every random number in the crate comes from a ChaCha8 generator built by
//! [`stream_rng`]. The derivation is fixed and versioned with the crate:
//!
//! * a 64-bit seed is expanded into the 32-byte ChaCha key by taking four
//!   consecutive outputs of SplitMix64 started at that seed (little-endian);
//! * independent roles inside one path (scenario draw, bridge noise) use
//!   distinct ChaCha stream ids ([`SCENARIO_STREAM`], [`BRIDGE_STREAM`]);
//! * path `j` of an ensemble with master seed `s` uses the seed
//!   [`substream_seed`]`(s, j)`, the `(j + 1)`-th SplitMix64 output started
//!   at `s`.
//!
//! Results therefore depend only on `(master_seed, path_index)`, never on
//! thread count or scheduling order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// ChaCha stream used for the `(cash, flow)` scenario draw.
pub const SCENARIO_STREAM: u64 = 0;
/// ChaCha stream used for Brownian bridge noise.
pub const BRIDGE_STREAM: u64 = 1;

#[inline]
fn splitmix64_mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// The `(index + 1)`-th output of a SplitMix64 generator seeded with `master`.
#[inline]
pub fn substream_seed(master: u64, index: u64) -> u64 {
    splitmix64_mix(master.wrapping_add(GOLDEN_GAMMA.wrapping_mul(index.wrapping_add(1))))
}

/// A ChaCha8 generator keyed by `seed` and positioned on `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut key = [0u8; 32];
    for (i, chunk) in key.chunks_exact_mut(8).enumerate() {
        chunk.copy_from_slice(&substream_seed(seed, i as u64).to_le_bytes());
    }
    let mut rng = ChaCha8Rng::from_seed(key);
    rng.set_stream(stream);
    rng
}
