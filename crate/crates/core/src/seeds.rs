//! Seed derivation for independent deterministic RNG streams.
//!
//! Anything that needs several random streams from one user-facing seed
//! (forest trees, baseline runs, synthetic records) derives stream `t` as
//! `mix(seed, t)`. Streams are keyed to stable indices, never to memory or
//! iteration order, so serial and parallel execution agree bit for bit.

/// Derives the seed for stream `stream` from a master seed.
///
/// SplitMix64 finalizer; consecutive streams land far apart even for
/// small master seeds like 0 and 1.
pub fn mix(seed: u64, stream: u64) -> u64 {
    let mut z = seed.wrapping_add(stream.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
