//! Counter-based deterministic randomness.
//!
//! Every random quantity in this crate (model weights, probe fields, Monte
//! Carlo paths, sample points) is drawn from its own ChaCha8 stream addressed
//! by (seed, purpose tag, index). Streams are independent of evaluation order
//! and thread count: weight i or path i always sees the same bytes.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Purpose tags keep streams for different uses disjoint even at equal seeds.
pub mod tag {
    pub const POTENTIAL_WEIGHTS: u64 = 1;
    pub const MAGNETIC_X: u64 = 2;
    pub const MAGNETIC_Y: u64 = 3;
    pub const PROBE_F: u64 = 4;
    pub const PROBE_G: u64 = 5;
    pub const PATHS: u64 = 6;
    pub const EIGEN_START: u64 = 7;
    pub const SAMPLE_POINTS: u64 = 8;
    pub const EXIT_MC: u64 = 9;
}

/// Stream for (seed, tag, index). The tag is folded into the key by an odd
/// multiplier (a bijection on u64), the index selects the ChaCha stream.
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    let key = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    let mut rng = ChaCha8Rng::seed_from_u64(key);
    rng.set_stream(index);
    rng
}
