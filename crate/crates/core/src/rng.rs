//! Seeded random streams.
//!
//! Every stream is a ChaCha20 generator keyed by a `u64` seed with an explicit
//! stream number, so any draw can be addressed by `(seed, stream)` without
//! replaying earlier draws. Normal variates use the cosine branch of the
//! Box–Muller transform on two 53-bit uniforms:
//!
//! ```text
//! u1 = (w1 >> 11 + 1) / 2^53      in (0, 1]
//! u2 = (w2 >> 11) / 2^53          in [0, 1)
//! z  = sqrt(-2 ln u1) cos(2 pi u2)
//! ```

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub type StreamRng = ChaCha20Rng;

const TWO_POW_NEG_53: f64 = 1.0 / (1u64 << 53) as f64;

/// Generator for stream `stream` of `seed`.
pub fn stream(seed: u64, stream: u64) -> StreamRng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Uniform in `[0, 1)` with 53 bits of resolution.
pub fn uniform(rng: &mut impl RngCore) -> f64 {
    (rng.next_u64() >> 11) as f64 * TWO_POW_NEG_53
}

/// Standard normal variate by Box–Muller (cosine branch).
pub fn standard_normal(rng: &mut impl RngCore) -> f64 {
    let u1 = ((rng.next_u64() >> 11) + 1) as f64 * TWO_POW_NEG_53;
    let u2 = uniform(rng);
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// The standard normal variate addressed by `(seed, index)`.
pub fn standard_normal_at(seed: u64, index: u64) -> f64 {
    standard_normal(&mut stream(seed, index))
}
