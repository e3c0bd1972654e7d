//! Seeded random streams.
//!
//! Every consumer (a Monte Carlo replicate, a bootstrap replicate) draws from
//! its own ChaCha8 stream selected by a key derived from its index, so the
//! numbers it sees never depend on execution order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Name of the uniform generator, recorded in reports.
pub const GENERATOR: &str = "chacha8";

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Folds a key path into a single 64-bit value.
pub fn derive(seed: u64, key: &[u64]) -> u64 {
    key.iter()
        .fold(splitmix64(seed), |acc, &k| splitmix64(acc ^ splitmix64(k)))
}

/// Independent stream for `(seed, key...)`.
pub fn stream(seed: u64, key: &[u64]) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(derive(seed, key));
    rng
}

/// Uniform draw on the open interval (0, 1) from 53 random bits.
#[inline]
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw by inverse CDF.
#[inline]
pub fn standard_normal<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    crate::link::normal_quantile(open_unit(rng))
}

/// Uniform index in `0..n` (Lemire's multiply-shift; bias below 2^-32 for the sizes used here).
#[inline]
pub fn index<R: RngCore + ?Sized>(rng: &mut R, n: usize) -> usize {
    ((rng.next_u64() as u128 * n as u128) >> 64) as usize
}
