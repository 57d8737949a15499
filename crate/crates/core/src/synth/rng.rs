//! Counter-based pseudo-random numbers.
//!
//! A value is a pure function of `(seed, stream, counter)`:
//!
//! ```text
//! key = seed XOR (stream * 0xD1B54A32D192ED03)
//! z   = key + (counter + 1) * 0x9E3779B97F4A7C15
//! z   = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9
//! z   = (z XOR (z >> 27)) * 0x94D049BB133111EB
//! z   =  z XOR (z >> 31)
//! ```
//!
//! with all arithmetic wrapping modulo 2^64 (the SplitMix64 finalizer). A
//! uniform double in [0, 1) is `(z >> 11) * 2^-53`.

pub fn mix(seed: u64, stream: u64, counter: u64) -> u64 {
    let key = seed ^ stream.wrapping_mul(0xD1B5_4A32_D192_ED03);
    let mut z = key.wrapping_add(counter.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Uniform in [0, 1).
pub fn uniform(seed: u64, stream: u64, counter: u64) -> f64 {
    (mix(seed, stream, counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Uniform in [-1, 1).
pub fn symmetric(seed: u64, stream: u64, counter: u64) -> f64 {
    2.0 * uniform(seed, stream, counter) - 1.0
}
