//! Minimal deterministic pseudo-random number generator.
//!
//! Mesh perturbation and power-method start vectors must be reproducible
//! bit-for-bit from a seed across platforms and releases, so the generator is
//! pinned here instead of depending on an external crate whose stream might
//! change. This is Vigna's xorshift64* (shifts 12/25/27, multiplier
//! 0x2545F4914F6CDD1D), which is plenty for perturbations and start vectors;
//! it is not a cryptographic generator.

/// xorshift64* generator with a fixed, documented parameterization.
#[derive(Debug, Clone)]
pub struct XorShift64Star {
    state: u64,
}

impl XorShift64Star {
    /// Creates a generator from a seed. The all-zero state is invalid for
    /// xorshift, so seed 0 is mapped to a fixed nonzero constant.
    pub fn new(seed: u64) -> Self {
        Self {
            state: if seed == 0 { 0x9E3779B97F4A7C15 } else { seed },
        }
    }

    /// Next raw 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        let mut x = self.state;
        x ^= x >> 12;
        x ^= x << 25;
        x ^= x >> 27;
        self.state = x;
        x.wrapping_mul(0x2545F4914F6CDD1D)
    }

    /// Uniform draw in `[0, 1)` using the top 53 bits of the stream.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform draw in `[-0.5, 0.5)`; convenient for start vectors whose
    /// mean should not be biased away from zero.
    pub fn next_centered(&mut self) -> f64 {
        self.next_f64() - 0.5
    }
}
