//! Deterministic pseudo-random numbers for synthetic data generation.
//!
//! The generator is splitmix64 with the standard finalizer constants,
//! mapped to `(0, 1]` uniforms and Box–Muller Gaussians. Transcendentals
//! come from the `libm` crate (pure-software implementations), so the same
//! seed produces the same stream on every platform and toolchain — a
//! requirement for byte-identical synthetic datasets.

use std::f64::consts::TAU;

/// Splitmix64 stream with a one-deep cache for the second Box–Muller
/// variate.
#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
    cached_gaussian: Option<f64>,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self {
            state: seed,
            cached_gaussian: None,
        }
    }

    /// Next raw 64-bit output.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9E37_79B9_7F4A_7C15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^ (z >> 31)
    }

    /// Uniform draw in `(0, 1]`: the top 53 bits, shifted into the unit
    /// interval with a +1 offset so zero is excluded and `ln` stays finite.
    pub fn next_f64(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9007199254740992.0)
    }

    /// Standard normal draw via Box–Muller. Each pair of uniforms yields
    /// two variates; the sine variate is cached and returned by the next
    /// call, so a sequence of draws consumes exactly one uniform per
    /// Gaussian on average.
    pub fn next_gaussian(&mut self) -> f64 {
        if let Some(z) = self.cached_gaussian.take() {
            return z;
        }
        let u1 = self.next_f64();
        let u2 = self.next_f64();
        let r = (-2.0 * libm::log(u1)).sqrt();
        let theta = TAU * u2;
        self.cached_gaussian = Some(r * libm::sin(theta));
        r * libm::cos(theta)
    }

    /// Uniform integer in `[0, bound)` by rejection, so small bounds are
    /// unbiased.
    ///
    /// # Panics
    ///
    /// Panics if `bound == 0`.
    pub fn next_below(&mut self, bound: u64) -> u64 {
        assert!(bound > 0, "bound must be positive");
        let limit = u64::MAX - u64::MAX % bound;
        loop {
            let x = self.next_u64();
            if x < limit {
                return x % bound;
            }
        }
    }
}
