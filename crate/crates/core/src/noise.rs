//! Random sources.
//!
//! The privacy channels draw from a [`NoiseSource`], which only has to produce
//! uniforms on the open unit interval. Laplace draws are derived from those by
//! inversion, so a source that always returns `0.5` turns every channel into
//! its noiseless counterpart.
//!
//! Seeds are split with [`derive_seed`], and privatisation noise is keyed by
//! time index through [`CounterNoise`], so a given `(seed, time, bin, kind)`
//! always maps to the same draw regardless of how many replications run or in
//! what order.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A source of uniform draws on `(0, 1)`.
pub trait NoiseSource {
    fn uniform(&mut self) -> f64;
}

/// Always returns `0.5`: the median of every symmetric noise law used here.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroNoise;

impl NoiseSource for ZeroNoise {
    fn uniform(&mut self) -> f64 {
        0.5
    }
}

/// Adapts any `rand` generator. The 53-bit mantissa is offset by half an ulp
/// so the result never hits 0 or 1.
#[derive(Debug, Clone)]
pub struct RngNoise<R>(pub R);

impl<R: RngCore> NoiseSource for RngNoise<R> {
    fn uniform(&mut self) -> f64 {
        ((self.0.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }
}

/// Seeded ChaCha8 stream wrapped as a [`NoiseSource`].
pub type SeededNoise = RngNoise<ChaCha8Rng>;

impl SeededNoise {
    pub fn from_seed(seed: u64) -> Self {
        RngNoise(ChaCha8Rng::seed_from_u64(seed))
    }
}

/// Counter-keyed noise: each time index gets its own ChaCha stream.
///
/// Within a stream the draw order is fixed by the caller (indicators first,
/// then responses, bin by bin), which pins every draw to a
/// `(time, bin, kind)` triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CounterNoise {
    seed: u64,
}

impl CounterNoise {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn at(&self, time_index: u64) -> SeededNoise {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(time_index);
        RngNoise(rng)
    }
}

/// SplitMix64 finaliser applied to `(master, index)`.
#[must_use]
pub fn derive_seed(master: u64, index: u64) -> u64 {
    let mut z = master.wrapping_add(0x9E37_79B9_7F4A_7C15).wrapping_add(index.wrapping_mul(0xBF58_476D_1CE4_E5B9));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
