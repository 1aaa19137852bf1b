//! SplitMix64, a 64-bit add/shift/multiply generator.
//!
//! Chosen over a library generator so the exact bit stream is pinned down
//! independent of crate versions: the whole generator is the six lines of
//! [`SplitMix64::next_u64`]. Independent streams are derived from a base seed
//! and a stream index with [`SplitMix64::stream`].

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// SplitMix64 output finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        Self { state: seed }
    }

    /// Stream `index` of base `seed`; distinct indices give unrelated streams.
    pub fn stream(seed: u64, index: u64) -> Self {
        Self::new(seed ^ mix64(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix64(self.state)
    }

    /// Uniform on the open interval (0, 1): `(⌊x / 2¹¹⌋ + ½) · 2⁻⁵³`.
    #[inline]
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform on `[lo, hi)`.
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_open01()
    }
}
