//! Deterministic, platform-independent random streams.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bits of the stream id reserved for the sample index in
/// [`RngStream::for_sample`].
const INDEX_BITS: u32 = 40;

/// ChaCha8 stream keyed by `(seed, stream_id)`.
///
/// Identical keys yield identical sequences on every platform, so work can
/// be split across threads without changing results.
#[derive(Debug, Clone)]
pub struct RngStream(ChaCha8Rng);

impl RngStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(stream_id);
        RngStream(rng)
    }

    /// Stream for one sample of one epoch.
    pub fn for_sample(seed: u64, epoch: u64, index: usize) -> Self {
        let index = index as u64;
        assert!(index < 1 << INDEX_BITS, "sample index {index} too large");
        RngStream::new(seed, (epoch << INDEX_BITS) | index)
    }

    /// Uniform in `[0, 1)` from exactly one 64-bit draw.
    pub fn next_unit(&mut self) -> f64 {
        unit_from_bits(self.0.next_u64())
    }

    /// Uniform in `0..n` from exactly one 64-bit draw (`n >= 1`).
    pub fn next_below(&mut self, n: u64) -> u64 {
        below_from_bits(self.0.next_u64(), n)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.0.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.0.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.0.fill_bytes(dst)
    }
}

pub(crate) fn unit_from_bits(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Multiply-high range reduction. Bias is at most `n / 2^64`.
pub(crate) fn below_from_bits(bits: u64, n: u64) -> u64 {
    debug_assert!(n >= 1);
    ((u128::from(bits) * u128::from(n)) >> 64) as u64
}
