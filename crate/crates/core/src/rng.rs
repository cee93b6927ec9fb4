//! Counter-based random streams.
//!
//! Every random quantity in the crate is drawn from an [`Rng`] identified by
//! a `(seed, stream)` pair. The generator is ChaCha8 with the seed expanded
//! into the key and the stream id used as the ChaCha stream (nonce), so
//! replicas indexed by stream are independent and can be generated in any
//! order or on any thread.
//!
//! [`Rng::fork`] derives child generators from the *identity* of a
//! generator, never from its consumed state, which keeps sub-streams stable
//! when the amount of randomness drawn elsewhere changes.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

#[derive(Clone, Debug)]
pub struct Rng {
    seed: u64,
    stream: u64,
    inner: ChaCha8Rng,
}

/// SplitMix64 finalizer.
pub(crate) fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

impl Rng {
    pub fn new(seed: u64, stream: u64) -> Self {
        let mut inner = ChaCha8Rng::seed_from_u64(seed);
        inner.set_stream(stream);
        Self {
            seed,
            stream,
            inner,
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Generator for replica `replica` under the same master seed.
    pub fn replica(&self, replica: u64) -> Rng {
        Rng::new(self.seed, replica)
    }

    /// Independent child generator labelled by `tag`, keeping the stream id.
    pub fn fork(&self, tag: u64) -> Rng {
        let child = mix64(self.seed ^ mix64(tag.wrapping_add(0x5EED)));
        Rng::new(child, self.stream)
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        (self.inner.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `0..n` (`n > 0`).
    pub fn below(&mut self, n: usize) -> usize {
        debug_assert!(n > 0);
        ((self.inner.next_u64() as u128 * n as u128) >> 64) as usize
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.inner.fill_bytes(dst)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn same_identity_same_sequence() {
        let mut a = Rng::new(7, 3);
        let mut b = Rng::new(7, 3);
        for _ in 0..100 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn streams_differ() {
        let mut a = Rng::new(7, 3);
        let mut b = Rng::new(7, 4);
        let same = (0..64).filter(|_| a.next_u64() == b.next_u64()).count();
        assert_eq!(same, 0);
    }

    #[test]
    fn fork_ignores_consumed_state() {
        let a = Rng::new(11, 2);
        let mut b = a.clone();
        b.next_u64();
        let mut fa = a.fork(5);
        let mut fb = b.fork(5);
        assert_eq!(fa.next_u64(), fb.next_u64());
        assert_eq!(fa.stream(), 2);
    }

    #[test]
    fn independent_streams_uncorrelated() {
        let n = 20_000;
        let mut a = Rng::new(1, 0);
        let mut b = Rng::new(1, 1);
        let xs: Vec<f64> = (0..n).map(|_| a.standard_normal()).collect();
        let ys: Vec<f64> = (0..n).map(|_| b.standard_normal()).collect();
        let corr: f64 = xs.iter().zip(&ys).map(|(x, y)| x * y).sum::<f64>() / n as f64;
        // 4 standard errors of the sample correlation
        assert!(corr.abs() < 4.0 / (n as f64).sqrt(), "corr {corr}");
    }

    #[test]
    fn below_in_range() {
        let mut r = Rng::new(3, 0);
        for _ in 0..1000 {
            assert!(r.below(7) < 7);
        }
    }
}
