//! Reproducible, splittable random streams.
//!
//! The generator identity is part of the replay contract: a stream is
//! ChaCha8 keyed by the 64-bit seed, and stream `i` of a run uses the
//! ChaCha stream number `i + 1` (the root itself runs on stream number 0).
//! Identical seed and stream therefore reproduce identical draws on any
//! platform.

use num_bigint::{BigUint, RandBigInt};
use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A seeded ChaCha8 stream. Replication `i` of an experiment samples from
/// `root.split(i)`; the split family is flat (children do not split again).
#[derive(Debug, Clone)]
pub struct RngStream {
    rng: ChaCha8Rng,
    seed: u64,
    stream: u64,
}

impl RngStream {
    /// Root stream for a seed (ChaCha stream number 0).
    pub fn from_seed(seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(0);
        RngStream {
            rng,
            seed,
            stream: 0,
        }
    }

    /// Independent child stream `index`, usable for one replication.
    /// Only the root may split; child streams are leaves.
    pub fn split(&self, index: u64) -> Self {
        debug_assert_eq!(self.stream, 0, "only the root stream splits");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(index.wrapping_add(1));
        RngStream {
            rng,
            seed: self.seed,
            stream: index.wrapping_add(1),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn stream(&self) -> u64 {
        self.stream
    }

    /// Uniform integer in `[0, bound)` for small exact draws.
    pub fn below_u64(&mut self, bound: u64) -> u64 {
        self.rng.gen_range(0..bound)
    }

    /// Uniform big integer in `[0, bound)` for exact categorical draws whose
    /// common denominator does not fit a machine word.
    pub fn below_biguint(&mut self, bound: &BigUint) -> BigUint {
        self.rng.gen_biguint_below(bound)
    }
}

impl RngCore for RngStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.rng.fill_bytes(dest)
    }

    fn try_fill_bytes(&mut self, dest: &mut [u8]) -> Result<(), rand::Error> {
        self.rng.try_fill_bytes(dest)
    }
}
