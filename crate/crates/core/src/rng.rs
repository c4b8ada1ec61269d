//! Counter-addressed random streams.
//!
//! Every innovation index `i` of a row owns a fixed block of
//! [`WORDS_PER_INDEX`] 32-bit words of a ChaCha8 keystream keyed by the row
//! seed. Sequential generation therefore yields exactly the values that
//! seeking to index `i` would, so rows and replicates can be produced in any
//! order or in parallel without changing a single bit.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Two `u64` draws per innovation index.
pub const WORDS_PER_INDEX: u128 = 4;

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of replicate `r` under master seed `master`.
///
/// `replicate_seed(master, r) = splitmix64(master ^ splitmix64(r))`.
pub fn replicate_seed(master: u64, replicate: u64) -> u64 {
    splitmix64(master ^ splitmix64(replicate))
}

/// Uniform on [0, 1) with 53 bits of resolution.
#[inline]
pub fn unit_f64(bits: u64) -> f64 {
    (bits >> 11) as f64 * (1.0 / 9_007_199_254_740_992.0)
}

#[derive(Clone, Debug)]
pub struct InnovationStream {
    rng: ChaCha8Rng,
}

impl InnovationStream {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Stream positioned at innovation `index` (0-based).
    pub fn at(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_word_pos(index as u128 * WORDS_PER_INDEX);
        Self { rng }
    }

    #[inline]
    fn next_pair(&mut self) -> (u64, u64) {
        (self.rng.next_u64(), self.rng.next_u64())
    }

    /// Uniform(0,1) innovation; consumes one index block.
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        unit_f64(self.next_pair().0)
    }

    /// Standard normal innovation via Box-Muller; consumes one index block.
    #[inline]
    pub fn normal(&mut self) -> f64 {
        let (a, b) = self.next_pair();
        let u1 = 1.0 - unit_f64(a); // (0, 1]
        let u2 = unit_f64(b);
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fair coin; consumes one index block.
    #[inline]
    pub fn coin(&mut self) -> bool {
        self.next_pair().0 >> 63 == 1
    }
}
