//! Deterministic, portable random streams.
//!
//! Every random decision in the simulator, perception stand-ins and executor
//! draws from a [`SimRng`]. The generator is xoshiro256** seeded through
//! SplitMix64, and named substreams are derived from `(seed, tag)` with a
//! FNV-1a hash of the tag. All of it is integer arithmetic plus correctly
//! rounded IEEE operations, so a given seed yields the same stream on every
//! platform and can be re-implemented bit-for-bit in other languages:
//!
//! ```text
//! substream(seed, tag) = from_seed(seed ^ fnv1a64(tag))
//! from_seed(s)         = xoshiro256** state from four successive splitmix64(s) outputs
//! next_f64             = (next_u64 >> 11) * 2^-53
//! below(n)             = rejection sampling on next_u64 against the largest multiple of n
//! gaussian             = Box-Muller on (1 - next_f64, next_f64) using libm ln/sqrt/cos
//! ```

use std::f64::consts::PI;

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a hash.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    bytes.iter().fold(FNV_OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(FNV_PRIME))
}

/// One SplitMix64 step. Returns the output and advances `state`.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Stateless mix of a single value, used for hash-like derivations.
pub fn mix64(value: u64) -> u64 {
    let mut s = value;
    splitmix64(&mut s)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimRng {
    s: [u64; 4],
}

impl SimRng {
    pub fn from_seed(seed: u64) -> Self {
        let mut sm = seed;
        let s = [
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
            splitmix64(&mut sm),
        ];
        Self { s }
    }

    /// Independent stream for one module of one episode.
    pub fn substream(seed: u64, tag: &str) -> Self {
        Self::from_seed(seed ^ fnv1a64(tag.as_bytes()))
    }

    /// Derive a child stream without disturbing the parent's future sequence
    /// beyond a single draw.
    pub fn fork(&mut self, tag: &str) -> Self {
        let base = self.next_u64();
        Self::substream(base, tag)
    }

    pub fn next_u64(&mut self) -> u64 {
        let result = self.s[1].wrapping_mul(5).rotate_left(7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = self.s[3].rotate_left(45);
        result
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform integer in `[0, n)`. Panics if `n == 0`.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        let zone = u64::MAX - (u64::MAX % n) - 1;
        loop {
            let v = self.next_u64();
            if v <= zone {
                return v % n;
            }
        }
    }

    pub fn index(&mut self, len: usize) -> usize {
        self.below(len as u64) as usize
    }

    /// Uniform integer in the inclusive range `[lo, hi]`.
    pub fn range_i64(&mut self, lo: i64, hi: i64) -> i64 {
        assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        lo + self.below(span) as i64
    }

    pub fn range_f64(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Bernoulli trial. `p <= 0` never fires and `p >= 1` always fires,
    /// but one value is drawn either way so streams stay aligned.
    pub fn chance(&mut self, p: f64) -> bool {
        self.next_f64() < p
    }

    /// Standard normal sample.
    pub fn gaussian(&mut self) -> f64 {
        let u1 = 1.0 - self.next_f64();
        let u2 = self.next_f64();
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * PI * u2)
    }

    pub fn choose<'a, T>(&mut self, items: &'a [T]) -> Option<&'a T> {
        if items.is_empty() {
            None
        } else {
            Some(&items[self.index(items.len())])
        }
    }

    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.index(i + 1);
            items.swap(i, j);
        }
    }

    /// Current generator state, for logging.
    pub fn state(&self) -> [u64; 4] {
        self.s
    }
}
