//! Deterministic counter-based random generation.
//!
//! Every draw is a pure function of `(seed, stream, counter)` through the
//! SplitMix64 finalizer, so generated data does not depend on draw order,
//! thread interleaving, or platform. Gaussian draws go through Box-Muller
//! with `libm`, which is a software implementation and therefore
//! bit-identical everywhere.

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(GOLDEN);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// FNV-1a over bytes; used to derive seeds from names and to hash configs.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01B3);
    }
    h
}

/// Stateless counter-based generator.
#[derive(Clone, Copy, Debug)]
pub struct CounterRng {
    seed: u64,
}

impl CounterRng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed: splitmix64(seed),
        }
    }

    /// Derive an independent sub-generator for a named stream.
    pub fn stream(&self, stream: u64) -> Self {
        Self {
            seed: splitmix64(self.seed ^ stream.wrapping_mul(GOLDEN)),
        }
    }

    #[inline]
    pub fn raw(&self, counter: u64) -> u64 {
        splitmix64(self.seed.wrapping_add(counter.wrapping_mul(GOLDEN)))
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    #[inline]
    pub fn uniform01(&self, counter: u64) -> f64 {
        (self.raw(counter) >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Uniform in `[-1, 1)`.
    #[inline]
    pub fn unit(&self, counter: u64) -> f64 {
        2.0 * self.uniform01(counter) - 1.0
    }

    /// Standard normal draw; consumes counters `2c` and `2c + 1`.
    pub fn gaussian(&self, counter: u64) -> f64 {
        // u1 in (0, 1] so the log is finite.
        let u1 = ((self.raw(2 * counter) >> 11) + 1) as f64 * (1.0 / (1u64 << 53) as f64);
        let u2 = self.uniform01(2 * counter + 1);
        libm::sqrt(-2.0 * libm::log(u1)) * libm::cos(2.0 * core::f64::consts::PI * u2)
    }
}

/// Sequential convenience wrapper over [`CounterRng`] for shuffles and
/// one-off draws where an explicit counter would be noise.
#[derive(Clone, Debug)]
pub struct SeqRng {
    rng: CounterRng,
    counter: u64,
}

impl SeqRng {
    pub fn new(seed: u64) -> Self {
        Self {
            rng: CounterRng::new(seed),
            counter: 0,
        }
    }

    pub fn next_u64(&mut self) -> u64 {
        let v = self.rng.raw(self.counter);
        self.counter += 1;
        v
    }

    /// Uniform in `[0, bound)` via 128-bit multiply reduction.
    pub fn next_below(&mut self, bound: usize) -> usize {
        debug_assert!(bound > 0);
        ((self.next_u64() as u128 * bound as u128) >> 64) as usize
    }

    pub fn gaussian(&mut self) -> f64 {
        let v = self.rng.gaussian(self.counter);
        self.counter += 1;
        v
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = self.next_below(i + 1);
            items.swap(i, j);
        }
    }
}
