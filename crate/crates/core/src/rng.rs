//! Deterministic random number generation.
//!
//! All randomness in the crate flows through [`Rng`], a xoshiro256** generator
//! seeded through splitmix64. Streams are derived from a `(seed, tag)` pair so
//! that Monte Carlo replications are order-independent and parallel-safe: the
//! stream for replication `r` depends only on the run seed and `r`, never on
//! how many replications ran before it or on which thread it runs.
//!
//! Standard normals use the Box-Muller transform (two uniforms per pair, the
//! second value cached), so the draw count per normal is fixed.

#[inline]
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[inline]
fn rotl(x: u64, k: u32) -> u64 {
    x.rotate_left(k)
}

/// xoshiro256** with splitmix64 seeding.
#[derive(Clone, Debug)]
pub struct Rng {
    s: [u64; 4],
    cached_normal: Option<f64>,
}

impl Rng {
    /// Generator for a plain seed.
    pub fn seeded(seed: u64) -> Self {
        Self::stream(seed, 0)
    }

    /// Independent stream identified by `(seed, tag)`.
    ///
    /// Tags partition a run's randomness: replication index, field draw,
    /// probe generation and so on each get their own tag space.
    pub fn stream(seed: u64, tag: u64) -> Self {
        let mut st = seed ^ tag.wrapping_mul(0xA24B_AED4_963E_E407);
        let mut s = [0u64; 4];
        for slot in s.iter_mut() {
            *slot = splitmix64(&mut st);
        }
        // xoshiro must not start from the all-zero state.
        if s == [0, 0, 0, 0] {
            s[0] = 0x9E37_79B9_7F4A_7C15;
        }
        Rng {
            s,
            cached_normal: None,
        }
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let result = rotl(self.s[1].wrapping_mul(5), 7).wrapping_mul(9);
        let t = self.s[1] << 17;
        self.s[2] ^= self.s[0];
        self.s[3] ^= self.s[1];
        self.s[1] ^= self.s[2];
        self.s[0] ^= self.s[3];
        self.s[2] ^= t;
        self.s[3] = rotl(self.s[3], 45);
        result
    }

    /// Uniform in the half-open interval (0, 1].
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        (((self.next_u64() >> 11) as f64) + 1.0) * (1.0 / 9007199254740992.0)
    }

    /// Uniform integer in `[lo, hi]` (inclusive), unbiased via 128-bit multiply.
    pub fn uniform_int(&mut self, lo: i64, hi: i64) -> i64 {
        debug_assert!(lo <= hi);
        let span = (hi - lo) as u64 + 1;
        let wide = (self.next_u64() as u128) * (span as u128);
        lo + (wide >> 64) as i64
    }

    /// Standard normal via Box-Muller.
    pub fn normal(&mut self) -> f64 {
        if let Some(z) = self.cached_normal.take() {
            return z;
        }
        let u1 = self.uniform();
        let u2 = self.uniform();
        let r = (-2.0 * u1.ln()).sqrt();
        let theta = std::f64::consts::TAU * u2;
        self.cached_normal = Some(r * theta.sin());
        r * theta.cos()
    }

    /// Fill `out` with iid standard normals.
    pub fn fill_normal(&mut self, out: &mut [f64]) {
        for v in out.iter_mut() {
            *v = self.normal();
        }
    }
}
