//! Counter-based random streams for reproducible parallel simulation.
//!
//! Every path owns a stream keyed by `(seed, stream_id)`; inside a path, draw
//! `k` of step `j` reads counter `j * stride + k`. The generator is a pure
//! function of `(key, counter)`, so a path's trajectory is identical no matter
//! which worker thread executes it or in what order paths run.

const GAMMA: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer. Full-avalanche mix of one 64-bit word.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derive an unrelated seed for a named phase of a larger experiment, so that
/// e.g. a validation sweep and the production ensemble never share draws.
pub fn derive_seed(seed: u64, phase: u64) -> u64 {
    mix64(seed ^ mix64(phase.wrapping_mul(GAMMA) ^ 0x5bf0_3635).wrapping_add(GAMMA))
}

/// One random stream: a key plus a counter position.
#[derive(Debug, Clone, Copy)]
pub struct CounterStream {
    key: u64,
    counter: u64,
}

impl CounterStream {
    pub fn new(seed: u64, stream_id: u64) -> Self {
        // Two mixing rounds decouple the seed and stream words.
        let key = mix64(seed.wrapping_add(GAMMA) ^ mix64(stream_id ^ 0x6a09_e667_f3bc_c909));
        CounterStream { key, counter: 0 }
    }

    /// Reposition the stream at an absolute counter. Used by the engine to pin
    /// every draw of step `j` to a fixed counter range.
    #[inline]
    pub fn seek(&mut self, counter: u64) {
        self.counter = counter;
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        let c = self.counter;
        self.counter = c.wrapping_add(1);
        mix64(self.key ^ c.wrapping_mul(GAMMA))
    }

    /// Uniform in (0, 1]. The open lower end keeps `ln` finite in Box-Muller.
    #[inline]
    pub fn uniform_oc(&mut self) -> f64 {
        (((self.next_u64() >> 11) + 1) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Uniform in [0, 1).
    #[inline]
    pub fn uniform(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64) * (1.0 / 9_007_199_254_740_992.0)
    }

    /// Standard Gaussian via Box-Muller (cosine branch). Consumes exactly two
    /// counter slots, which keeps the per-step draw layout static.
    #[inline]
    pub fn gaussian(&mut self) -> f64 {
        let u1 = self.uniform_oc();
        let u2 = self.uniform();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }
}
