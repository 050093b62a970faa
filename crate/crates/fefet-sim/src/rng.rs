//! Deterministic random streams.
//!
//! Every stochastic quantity in the simulator (device variation, weight
//! initialization, shuffling, read noise) draws from a [`Stream`] derived
//! from a master seed and a chain of integer labels. Derivation is
//! counter-based, so independent streams for e.g. every crossbar cell can
//! be created in any order (or in parallel) and still produce identical
//! values run to run.

/// SplitMix64-style counter stream.
#[derive(Debug, Clone)]
pub struct Stream {
    state: u64,
}

#[inline]
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

impl Stream {
    /// Root stream for a master seed.
    pub fn new(seed: u64) -> Self {
        Stream {
            state: mix64(seed ^ 0xa076_1d64_78bd_642f),
        }
    }

    /// Derive an independent child stream identified by `label`.
    ///
    /// Derivation does not advance `self`, so a parent can hand out any
    /// number of children irrespective of the order they are requested in.
    pub fn derive(&self, label: u64) -> Self {
        Stream {
            state: mix64(self.state ^ mix64(label ^ 0xe703_7ed1_a0b4_28db)),
        }
    }

    /// Next raw 64-bit value.
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }

    /// Uniform sample in `[0, 1)` with 53-bit resolution.
    pub fn next_f64(&mut self) -> f64 {
        const SCALE: f64 = 1.0 / (1u64 << 53) as f64;
        (self.next_u64() >> 11) as f64 * SCALE
    }

    /// Uniform sample in `[lo, hi)`.
    pub fn next_range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.next_f64()
    }

    /// Standard normal sample (Box-Muller, both uniforms consumed per call).
    pub fn next_gaussian(&mut self) -> f64 {
        // u1 strictly positive so the log is finite.
        let u1 = loop {
            let u = self.next_f64();
            if u > 0.0 {
                break u;
            }
        };
        let u2 = self.next_f64();
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Fisher-Yates shuffle.
    pub fn shuffle<T>(&mut self, items: &mut [T]) {
        for i in (1..items.len()).rev() {
            let j = (self.next_u64() % (i as u64 + 1)) as usize;
            items.swap(i, j);
        }
    }
}
