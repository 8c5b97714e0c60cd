//! Deterministic counter-based Gaussian generator for Monte-Carlo paths.
//! Every draw is a pure function of (master seed, path, step, edge, channel),
//! so paths can run in any order — or concurrently — without reordering
//! draws, and any single draw can be reproduced in isolation.

/// 64-bit avalanche (the splitmix64 finalizer): every input bit affects
/// every output bit.
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Per-path generator: cheap to construct, copyable, stateless between
/// calls.
#[derive(Debug, Clone, Copy)]
pub struct PathRng {
    base: u64,
}

impl PathRng {
    pub fn new(master_seed: u64, path_index: u64) -> Self {
        let mut h = mix(master_seed ^ 0x9e37_79b9_7f4a_7c15);
        h = mix(h ^ path_index.wrapping_mul(0xff51_afd7_ed55_8ccd));
        PathRng { base: h }
    }

    fn word(&self, a: u64, b: u64, c: u64, lane: u64) -> u64 {
        let mut h = self.base;
        h = mix(h ^ a.wrapping_add(0x9e37_79b9_7f4a_7c15));
        h = mix(h ^ b.wrapping_add(0xbf58_476d_1ce4_e5b9));
        h = mix(h ^ c.wrapping_add(0x94d0_49bb_1331_11eb));
        mix(h ^ lane.wrapping_add(0x2545_f491_4f6c_dd1d))
    }

    /// Map a word to the open interval (0, 1): 53 mantissa bits centered in
    /// each cell, so 0 and 1 are unreachable and logs are safe.
    fn unit(w: u64) -> f64 {
        ((w >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    /// One standard normal for the keyed counter (step, edge, channel), via
    /// Box–Muller (cosine branch).
    pub fn normal(&self, step: usize, edge: usize, channel: usize) -> f64 {
        let u1 = Self::unit(self.word(step as u64, edge as u64, channel as u64, 0));
        let u2 = Self::unit(self.word(step as u64, edge as u64, channel as u64, 1));
        (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
    }

    /// Uniform draw in [lo, hi] keyed by a coordinate index, used for
    /// reproducible initial conditions. Keyed disjointly from `normal`.
    pub fn uniform_in(&self, coord: usize, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * Self::unit(self.word(u64::MAX, coord as u64, 0, 2))
    }
}
