//! SplitMix64, the only random source in the engine.
//!
//! The generator, the seed derivations and the sampling routine here are part
//! of the determinism contract: any implementation that follows them
//! bit-for-bit produces the same plans and cohort reports.
//!
//! * state advances by `0x9E37_79B9_7F4A_7C15` (wrapping) and each output is
//!   [`mix`] of the new state;
//! * `below(n)` is `next_u64() % n`;
//! * `unit_f64()` is `(next_u64() >> 11) * 2^-53`.

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

/// The SplitMix64 output finalizer.
pub fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform-ish integer in `0..n` by plain modulo. `n` must be non-zero.
    pub fn below(&mut self, n: u64) -> u64 {
        assert!(n > 0, "below(0)");
        self.next_u64() % n
    }

    /// Uniform in `[0, 1)` with 53 bits of precision.
    pub fn unit_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

/// Seed of the `index`-th child stream of `master`.
pub fn derive_seed(master: u64, index: u64) -> u64 {
    mix(master ^ mix(index.wrapping_add(1).wrapping_mul(GOLDEN_GAMMA)))
}

/// 64-bit FNV-1a.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xCBF2_9CE4_8422_2325;
    for &b in bytes {
        hash ^= u64::from(b);
        hash = hash.wrapping_mul(0x0000_0100_0000_01B3);
    }
    hash
}

/// Default content seed for a session when the caller supplies none.
pub fn session_seed(student_id: &str, session_index: u32) -> u64 {
    derive_seed(fnv1a(student_id.as_bytes()), u64::from(session_index))
}

/// Draws `k` distinct positions out of `0..n` by a partial Fisher-Yates
/// shuffle; position `i` swaps with `i + below(n - i)`. Returns at most `n`.
pub fn sample_indices(n: usize, k: usize, rng: &mut SplitMix64) -> Vec<usize> {
    let mut slots: Vec<usize> = (0..n).collect();
    let take = k.min(n);
    for i in 0..take {
        let j = i + rng.below((n - i) as u64) as usize;
        slots.swap(i, j);
    }
    slots.truncate(take);
    slots
}
