//! Reproducible random streams: xoshiro256++ seeded through splitmix64.
//!
//! A stream is identified by `(seed, label)`. The label is hashed with
//! 64-bit FNV-1a and mixed into the seed, so streams for different purposes
//! (network weights, input signal) never share state.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// 64-bit FNV-1a over the UTF-8 bytes of `label`.
pub fn fnv1a64(label: &str) -> u64 {
    label
        .bytes()
        .fold(FNV_OFFSET, |h, b| (h ^ b as u64).wrapping_mul(FNV_PRIME))
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        SplitMix64 { state }
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = self.state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    }
}

/// A labelled xoshiro256++ stream. Single owner; derive a new stream rather
/// than sharing one across workers.
#[derive(Debug, Clone)]
pub struct RngStream {
    state: [u64; 4],
    origin_seed: u64,
    stream_label: String,
}

/// Derives the stream for `(seed, label)`.
pub fn derive_stream(seed: u64, label: &str) -> RngStream {
    let mut sm = SplitMix64::new(seed ^ fnv1a64(label));
    let mut state = [sm.next_u64(), sm.next_u64(), sm.next_u64(), sm.next_u64()];
    while state == [0; 4] {
        state = [state[1], state[2], state[3], sm.next_u64()];
    }
    RngStream {
        state,
        origin_seed: seed,
        stream_label: label.to_owned(),
    }
}

impl RngStream {
    /// Builds a stream from a raw generator state. Panics on the all-zero state.
    pub fn from_state(state: [u64; 4]) -> Self {
        assert!(state != [0; 4], "xoshiro256++ state must not be all zero");
        RngStream {
            state,
            origin_seed: 0,
            stream_label: String::new(),
        }
    }

    pub fn origin_seed(&self) -> u64 {
        self.origin_seed
    }

    pub fn label(&self) -> &str {
        &self.stream_label
    }

    pub fn next_u64(&mut self) -> u64 {
        let s = &mut self.state;
        let result = s[0].wrapping_add(s[3]).rotate_left(23).wrapping_add(s[0]);
        let t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = s[3].rotate_left(45);
        result
    }

    /// Next draw in `[0, 1)` with 53 bits of precision.
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    /// Next draw in `[low, high)`; advances the generator by exactly one step.
    pub fn uniform(&mut self, low: f64, high: f64) -> f64 {
        debug_assert!(low < high && low.is_finite() && high.is_finite());
        low + (high - low) * self.next_f64()
    }
}
