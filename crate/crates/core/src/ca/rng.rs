/// SplitMix64 (Steele, Lea & Flood; the seeding generator of Java's
/// `SplittableRandom` and of xoshiro).
///
/// The n-th output (n = 1, 2, ...) is `mix(seed + n * 0x9E3779B97F4A7C15)`
/// with wrapping arithmetic, where
///
/// ```text
/// z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
/// z = (z ^ (z >> 27)) * 0x94D049BB133111EB
/// z =  z ^ (z >> 31)
/// ```
///
/// Uniform reals in `[0, 1)` take the top 53 bits: `(x >> 11) * 2^-53`.
/// The output depends only on `(seed, counter)`, so any language with
/// 64-bit wrapping integers reproduces the stream bit-for-bit.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SplitMix64 {
    state: u64,
}

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

impl SplitMix64 {
    pub fn new(seed: u64) -> Self {
        SplitMix64 { state: seed }
    }

    /// Output number `counter` (1-based) of the stream seeded with `seed`.
    pub fn at(seed: u64, counter: u64) -> u64 {
        mix(seed.wrapping_add(counter.wrapping_mul(GOLDEN_GAMMA)))
    }

    #[inline]
    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform in `[0, 1)`.
    #[inline]
    pub fn next_f64(&mut self) -> f64 {
        (self.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }
}

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
