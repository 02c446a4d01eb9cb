//! Seeded randomness.
//!
//! Every random decision in the pipeline is drawn from xoshiro256** whose
//! 256-bit state is filled from a `u64` seed by four successive SplitMix64
//! outputs. Both algorithms are public-domain reference designs by Blackman
//! and Vigna, so splits can be reproduced from any language:
//!
//! * bounded integers in `[0, n)` use Lemire's multiply-shift with rejection:
//!   draw `x`, form the 128-bit product `m = x * n`, reject while
//!   `(m mod 2^64) < (2^64 - n) mod n`, return `m >> 64`;
//! * shuffles are descending Fisher-Yates: for `i = len-1 .. 1`, swap `i`
//!   with `below(i + 1)`;
//! * uniform reals are `(x >> 11) * 2^-53`.
//!
//! Stage seeds are derived from the top-level seed with [`derive_seed`].

use rand::{RngCore, SeedableRng};
use rand_xoshiro::Xoshiro256StarStar;

pub type Rng = Xoshiro256StarStar;

pub fn seeded(seed: u64) -> Rng {
    Xoshiro256StarStar::seed_from_u64(seed)
}

/// Uniform integer in `[0, bound)`. `bound` must be non-zero.
pub fn below(rng: &mut Rng, bound: u64) -> u64 {
    assert!(bound > 0, "empty range");
    let threshold = bound.wrapping_neg() % bound;
    loop {
        let m = u128::from(rng.next_u64()) * u128::from(bound);
        if (m as u64) >= threshold {
            return (m >> 64) as u64;
        }
    }
}

pub fn unit_f64(rng: &mut Rng) -> f64 {
    (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

pub fn coin(rng: &mut Rng) -> bool {
    rng.next_u64() >> 63 == 1
}

pub fn shuffle<T>(items: &mut [T], rng: &mut Rng) {
    for i in (1..items.len()).rev() {
        let j = below(rng, i as u64 + 1) as usize;
        items.swap(i, j);
    }
}

/// SplitMix64 finalizer applied to `seed ^ fnv1a64(stage)`.
pub fn derive_seed(seed: u64, stage: &str) -> u64 {
    let mut hash: u64 = 0xcbf2_9ce4_8422_2325;
    for byte in stage.bytes() {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0100_0000_01b3);
    }
    let mut z = (seed ^ hash).wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}
