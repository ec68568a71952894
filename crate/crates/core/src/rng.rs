//! Deterministic randomness derivation.
//!
//! Every random draw in a simulation comes from a stream derived from
//! `(seed, salt_a, salt_b)` — typically `(env seed, machine id, round)` — so
//! coin flips are independent across machines and rounds yet reproducible and
//! independent of evaluation order.

use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9E37_79B9_7F4A_7C15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derive an independent generator for the given coordinates.
pub fn derive_rng(seed: u64, salt_a: u64, salt_b: u64) -> ChaCha8Rng {
    let mut state = seed;
    let a = splitmix64(&mut state);
    state ^= salt_a.wrapping_mul(0xA24B_AED4_963E_E407);
    let b = splitmix64(&mut state);
    state ^= salt_b.wrapping_mul(0x9FB2_1C65_1E98_DF25);
    let c = splitmix64(&mut state);
    let d = splitmix64(&mut state);

    let mut key = [0u8; 32];
    key[0..8].copy_from_slice(&a.to_le_bytes());
    key[8..16].copy_from_slice(&b.to_le_bytes());
    key[16..24].copy_from_slice(&c.to_le_bytes());
    key[24..32].copy_from_slice(&d.to_le_bytes());
    ChaCha8Rng::from_seed(key)
}

/// `ceil(sqrt(v))` in integer arithmetic.
pub fn isqrt_ceil(v: u64) -> u32 {
    if v == 0 {
        return 0;
    }
    let mut s = (v as f64).sqrt() as u64;
    while s.saturating_mul(s) > v {
        s -= 1;
    }
    while s * s < v {
        s += 1;
    }
    s as u32
}

/// `ceil(log2(v))`; 0 for v <= 1.
pub fn ceil_log2(v: u32) -> u32 {
    if v <= 1 {
        0
    } else {
        (v - 1).ilog2() + 1
    }
}

/// `ceil(m / 2^i)`, at least 1 for m >= 1.
pub fn ceil_div_pow2(m: u32, i: u32) -> u32 {
    if i >= 32 {
        return u32::from(m > 0);
    }
    (u64::from(m).div_ceil(1u64 << i)) as u32
}
