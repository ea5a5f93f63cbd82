//! Seed derivation and text hashing shared by the simulator, the mock
//! backend, and the experiment harness.
//!
//! Reproducibility across thread counts and evaluation orders depends on
//! deriving every random stream from *coordinates* (run seed, grid index,
//! trial index, ...) instead of from a shared mutable generator.

/// Advances a splitmix64 state and returns the next output word.
pub fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Mixes a sequence of words into a single seed; order-sensitive.
pub fn mix_seed(words: &[u64]) -> u64 {
    let mut state = 0x51_7c_c1_b7_27_22_0a_95_u64;
    let mut out = 0;
    for &w in words {
        state ^= w;
        out = splitmix64(&mut state);
    }
    out
}

/// FNV-1a 64-bit hash of a byte string.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325_u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}
