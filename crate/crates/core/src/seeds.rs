//! Stable seed derivation for independent RNG streams.

/// One round of the SplitMix64 finalizer.
pub fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    x = (x ^ (x >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    x ^ (x >> 31)
}

/// FNV-1a over the tag bytes, mixed with `seed`. Stable across platforms and releases.
pub fn derive_seed(seed: u64, tag: &str) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for b in tag.bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    splitmix64(seed ^ splitmix64(h))
}

/// Seed for grid point `(alpha, beta)`: `seed ⊕ hash(alpha, beta)`.
pub fn grid_seed(seed: u64, alpha: f64, beta: f64) -> u64 {
    seed ^ splitmix64(alpha.to_bits() ^ splitmix64(beta.to_bits()))
}
