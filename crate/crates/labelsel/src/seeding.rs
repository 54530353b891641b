//! Deterministic seed derivation and content hashing.
//!
//! Every randomized stage in this crate draws from a [`rand_chacha::ChaCha8Rng`]
//! seeded through [`derive`], so a single top-level seed expands into
//! independent, collision-resistant streams. The derivation is part of the
//! reproducibility contract: the same inputs always produce the same bytes.

/// 64-bit FNV-1a over a byte slice.
pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

/// 64-bit FNV-1a over several byte slices, chained in order.
pub fn fnv1a_chain(parts: &[&[u8]]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for part in parts {
        for &b in *part {
            h ^= u64::from(b);
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
    }
    h
}

/// splitmix64-style finalizer combining two words.
pub fn mix(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.rotate_left(32) ^ 0x9e37_79b9_7f4a_7c15;
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a child seed from a parent seed, a stream label, and an index.
///
/// Distinct labels give unrelated streams; the index selects within a stream.
pub fn derive(seed: u64, label: &str, index: u64) -> u64 {
    mix(mix(seed, fnv1a(label.as_bytes())), index)
}
