//! Stable 64-bit FNV-1a hashing.
//!
//! Used wherever a value must hash identically across processes and
//! releases: mock-provider keys, embedding-cache keys, per-record rng
//! seeds, and config fingerprints. `std`'s default hasher is only stable
//! within one process, so it is not suitable for any of those.

const FNV_OFFSET: u64 = 0xcbf29ce484222325;
const FNV_PRIME: u64 = 0x100000001b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hash several parts with a length prefix per part so that
/// `("ab", "c")` and `("a", "bc")` do not collide.
pub fn fnv1a_parts(parts: &[&str]) -> u64 {
    let mut h = FNV_OFFSET;
    for part in parts {
        for &b in (part.len() as u64).to_le_bytes().iter() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
        for &b in part.as_bytes() {
            h ^= b as u64;
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}

/// Derive a child seed from a base seed and a string key.
pub fn derive_seed(base: u64, key: &str) -> u64 {
    let mut h = FNV_OFFSET ^ base;
    for &b in key.as_bytes() {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}
