//! Small stable hashing helpers (FNV-1a).
//!
//! Used to fingerprint network graphs and scenario configs so outputs can
//! record exactly which inputs produced them. FNV is stable across builds
//! and platforms, unlike `std`'s default hasher.

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

pub fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h = FNV_OFFSET;
    for &b in bytes {
        h ^= b as u64;
        h = h.wrapping_mul(FNV_PRIME);
    }
    h
}

/// Hex rendering used everywhere a fingerprint lands in an output file.
pub fn fingerprint(bytes: &[u8]) -> String {
    format!("{:016x}", fnv1a(bytes))
}
