// SPDX-License-Identifier: Apache-2.0

use sha2::{Digest, Sha256};

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Short stable digest used for record ids and prompt hashes.
pub fn short_hash(bytes: &[u8]) -> String {
    sha256_hex(bytes)[..16].to_string()
}

const FNV_OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
const FNV_PRIME: u64 = 0x0000_0100_0000_01b3;

/// FNV-1a over a token window, with a unit separator between tokens so
/// `["ab", "c"]` and `["a", "bc"]` differ.
pub fn fnv1a_tokens<S: AsRef<str>>(tokens: &[S]) -> u64 {
    let mut h = FNV_OFFSET;
    for t in tokens {
        for b in t.as_ref().bytes().chain(std::iter::once(0x1f)) {
            h ^= u64::from(b);
            h = h.wrapping_mul(FNV_PRIME);
        }
    }
    h
}
