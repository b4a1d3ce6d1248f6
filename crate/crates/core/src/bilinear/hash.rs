//! The five scheme hash functions, all built on domain-separated SHA-256.

use sha2::{Digest, Sha256};
use thiserror::Error;

use super::{BilinearEngine, Scalar};

/// Output length of [`h3_mask`] and seed length for [`h4_expand`].
pub const SEED_LEN: usize = 32;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum HashError {
    #[error("hash-to-group input must be nonempty")]
    EmptyInput,
    #[error("requested zero-length keystream")]
    ZeroLength,
}

/// `SHA-256(tag || counter || data)` blocks, concatenated and truncated.
fn expand(tag: &[u8], data: &[u8], out_len: usize) -> Vec<u8> {
    let mut out = Vec::with_capacity(out_len.next_multiple_of(32));
    let mut block: u32 = 0;
    while out.len() < out_len {
        let mut h = Sha256::new();
        h.update(tag);
        h.update(block.to_be_bytes());
        h.update(data);
        out.extend_from_slice(&h.finalize());
        block += 1;
    }
    out.truncate(out_len);
    out
}

/// H1: bytes to a non-identity element of `G`, by try-and-increment.
pub fn h1_to_group<E: BilinearEngine>(engine: &E, data: &[u8]) -> Result<E::G, HashError> {
    if data.is_empty() {
        return Err(HashError::EmptyInput);
    }
    let len = engine.hash_input_len();
    let mut counter: u32 = 0;
    loop {
        let mut tag = b"H1".to_vec();
        tag.extend_from_slice(&counter.to_be_bytes());
        if let Some(g) = engine.map_candidate(&expand(&tag, data, len)) {
            if !engine.is_identity(&g) {
                return Ok(g);
            }
        }
        counter += 1;
    }
}

/// H2: bytes to `[1, q)`.
pub fn h2_to_scalar<E: BilinearEngine>(engine: &E, data: &[u8]) -> Scalar {
    let f = engine.scalars();
    f.from_wide_nonzero(&expand(b"H2", data, f.width() + 16))
}

/// H3: bytes to a 32-byte seed.
pub fn h3_mask(data: &[u8]) -> [u8; SEED_LEN] {
    let mut h = Sha256::new();
    h.update(b"H3");
    h.update(data);
    h.finalize().into()
}

/// H4: extendable-output keystream. Shorter outputs are prefixes of longer ones.
pub fn h4_expand(seed: &[u8], out_len: usize) -> Result<Vec<u8>, HashError> {
    if out_len == 0 {
        return Err(HashError::ZeroLength);
    }
    Ok(expand(b"H4", seed, out_len))
}

/// H5: ordered parts to `[1, q)`. Each part is length-prefixed (u64 BE).
pub fn h5_bind<E: BilinearEngine>(engine: &E, parts: &[&[u8]]) -> Scalar {
    let mut buf = Vec::new();
    for part in parts {
        buf.extend_from_slice(&(part.len() as u64).to_be_bytes());
        buf.extend_from_slice(part);
    }
    let f = engine.scalars();
    f.from_wide_nonzero(&expand(b"H5", &buf, f.width() + 16))
}

#[cfg(test)]
mod tests {
    use std::collections::HashSet;

    use super::*;
    use crate::bilinear::ToyEngine;

    #[test]
    fn h4_is_prefix_closed() {
        let a = h4_expand(b"seed", 5).unwrap();
        let b = h4_expand(b"seed", 9).unwrap();
        assert_eq!(a.len(), 5);
        assert_eq!(&b[..5], &a[..]);
        let long = h4_expand(b"seed", 100).unwrap();
        assert_eq!(&long[..9], &b[..]);
        assert_eq!(h4_expand(b"seed", 0), Err(HashError::ZeroLength));
    }

    #[test]
    fn h5_length_prefix_separates_splits() {
        let e = ToyEngine::demo();
        assert_ne!(
            h5_bind(&e, &[b"a", b"b"]),
            h5_bind(&e, &[b"ab", b""])
        );
        assert_ne!(h5_bind(&e, &[b"ab"]), h5_bind(&e, &[b"a", b"b"]));
        assert_eq!(h5_bind(&e, &[b"x", b"y"]), h5_bind(&e, &[b"x", b"y"]));
    }

    #[test]
    fn h1_rejects_empty() {
        let e = ToyEngine::small();
        assert_eq!(h1_to_group(&e, b""), Err(HashError::EmptyInput));
    }

    #[test]
    fn toy_hash_outputs_stay_in_range() {
        let e = ToyEngine::small();
        for i in 0u32..10_000 {
            let data = i.to_be_bytes();
            assert!(!e.is_identity(&h1_to_group(&e, &data).unwrap()));
            assert!(!h2_to_scalar(&e, &data).is_zero());
            assert!(!h5_bind(&e, &[&data]).is_zero());
        }
    }

    #[test]
    fn h3_is_deterministic_and_distinct() {
        assert_eq!(h3_mask(b"x"), h3_mask(b"x"));
        let seen: HashSet<_> = (0u32..1000).map(|i| h3_mask(&i.to_be_bytes())).collect();
        assert_eq!(seen.len(), 1000);
    }
}
