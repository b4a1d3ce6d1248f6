//! Diffie-Hellman session keys and sealed delivery of private key material
//! from the PKG to a staff device.
//!
//! The DH group is the engine's `G`. Both sides derive the session key as
//! `H3(encode(a * b * P))` and can confirm it over the channel by comparing
//! [`SessionKey::confirmation`] digests.
//!
//! Sealing is encrypt-then-MAC: a keystream from a pluggable
//! [`KeystreamCipher`] and an HMAC-SHA256 tag over `nonce || body`.

use std::fmt;

use hmac::{Hmac, Mac};
use rand::RngCore;
use sha2::Sha256;
use thiserror::Error;

use crate::bilinear::{h3_mask, h4_expand, BilinearEngine, Scalar};
use crate::ibsc::Reject;

pub const NONCE_LEN: usize = 12;
pub const TAG_LEN: usize = 32;

type HmacSha256 = Hmac<Sha256>;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum KeyAgreeError {
    #[error("peer public key is the identity element")]
    IdentityPeerKey,
    #[error("malformed sealed key material")]
    Malformed,
}

pub struct DhKeyPair<E: BilinearEngine> {
    sk: Scalar,
    pub pk: E::G,
}

impl<E: BilinearEngine> Clone for DhKeyPair<E> {
    fn clone(&self) -> Self {
        DhKeyPair {
            sk: self.sk.clone(),
            pk: self.pk.clone(),
        }
    }
}

impl<E: BilinearEngine> fmt::Debug for DhKeyPair<E> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("DhKeyPair")
            .field("pk", &self.pk)
            .finish_non_exhaustive()
    }
}

impl<E: BilinearEngine> DhKeyPair<E> {
    pub fn secret(&self) -> &Scalar {
        &self.sk
    }
}

pub fn dh_keygen<E: BilinearEngine, R: RngCore + ?Sized>(engine: &E, rng: &mut R) -> DhKeyPair<E> {
    dh_keypair_from_secret(engine, engine.scalars().random_nonzero(rng))
}

pub fn dh_keypair_from_secret<E: BilinearEngine>(engine: &E, sk: Scalar) -> DhKeyPair<E> {
    let pk = engine.scalar_mul(&sk, &engine.generator());
    DhKeyPair { sk, pk }
}

#[derive(Clone, PartialEq, Eq)]
pub struct SessionKey([u8; 32]);

impl fmt::Debug for SessionKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "SessionKey({})", self.fingerprint())
    }
}

impl SessionKey {
    pub fn from_bytes(bytes: [u8; 32]) -> Self {
        SessionKey(bytes)
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }

    /// Short keyed digest exchanged to confirm both sides hold the same key.
    pub fn confirmation(&self) -> [u8; 16] {
        let mut mac = HmacSha256::new_from_slice(&self.0).expect("any key length");
        mac.update(b"confirm");
        let full = mac.finalize().into_bytes();
        full[..16].try_into().expect("16 of 32 bytes")
    }

    /// Public handle for logs and session tables; reveals nothing about the key.
    pub fn fingerprint(&self) -> String {
        hex::encode(&h3_mask(&[b"fingerprint".as_slice(), &self.0].concat())[..8])
    }
}

pub fn dh_shared<E: BilinearEngine>(
    engine: &E,
    mine: &DhKeyPair<E>,
    theirs_pk: &E::G,
) -> Result<SessionKey, KeyAgreeError> {
    if engine.is_identity(theirs_pk) {
        return Err(KeyAgreeError::IdentityPeerKey);
    }
    let shared = engine.scalar_mul(&mine.sk, theirs_pk);
    Ok(SessionKey(h3_mask(&engine.encode_g(&shared))))
}

/// Source of keystream for [`seal_with`] / [`open_with`].
pub trait KeystreamCipher {
    fn keystream(&self, key: &SessionKey, nonce: &[u8; NONCE_LEN], len: usize) -> Vec<u8>;
}

/// Default cipher: `H4(key || nonce, len)`.
#[derive(Clone, Copy, Debug, Default)]
pub struct ExpandCipher;

impl KeystreamCipher for ExpandCipher {
    fn keystream(&self, key: &SessionKey, nonce: &[u8; NONCE_LEN], len: usize) -> Vec<u8> {
        if len == 0 {
            return Vec::new();
        }
        let mut seed = key.0.to_vec();
        seed.extend_from_slice(nonce);
        h4_expand(&seed, len).expect("len > 0")
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SealedKeyMaterial {
    pub nonce: [u8; NONCE_LEN],
    pub tag: [u8; TAG_LEN],
    pub body: Vec<u8>,
}

impl SealedKeyMaterial {
    /// `nonce(12) | taglen(1)=32 | tag(32) | body(u32 len-prefixed)`
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(NONCE_LEN + 1 + TAG_LEN + 4 + self.body.len());
        out.extend_from_slice(&self.nonce);
        out.push(TAG_LEN as u8);
        out.extend_from_slice(&self.tag);
        out.extend_from_slice(&(self.body.len() as u32).to_be_bytes());
        out.extend_from_slice(&self.body);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, KeyAgreeError> {
        let header = NONCE_LEN + 1 + TAG_LEN + 4;
        if bytes.len() < header || bytes[NONCE_LEN] as usize != TAG_LEN {
            return Err(KeyAgreeError::Malformed);
        }
        let nonce = bytes[..NONCE_LEN].try_into().unwrap();
        let tag = bytes[NONCE_LEN + 1..NONCE_LEN + 1 + TAG_LEN].try_into().unwrap();
        let len_at = NONCE_LEN + 1 + TAG_LEN;
        let len = u32::from_be_bytes(bytes[len_at..header].try_into().unwrap()) as usize;
        if bytes.len() - header != len {
            return Err(KeyAgreeError::Malformed);
        }
        Ok(SealedKeyMaterial {
            nonce,
            tag,
            body: bytes[header..].to_vec(),
        })
    }
}

fn tag(key: &SessionKey, nonce: &[u8; NONCE_LEN], body: &[u8]) -> HmacSha256 {
    let mut mac = HmacSha256::new_from_slice(&key.0).expect("any key length");
    mac.update(b"seal");
    mac.update(nonce);
    mac.update(body);
    mac
}

/// The nonce must never repeat under one key; this is not checked.
pub fn seal(key: &SessionKey, plaintext: &[u8], nonce: [u8; NONCE_LEN]) -> SealedKeyMaterial {
    seal_with(&ExpandCipher, key, plaintext, nonce)
}

pub fn open(key: &SessionKey, sealed: &SealedKeyMaterial) -> Result<Vec<u8>, Reject> {
    open_with(&ExpandCipher, key, sealed)
}

pub fn seal_with<C: KeystreamCipher>(
    cipher: &C,
    key: &SessionKey,
    plaintext: &[u8],
    nonce: [u8; NONCE_LEN],
) -> SealedKeyMaterial {
    let ks = cipher.keystream(key, &nonce, plaintext.len());
    let body: Vec<u8> = plaintext.iter().zip(&ks).map(|(p, k)| p ^ k).collect();
    let tag = tag(key, &nonce, &body).finalize().into_bytes().into();
    SealedKeyMaterial { nonce, tag, body }
}

pub fn open_with<C: KeystreamCipher>(
    cipher: &C,
    key: &SessionKey,
    sealed: &SealedKeyMaterial,
) -> Result<Vec<u8>, Reject> {
    tag(key, &sealed.nonce, &sealed.body)
        .verify_slice(&sealed.tag)
        .map_err(|_| Reject)?;
    let ks = cipher.keystream(key, &sealed.nonce, sealed.body.len());
    Ok(sealed.body.iter().zip(&ks).map(|(c, k)| c ^ k).collect())
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::bilinear::ToyEngine;

    #[test]
    fn toy_exchange_matches_modular_arithmetic() {
        let e = ToyEngine::small();
        let f = e.scalars();
        let a = dh_keypair_from_secret(&e, f.from_u64(3));
        let b = dh_keypair_from_secret(&e, f.from_u64(4));
        assert_eq!(b.pk, e.element(4));
        // shared point 12 mod 11 = 1 on both sides
        let expected = SessionKey(h3_mask(&e.encode_g(&e.element(1))));
        assert_eq!(dh_shared(&e, &a, &b.pk).unwrap(), expected);
        assert_eq!(dh_shared(&e, &b, &a.pk).unwrap(), expected);
    }

    #[test]
    fn identity_peer_key_is_refused() {
        let e = ToyEngine::demo();
        let a = dh_keygen(&e, &mut ChaCha20Rng::seed_from_u64(1));
        assert_eq!(
            dh_shared(&e, &a, &e.identity()),
            Err(KeyAgreeError::IdentityPeerKey)
        );
    }

    #[test]
    fn seeds_give_distinct_secrets() {
        let e = ToyEngine::demo();
        let a = dh_keygen(&e, &mut ChaCha20Rng::seed_from_u64(1));
        let b = dh_keygen(&e, &mut ChaCha20Rng::seed_from_u64(2));
        assert_ne!(a.secret(), b.secret());
        assert_eq!(a.pk, e.scalar_mul(a.secret(), &e.generator()));
    }

    #[test]
    fn seal_roundtrip_and_tamper() {
        let key = SessionKey([7u8; 32]);
        let sealed = seal(&key, b"0123456789abcdef", [1u8; NONCE_LEN]);
        assert_eq!(open(&key, &sealed).unwrap(), b"0123456789abcdef");
        for i in 0..sealed.body.len() {
            let mut bad = sealed.clone();
            bad.body[i] ^= 0x01;
            assert_eq!(open(&key, &bad), Err(Reject));
        }
        let mut bad = sealed.clone();
        bad.nonce[0] ^= 1;
        assert_eq!(open(&key, &bad), Err(Reject));
        assert_eq!(open(&SessionKey([8u8; 32]), &sealed), Err(Reject));
    }

    #[test]
    fn empty_plaintext_roundtrips() {
        let key = SessionKey([3u8; 32]);
        let sealed = seal(&key, b"", [0u8; NONCE_LEN]);
        assert!(sealed.body.is_empty());
        assert_eq!(open(&key, &sealed).unwrap(), Vec::<u8>::new());
    }

    #[test]
    fn keystream_is_deterministic_per_nonce() {
        let key = SessionKey([9u8; 32]);
        let a = ExpandCipher.keystream(&key, &[2u8; 12], 40);
        let b = ExpandCipher.keystream(&key, &[2u8; 12], 64);
        assert_eq!(a[..], b[..40]);
        assert_ne!(a, ExpandCipher.keystream(&key, &[3u8; 12], 40));
    }

    #[test]
    fn sealed_layout_roundtrip() {
        let key = SessionKey([5u8; 32]);
        let sealed = seal(&key, b"key material", [4u8; NONCE_LEN]);
        let bytes = sealed.to_bytes();
        assert_eq!(bytes[12], 32);
        assert_eq!(bytes.len(), 12 + 1 + 32 + 4 + 12);
        assert_eq!(SealedKeyMaterial::from_bytes(&bytes).unwrap(), sealed);
        assert!(SealedKeyMaterial::from_bytes(&bytes[..bytes.len() - 1]).is_err());
    }
}
