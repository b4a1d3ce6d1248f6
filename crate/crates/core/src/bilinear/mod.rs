//! Pluggable bilinear groups.
//!
//! An engine provides an additive group `G` of prime order `q` with a fixed
//! generator `P`, a multiplicative target group `G_T` of the same order, and a
//! symmetric pairing `G x G -> G_T`. Everything above this module is written
//! against [`BilinearEngine`] only.
//!
//! Two engines ship with the crate:
//!
//! * [`ToyEngine`]: `G = (Z_q, +)`, pairing `g^(ab)`. Discrete logs are
//!   trivial, so it is **insecure** and exists for exhaustive tests.
//! * [`TypeAEngine`]: a supersingular curve `y^2 = x^3 + x` over a 512-bit
//!   prime field with the reduced Tate pairing and a distortion map.

mod hash;
mod toy;
mod type_a;

use std::fmt;

use num_bigint::BigUint;
use num_traits::{One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use hash::{h1_to_group, h2_to_scalar, h3_mask, h4_expand, h5_bind, HashError, SEED_LEN};
pub use toy::ToyEngine;
pub use type_a::TypeAEngine;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum DecodeError {
    #[error("expected {expected} bytes, got {actual}")]
    Length { expected: usize, actual: usize },
    #[error("value out of range")]
    OutOfRange,
    #[error("point is not on the curve")]
    NotOnCurve,
    #[error("element is not in the prime-order subgroup")]
    WrongSubgroup,
    #[error("invalid encoding tag {0:#04x}")]
    Tag(u8),
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum EngineError {
    #[error("q = {0} is not a prime greater than 3")]
    OrderNotPrime(BigUint),
    #[error("p must equal 2q + 1 (got p = {p}, q = {q})")]
    NotSafePrime { p: BigUint, q: BigUint },
    #[error("g = {0} does not have order q modulo p")]
    BadGenerator(BigUint),
}

/// Public description of an engine's groups.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupDescription {
    pub name: String,
    pub q: BigUint,
    /// Canonical byte length of a `G` element.
    pub element_len: usize,
    /// Canonical byte length of a `G_T` element.
    pub gt_len: usize,
}

/// Element of `Z_q`, always reduced.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Scalar(BigUint);

impl Scalar {
    pub fn value(&self) -> &BigUint {
        &self.0
    }

    pub fn is_zero(&self) -> bool {
        self.0.is_zero()
    }
}

impl fmt::Debug for Scalar {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Scalar({})", self.0)
    }
}

/// Arithmetic in `Z_q` plus the fixed-width big-endian scalar encoding.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ScalarField {
    q: BigUint,
    width: usize,
}

impl ScalarField {
    pub fn new(q: BigUint) -> Self {
        let width = (q.bits() as usize).div_ceil(8);
        ScalarField { q, width }
    }

    pub fn order(&self) -> &BigUint {
        &self.q
    }

    /// Byte width of an encoded scalar, `ceil(log2(q) / 8)`.
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn reduce(&self, v: &BigUint) -> Scalar {
        Scalar(v % &self.q)
    }

    pub fn from_u64(&self, v: u64) -> Scalar {
        self.reduce(&BigUint::from(v))
    }

    pub fn zero(&self) -> Scalar {
        Scalar(BigUint::zero())
    }

    pub fn one(&self) -> Scalar {
        self.reduce(&BigUint::one())
    }

    pub fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &b.0) % &self.q)
    }

    pub fn sub(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 + &self.q - &b.0) % &self.q)
    }

    pub fn neg(&self, a: &Scalar) -> Scalar {
        self.sub(&self.zero(), a)
    }

    pub fn mul(&self, a: &Scalar, b: &Scalar) -> Scalar {
        Scalar((&a.0 * &b.0) % &self.q)
    }

    /// Uniform draw from `Z*_q` by rejection sampling.
    pub fn random_nonzero<R: RngCore + ?Sized>(&self, rng: &mut R) -> Scalar {
        let mut buf = vec![0u8; self.width];
        let excess = (self.width * 8) as u64 - self.q.bits();
        loop {
            rng.fill_bytes(&mut buf);
            if excess > 0 {
                buf[0] &= 0xff >> excess;
            }
            let v = BigUint::from_bytes_be(&buf);
            if !v.is_zero() && v < self.q {
                return Scalar(v);
            }
        }
    }

    /// Maps a wide uniform byte string into `[1, q)`.
    pub fn from_wide_nonzero(&self, bytes: &[u8]) -> Scalar {
        let v = BigUint::from_bytes_be(bytes) % (&self.q - 1u32);
        Scalar(v + 1u32)
    }

    pub fn encode(&self, s: &Scalar) -> Vec<u8> {
        let raw = s.0.to_bytes_be();
        let mut out = vec![0u8; self.width];
        if !s.0.is_zero() {
            out[self.width - raw.len()..].copy_from_slice(&raw);
        }
        out
    }

    pub fn decode(&self, bytes: &[u8]) -> Result<Scalar, DecodeError> {
        if bytes.len() != self.width {
            return Err(DecodeError::Length {
                expected: self.width,
                actual: bytes.len(),
            });
        }
        let v = BigUint::from_bytes_be(bytes);
        if v >= self.q {
            return Err(DecodeError::OutOfRange);
        }
        Ok(Scalar(v))
    }
}

/// A symmetric bilinear group `(G, G_T, e)` of prime order `q`.
///
/// Implementations must be pure: every method is a deterministic function of
/// its inputs and the engine parameters.
pub trait BilinearEngine: Clone + PartialEq + Eq + fmt::Debug + Send + Sync + 'static {
    type G: Clone + PartialEq + Eq + fmt::Debug + Send + Sync;
    type Gt: Clone + PartialEq + Eq + fmt::Debug + Send + Sync;

    fn description(&self) -> &GroupDescription;
    fn scalars(&self) -> &ScalarField;

    /// `true` for engines that must never protect real data.
    fn insecure(&self) -> bool {
        false
    }

    fn generator(&self) -> Self::G;
    fn identity(&self) -> Self::G;
    fn add(&self, a: &Self::G, b: &Self::G) -> Self::G;
    fn scalar_mul(&self, k: &Scalar, x: &Self::G) -> Self::G;
    fn pair(&self, a: &Self::G, b: &Self::G) -> Self::Gt;

    fn gt_identity(&self) -> Self::Gt;
    fn gt_mul(&self, a: &Self::Gt, b: &Self::Gt) -> Self::Gt;
    fn gt_pow(&self, a: &Self::Gt, k: &Scalar) -> Self::Gt;

    fn encode_g(&self, x: &Self::G) -> Vec<u8>;
    fn decode_g(&self, bytes: &[u8]) -> Result<Self::G, DecodeError>;
    fn encode_gt(&self, x: &Self::Gt) -> Vec<u8>;
    fn decode_gt(&self, bytes: &[u8]) -> Result<Self::Gt, DecodeError>;

    /// Number of uniform bytes consumed by [`BilinearEngine::map_candidate`].
    fn hash_input_len(&self) -> usize;
    /// One try-and-increment attempt: maps uniform bytes to a group element,
    /// or `None` when the candidate is rejected.
    fn map_candidate(&self, uniform: &[u8]) -> Option<Self::G>;

    fn is_identity(&self, x: &Self::G) -> bool {
        *x == self.identity()
    }
}

/// Serializable engine selector, used to persist which engine a deployment
/// runs on.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EngineSpec {
    Toy { q: BigUint, p: BigUint, g: BigUint },
    TypeA,
}

impl EngineSpec {
    pub fn name(&self) -> &'static str {
        match self {
            EngineSpec::Toy { .. } => "toy",
            EngineSpec::TypeA => "type-a",
        }
    }
}

/// Engines that can be rebuilt from an [`EngineSpec`].
pub trait FromSpec: BilinearEngine {
    fn spec(&self) -> EngineSpec;
    fn from_spec(spec: &EngineSpec) -> Option<Self>;
}

impl FromSpec for ToyEngine {
    fn spec(&self) -> EngineSpec {
        EngineSpec::Toy {
            q: self.description().q.clone(),
            p: self.modulus().clone(),
            g: self.base().clone(),
        }
    }

    fn from_spec(spec: &EngineSpec) -> Option<Self> {
        match spec {
            EngineSpec::Toy { q, p, g } => ToyEngine::new(q.clone(), p.clone(), g.clone()).ok(),
            EngineSpec::TypeA => None,
        }
    }
}

impl FromSpec for TypeAEngine {
    fn spec(&self) -> EngineSpec {
        EngineSpec::TypeA
    }

    fn from_spec(spec: &EngineSpec) -> Option<Self> {
        match spec {
            EngineSpec::TypeA => Some(TypeAEngine::new()),
            EngineSpec::Toy { .. } => None,
        }
    }
}

pub(crate) fn is_probable_prime(n: &BigUint) -> bool {
    let two = BigUint::from(2u32);
    if *n < two {
        return false;
    }
    for small in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37] {
        let s = BigUint::from(small);
        if *n == s {
            return true;
        }
        if (n % &s).is_zero() {
            return false;
        }
    }
    let n_minus_one = n - 1u32;
    let mut d = n_minus_one.clone();
    let mut r = 0u32;
    while (&d % 2u32).is_zero() {
        d >>= 1;
        r += 1;
    }
    // Fixed bases: deterministic for n < 3.3e24, a strong probable-prime test above.
    'witness: for a in [2u32, 3, 5, 7, 11, 13, 17, 19, 23, 29, 31, 37, 41] {
        let a = BigUint::from(a) % n;
        if a.is_zero() {
            continue;
        }
        let mut x = a.modpow(&d, n);
        if x.is_one() || x == n_minus_one {
            continue;
        }
        for _ in 1..r {
            x = (&x * &x) % n;
            if x == n_minus_one {
                continue 'witness;
            }
        }
        return false;
    }
    true
}
