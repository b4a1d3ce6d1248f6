use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::{
    is_probable_prime, BilinearEngine, DecodeError, EngineError, GroupDescription, Scalar,
    ScalarField,
};

/// INSECURE test engine.
///
/// `G = (Z_q, +)` with generator `P = 1`, `G_T` is the order-`q` subgroup of
/// `Z_p*` generated by `g` (with `p = 2q + 1`), and the pairing is
/// `e(a, b) = g^(ab mod q) mod p`. Bilinearity, non-degeneracy and
/// computability all hold trivially, and so does discrete log: every group
/// element *is* its own discrete log. Use it for exhaustive tests only.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ToyEngine {
    desc: GroupDescription,
    field: ScalarField,
    p: BigUint,
    g: BigUint,
}

impl ToyEngine {
    pub fn new(q: BigUint, p: BigUint, g: BigUint) -> Result<Self, EngineError> {
        if q <= BigUint::from(3u32) || !is_probable_prime(&q) {
            return Err(EngineError::OrderNotPrime(q));
        }
        if p != &q * 2u32 + 1u32 {
            return Err(EngineError::NotSafePrime { p, q });
        }
        // p = 2q + 1 with q prime: order of g divides 2q, so g^q = 1 and g != 1
        // is exactly "order q".
        let g = &g % &p;
        if g.is_zero() || g.is_one() || !g.modpow(&q, &p).is_one() {
            return Err(EngineError::BadGenerator(g));
        }
        let field = ScalarField::new(q.clone());
        let gt_len = (p.bits() as usize).div_ceil(8);
        Ok(ToyEngine {
            desc: GroupDescription {
                name: "toy".into(),
                q,
                element_len: field.width(),
                gt_len,
            },
            field,
            p,
            g,
        })
    }

    /// The textbook instance: q = 11, p = 23, g = 2.
    pub fn small() -> Self {
        ToyEngine::new(11u32.into(), 23u32.into(), 2u32.into()).expect("valid toy parameters")
    }

    /// A 61-bit instance, large enough that hash collisions stay rare in
    /// end-to-end demos.
    pub fn demo() -> Self {
        ToyEngine::new(
            2_305_843_009_213_697_249u64.into(),
            4_611_686_018_427_394_499u64.into(),
            4u32.into(),
        )
        .expect("valid toy parameters")
    }

    pub fn modulus(&self) -> &BigUint {
        &self.p
    }

    pub fn base(&self) -> &BigUint {
        &self.g
    }

    /// Builds the element `v mod q`.
    pub fn element(&self, v: u64) -> Scalar {
        self.field.from_u64(v)
    }

    pub fn gt_element(&self, v: u64) -> BigUint {
        BigUint::from(v) % &self.p
    }
}

impl BilinearEngine for ToyEngine {
    type G = Scalar;
    type Gt = BigUint;

    fn description(&self) -> &GroupDescription {
        &self.desc
    }

    fn scalars(&self) -> &ScalarField {
        &self.field
    }

    fn insecure(&self) -> bool {
        true
    }

    fn generator(&self) -> Scalar {
        self.field.one()
    }

    fn identity(&self) -> Scalar {
        self.field.zero()
    }

    fn add(&self, a: &Scalar, b: &Scalar) -> Scalar {
        self.field.add(a, b)
    }

    fn scalar_mul(&self, k: &Scalar, x: &Scalar) -> Scalar {
        self.field.mul(k, x)
    }

    fn pair(&self, a: &Scalar, b: &Scalar) -> BigUint {
        let e = self.field.mul(a, b);
        self.g.modpow(e.value(), &self.p)
    }

    fn gt_identity(&self) -> BigUint {
        BigUint::one()
    }

    fn gt_mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % &self.p
    }

    fn gt_pow(&self, a: &BigUint, k: &Scalar) -> BigUint {
        a.modpow(k.value(), &self.p)
    }

    fn encode_g(&self, x: &Scalar) -> Vec<u8> {
        self.field.encode(x)
    }

    fn decode_g(&self, bytes: &[u8]) -> Result<Scalar, DecodeError> {
        self.field.decode(bytes)
    }

    fn encode_gt(&self, x: &BigUint) -> Vec<u8> {
        let raw = x.to_bytes_be();
        let mut out = vec![0u8; self.desc.gt_len];
        out[self.desc.gt_len - raw.len()..].copy_from_slice(&raw);
        out
    }

    fn decode_gt(&self, bytes: &[u8]) -> Result<BigUint, DecodeError> {
        if bytes.len() != self.desc.gt_len {
            return Err(DecodeError::Length {
                expected: self.desc.gt_len,
                actual: bytes.len(),
            });
        }
        let v = BigUint::from_bytes_be(bytes);
        if v.is_zero() || v >= self.p {
            return Err(DecodeError::OutOfRange);
        }
        if !v.modpow(self.field.order(), &self.p).is_one() {
            return Err(DecodeError::WrongSubgroup);
        }
        Ok(v)
    }

    fn hash_input_len(&self) -> usize {
        self.field.width() + 16
    }

    fn map_candidate(&self, uniform: &[u8]) -> Option<Scalar> {
        let s = self.field.reduce(&BigUint::from_bytes_be(uniform));
        (!s.is_zero()).then_some(s)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn modexp(base: u64, exp: u64, m: u64) -> u64 {
        let mut acc = 1u64;
        for _ in 0..exp {
            acc = acc * base % m;
        }
        acc
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(matches!(
            ToyEngine::new(11u32.into(), 25u32.into(), 2u32.into()),
            Err(EngineError::NotSafePrime { .. })
        ));
        // 22 = -1 mod 23 has order 2
        assert!(matches!(
            ToyEngine::new(11u32.into(), 23u32.into(), 22u32.into()),
            Err(EngineError::BadGenerator(_))
        ));
        // 5 is a generator of all of Z_23*, order 22
        assert!(matches!(
            ToyEngine::new(11u32.into(), 23u32.into(), 5u32.into()),
            Err(EngineError::BadGenerator(_))
        ));
        assert!(matches!(
            ToyEngine::new(9u32.into(), 19u32.into(), 4u32.into()),
            Err(EngineError::OrderNotPrime(_))
        ));
        assert!(matches!(
            ToyEngine::new(3u32.into(), 7u32.into(), 2u32.into()),
            Err(EngineError::OrderNotPrime(_))
        ));
    }

    #[test]
    fn pairing_matches_modexp_oracle() {
        let e = ToyEngine::small();
        assert_eq!(e.pair(&e.element(3), &e.element(4)), e.gt_element(2));
        assert_eq!(e.pair(&e.generator(), &e.generator()), e.gt_element(2));
        for a in 0..11u64 {
            for b in 0..11u64 {
                let expected = modexp(2, (a * b) % 11, 23);
                assert_eq!(e.pair(&e.element(a), &e.element(b)), e.gt_element(expected));
            }
        }
    }

    #[test]
    fn pairing_base_has_order_q() {
        let e = ToyEngine::small();
        let gpp = e.pair(&e.generator(), &e.generator());
        let orders: Vec<u64> = (1..=22u64)
            .filter(|k| modexp(2, *k, 23) == 1)
            .collect();
        assert_eq!(orders[0], 11);
        assert_ne!(gpp, e.gt_identity());
    }

    #[test]
    fn identity_pairs_to_gt_identity() {
        let e = ToyEngine::small();
        for b in 0..11 {
            assert_eq!(e.pair(&e.identity(), &e.element(b)), e.gt_identity());
        }
    }

    #[test]
    fn scalar_mul_examples() {
        let e = ToyEngine::small();
        let f = e.scalars();
        assert_eq!(e.scalar_mul(&f.from_u64(5), &e.element(3)), e.element(4));
        assert_eq!(e.scalar_mul(&f.zero(), &e.element(3)), e.identity());
        let q = f.reduce(f.order());
        assert_eq!(e.scalar_mul(&q, &e.generator()), e.identity());
    }

    #[test]
    fn gt_decode_checks_subgroup() {
        let e = ToyEngine::small();
        assert_eq!(e.decode_gt(&[2]).unwrap(), e.gt_element(2));
        assert_eq!(e.decode_gt(&[5]), Err(DecodeError::WrongSubgroup));
        assert_eq!(e.decode_gt(&[0]), Err(DecodeError::OutOfRange));
        assert_eq!(e.decode_gt(&[23]), Err(DecodeError::OutOfRange));
    }

    #[test]
    fn demo_parameters_are_valid() {
        let e = ToyEngine::demo();
        assert_eq!(e.description().element_len, 8);
        assert_ne!(e.pair(&e.generator(), &e.generator()), e.gt_identity());
    }
}
