//! Symmetric pairing on the supersingular curve `E: y^2 = x^3 + x` over `F_p`.
//!
//! `p = h*q - 1` with `p = 3 (mod 4)`, so `#E(F_p) = p + 1` and the embedding
//! degree is 2. `F_p^2 = F_p[i]/(i^2 + 1)`. The distortion map
//! `psi(x, y) = (-x, i*y)` sends the order-`q` subgroup of `E(F_p)` to a
//! linearly independent subgroup of `E(F_p^2)`, which makes
//! `e(A, B) = Tate(A, psi(B))^((p^2 - 1)/q)` symmetric and non-degenerate.
//!
//! Sizes: `q` has 160 bits, `p` has 512 bits.

use std::sync::{Arc, OnceLock};

use num_bigint::BigUint;
use num_traits::{One, Zero};

use super::{BilinearEngine, DecodeError, GroupDescription, Scalar, ScalarField};

const Q_HEX: &str = "8000000000000000000000000000000000020001";
const H_HEX: &str =
    "fffffffffffffffffffffffffffffffffffbfffe000000000000000000000000000000100010000400000674";

const FIELD_BYTES: usize = 64;
const G_LEN: usize = FIELD_BYTES + 1;
const GT_LEN: usize = 2 * FIELD_BYTES;

/// Affine point; `None` is the point at infinity.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct CurvePoint(Option<(BigUint, BigUint)>);

/// `a + b*i` in `F_p^2`.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct Fp2 {
    re: BigUint,
    im: BigUint,
}

struct Inner {
    desc: GroupDescription,
    field: ScalarField,
    p: BigUint,
    cofactor: BigUint,
    sqrt_exp: BigUint,
    generator: CurvePoint,
}

/// Production engine over the supersingular curve described in the module docs.
#[derive(Clone)]
pub struct TypeAEngine {
    inner: Arc<Inner>,
}

impl std::fmt::Debug for TypeAEngine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("TypeAEngine").finish_non_exhaustive()
    }
}

/// All instances share one parameter set.
impl PartialEq for TypeAEngine {
    fn eq(&self, _: &Self) -> bool {
        true
    }
}

impl Eq for TypeAEngine {}

impl Default for TypeAEngine {
    fn default() -> Self {
        Self::new()
    }
}

impl TypeAEngine {
    pub fn new() -> Self {
        static INNER: OnceLock<Arc<Inner>> = OnceLock::new();
        let inner = INNER.get_or_init(|| Arc::new(Inner::build())).clone();
        TypeAEngine { inner }
    }

    pub fn field_modulus(&self) -> &BigUint {
        &self.inner.p
    }

    pub fn cofactor(&self) -> &BigUint {
        &self.inner.cofactor
    }

    pub fn is_on_curve(&self, pt: &CurvePoint) -> bool {
        match &pt.0 {
            None => true,
            Some((x, y)) => {
                let f = Fp(&self.inner.p);
                f.sqr(y) == f.rhs(x)
            }
        }
    }
}

impl Inner {
    fn build() -> Inner {
        let q = BigUint::parse_bytes(Q_HEX.as_bytes(), 16).unwrap();
        let cofactor = BigUint::parse_bytes(H_HEX.as_bytes(), 16).unwrap();
        let p = &cofactor * &q - 1u32;
        let sqrt_exp = (&p + 1u32) >> 2;
        let field = ScalarField::new(q.clone());
        let mut inner = Inner {
            desc: GroupDescription {
                name: "type-a".into(),
                q,
                element_len: G_LEN,
                gt_len: GT_LEN,
            },
            field,
            p,
            cofactor,
            sqrt_exp,
            generator: CurvePoint(None),
        };
        // Fixed generator: first valid candidate from a public seed.
        let mut ctr = 0u32;
        inner.generator = loop {
            let mut data = b"emcoord type-a generator".to_vec();
            data.extend_from_slice(&ctr.to_be_bytes());
            let mut wide = data.clone();
            wide.resize(FIELD_BYTES + 16, 0);
            if let Some(g) = inner.map(&wide) {
                break g;
            }
            ctr += 1;
        };
        inner
    }

    fn fp(&self) -> Fp<'_> {
        Fp(&self.p)
    }

    fn sqrt(&self, v: &BigUint) -> Option<BigUint> {
        let r = v.modpow(&self.sqrt_exp, &self.p);
        (self.fp().sqr(&r) == *v).then_some(r)
    }

    fn map(&self, uniform: &[u8]) -> Option<CurvePoint> {
        let f = self.fp();
        let x = BigUint::from_bytes_be(&uniform[1..]) % &self.p;
        let mut y = self.sqrt(&f.rhs(&x))?;
        if y.bit(0) != (uniform[0] & 1 == 1) {
            y = f.neg(&y);
        }
        let pt = self.mul(&self.cofactor, &CurvePoint(Some((x, y))));
        pt.0.is_some().then_some(pt)
    }

    fn mul(&self, k: &BigUint, pt: &CurvePoint) -> CurvePoint {
        let Some(base) = &pt.0 else {
            return CurvePoint(None);
        };
        if k.is_zero() {
            return CurvePoint(None);
        }
        let f = self.fp();
        let mut acc = Jacobian::from_affine(base);
        for i in (0..k.bits() - 1).rev() {
            acc = acc.double(&f);
            if k.bit(i) {
                acc = acc.add_affine(base, &f);
            }
        }
        acc.to_affine(&f)
    }

    fn add(&self, a: &CurvePoint, b: &CurvePoint) -> CurvePoint {
        match (&a.0, &b.0) {
            (None, _) => b.clone(),
            (_, None) => a.clone(),
            (Some(pa), Some(pb)) => {
                let f = self.fp();
                Jacobian::from_affine(pa).add_affine(pb, &f).to_affine(&f)
            }
        }
    }

    fn pair(&self, a: &CurvePoint, b: &CurvePoint) -> Fp2 {
        let (Some(pa), Some(pb)) = (&a.0, &b.0) else {
            return Fp2::one();
        };
        let f = self.fp();
        let (xb, yb) = pb;
        let q = &self.desc.q;
        let mut acc = Fp2::one();
        let mut t = Jacobian::from_affine(pa);
        for i in (0..q.bits() - 1).rev() {
            // Tangent at T, scaled by 2*Y*Z^3 (an F_p factor, killed by the
            // final exponentiation). Vertical lines are dropped for the same reason.
            let zz = f.sqr(&t.z);
            let m = f.add(&f.mul(&f.sqr(&t.x), &BigUint::from(3u32)), &f.sqr(&zz));
            let z3 = f.mul(&f.add(&t.y, &t.y), &t.z);
            let re = f.sub(
                &f.mul(&m, &f.add(&f.mul(xb, &zz), &t.x)),
                &f.add(&f.sqr(&t.y), &f.sqr(&t.y)),
            );
            let im = f.mul(yb, &f.mul(&z3, &zz));
            acc = acc.sqr(&f).mul(&Fp2 { re, im }, &f);
            t = t.double(&f);

            if q.bit(i) {
                let (xa, ya) = pa;
                let zz = f.sqr(&t.z);
                let hh = f.sub(&f.mul(xa, &zz), &t.x);
                if hh.is_zero() {
                    // T = -A: vertical line, result is infinity
                    t = Jacobian::infinity();
                    continue;
                }
                let r = f.sub(&f.mul(ya, &f.mul(&t.z, &zz)), &t.y);
                let z3 = f.mul(&t.z, &hh);
                let re = f.sub(&f.mul(&r, &f.add(xb, xa)), &f.mul(ya, &z3));
                let im = f.mul(yb, &z3);
                acc = acc.mul(&Fp2 { re, im }, &f);
                t = t.add_affine(pa, &f);
            }
        }
        // f^(p-1) = conj(f) / f, then ^((p+1)/q) = ^cofactor.
        let easy = acc.conj(&f).mul(&acc.inv(&f), &f);
        easy.pow(&self.cofactor, &f)
    }
}

struct Fp<'a>(&'a BigUint);

impl Fp<'_> {
    fn add(&self, a: &BigUint, b: &BigUint) -> BigUint {
        let s = a + b;
        if &s >= self.0 {
            s - self.0
        } else {
            s
        }
    }

    fn sub(&self, a: &BigUint, b: &BigUint) -> BigUint {
        if a >= b {
            a - b
        } else {
            self.0 - (b - a)
        }
    }

    fn neg(&self, a: &BigUint) -> BigUint {
        if a.is_zero() {
            BigUint::zero()
        } else {
            self.0 - a
        }
    }

    fn mul(&self, a: &BigUint, b: &BigUint) -> BigUint {
        (a * b) % self.0
    }

    fn sqr(&self, a: &BigUint) -> BigUint {
        (a * a) % self.0
    }

    fn inv(&self, a: &BigUint) -> BigUint {
        a.modinv(self.0).expect("inverse of nonzero field element")
    }

    /// `x^3 + x`
    fn rhs(&self, x: &BigUint) -> BigUint {
        self.mul(x, &self.add(&self.sqr(x), &BigUint::one()))
    }
}

impl Fp2 {
    fn one() -> Fp2 {
        Fp2 {
            re: BigUint::one(),
            im: BigUint::zero(),
        }
    }

    fn mul(&self, o: &Fp2, f: &Fp) -> Fp2 {
        let ac = f.mul(&self.re, &o.re);
        let bd = f.mul(&self.im, &o.im);
        let cross = f.mul(&f.add(&self.re, &self.im), &f.add(&o.re, &o.im));
        Fp2 {
            re: f.sub(&ac, &bd),
            im: f.sub(&f.sub(&cross, &ac), &bd),
        }
    }

    fn sqr(&self, f: &Fp) -> Fp2 {
        let re = f.mul(&f.add(&self.re, &self.im), &f.sub(&self.re, &self.im));
        let ab = f.mul(&self.re, &self.im);
        Fp2 {
            re,
            im: f.add(&ab, &ab),
        }
    }

    fn conj(&self, f: &Fp) -> Fp2 {
        Fp2 {
            re: self.re.clone(),
            im: f.neg(&self.im),
        }
    }

    fn inv(&self, f: &Fp) -> Fp2 {
        let norm = f.add(&f.sqr(&self.re), &f.sqr(&self.im));
        let n_inv = f.inv(&norm);
        Fp2 {
            re: f.mul(&self.re, &n_inv),
            im: f.neg(&f.mul(&self.im, &n_inv)),
        }
    }

    fn pow(&self, e: &BigUint, f: &Fp) -> Fp2 {
        if e.is_zero() {
            return Fp2::one();
        }
        let mut acc = self.clone();
        for i in (0..e.bits() - 1).rev() {
            acc = acc.sqr(f);
            if e.bit(i) {
                acc = acc.mul(self, f);
            }
        }
        acc
    }
}

/// Jacobian coordinates: `x = X/Z^2`, `y = Y/Z^3`; `Z = 0` is infinity.
struct Jacobian {
    x: BigUint,
    y: BigUint,
    z: BigUint,
}

impl Jacobian {
    fn infinity() -> Self {
        Jacobian {
            x: BigUint::one(),
            y: BigUint::one(),
            z: BigUint::zero(),
        }
    }

    fn from_affine((x, y): &(BigUint, BigUint)) -> Self {
        Jacobian {
            x: x.clone(),
            y: y.clone(),
            z: BigUint::one(),
        }
    }

    fn double(&self, f: &Fp) -> Self {
        if self.z.is_zero() || self.y.is_zero() {
            return Jacobian::infinity();
        }
        let xx = f.sqr(&self.x);
        let yy = f.sqr(&self.y);
        let zz = f.sqr(&self.z);
        let s = f.mul(&self.x, &yy);
        let s = f.add(&s, &s);
        let s = f.add(&s, &s);
        let m = f.add(&f.add(&f.add(&xx, &xx), &xx), &f.sqr(&zz));
        let x3 = f.sub(&f.sqr(&m), &f.add(&s, &s));
        let yyyy = f.sqr(&yy);
        let eight_yyyy = f.mul(&yyyy, &BigUint::from(8u32));
        let y3 = f.sub(&f.mul(&m, &f.sub(&s, &x3)), &eight_yyyy);
        let z3 = f.mul(&f.add(&self.y, &self.y), &self.z);
        Jacobian {
            x: x3,
            y: y3,
            z: z3,
        }
    }

    fn add_affine(&self, (x2, y2): &(BigUint, BigUint), f: &Fp) -> Self {
        if self.z.is_zero() {
            return Jacobian::from_affine(&(x2.clone(), y2.clone()));
        }
        let zz = f.sqr(&self.z);
        let u2 = f.mul(x2, &zz);
        let s2 = f.mul(y2, &f.mul(&self.z, &zz));
        let h = f.sub(&u2, &self.x);
        let r = f.sub(&s2, &self.y);
        if h.is_zero() {
            return if r.is_zero() {
                self.double(f)
            } else {
                Jacobian::infinity()
            };
        }
        let hh = f.sqr(&h);
        let hhh = f.mul(&h, &hh);
        let v = f.mul(&self.x, &hh);
        let x3 = f.sub(&f.sub(&f.sqr(&r), &hhh), &f.add(&v, &v));
        let y3 = f.sub(&f.mul(&r, &f.sub(&v, &x3)), &f.mul(&self.y, &hhh));
        let z3 = f.mul(&self.z, &h);
        Jacobian {
            x: x3,
            y: y3,
            z: z3,
        }
    }

    fn to_affine(&self, f: &Fp) -> CurvePoint {
        if self.z.is_zero() {
            return CurvePoint(None);
        }
        let zi = f.inv(&self.z);
        let zi2 = f.sqr(&zi);
        let x = f.mul(&self.x, &zi2);
        let y = f.mul(&self.y, &f.mul(&zi2, &zi));
        CurvePoint(Some((x, y)))
    }
}

fn write_fixed(out: &mut Vec<u8>, v: &BigUint) {
    let raw = v.to_bytes_be();
    out.extend(std::iter::repeat_n(0u8, FIELD_BYTES - raw.len()));
    out.extend_from_slice(&raw);
}

impl BilinearEngine for TypeAEngine {
    type G = CurvePoint;
    type Gt = Fp2;

    fn description(&self) -> &GroupDescription {
        &self.inner.desc
    }

    fn scalars(&self) -> &ScalarField {
        &self.inner.field
    }

    fn generator(&self) -> CurvePoint {
        self.inner.generator.clone()
    }

    fn identity(&self) -> CurvePoint {
        CurvePoint(None)
    }

    fn add(&self, a: &CurvePoint, b: &CurvePoint) -> CurvePoint {
        self.inner.add(a, b)
    }

    fn scalar_mul(&self, k: &Scalar, x: &CurvePoint) -> CurvePoint {
        self.inner.mul(k.value(), x)
    }

    fn pair(&self, a: &CurvePoint, b: &CurvePoint) -> Fp2 {
        self.inner.pair(a, b)
    }

    fn gt_identity(&self) -> Fp2 {
        Fp2::one()
    }

    fn gt_mul(&self, a: &Fp2, b: &Fp2) -> Fp2 {
        a.mul(b, &self.inner.fp())
    }

    fn gt_pow(&self, a: &Fp2, k: &Scalar) -> Fp2 {
        a.pow(k.value(), &self.inner.fp())
    }

    fn encode_g(&self, x: &CurvePoint) -> Vec<u8> {
        let mut out = Vec::with_capacity(G_LEN);
        match &x.0 {
            None => out.resize(G_LEN, 0),
            Some((x, y)) => {
                out.push(0x02 | u8::from(y.bit(0)));
                write_fixed(&mut out, x);
            }
        }
        out
    }

    fn decode_g(&self, bytes: &[u8]) -> Result<CurvePoint, DecodeError> {
        if bytes.len() != G_LEN {
            return Err(DecodeError::Length {
                expected: G_LEN,
                actual: bytes.len(),
            });
        }
        let inner = &self.inner;
        match bytes[0] {
            0x00 if bytes[1..].iter().all(|b| *b == 0) => Ok(CurvePoint(None)),
            0x00 => Err(DecodeError::OutOfRange),
            tag @ (0x02 | 0x03) => {
                let x = BigUint::from_bytes_be(&bytes[1..]);
                if x >= inner.p {
                    return Err(DecodeError::OutOfRange);
                }
                let f = inner.fp();
                let mut y = inner.sqrt(&f.rhs(&x)).ok_or(DecodeError::NotOnCurve)?;
                if y.bit(0) != (tag == 0x03) {
                    y = f.neg(&y);
                }
                let pt = CurvePoint(Some((x, y)));
                if inner.mul(&inner.desc.q, &pt).0.is_some() {
                    return Err(DecodeError::WrongSubgroup);
                }
                Ok(pt)
            }
            other => Err(DecodeError::Tag(other)),
        }
    }

    fn encode_gt(&self, x: &Fp2) -> Vec<u8> {
        let mut out = Vec::with_capacity(GT_LEN);
        write_fixed(&mut out, &x.re);
        write_fixed(&mut out, &x.im);
        out
    }

    fn decode_gt(&self, bytes: &[u8]) -> Result<Fp2, DecodeError> {
        if bytes.len() != GT_LEN {
            return Err(DecodeError::Length {
                expected: GT_LEN,
                actual: bytes.len(),
            });
        }
        let inner = &self.inner;
        let re = BigUint::from_bytes_be(&bytes[..FIELD_BYTES]);
        let im = BigUint::from_bytes_be(&bytes[FIELD_BYTES..]);
        if re >= inner.p || im >= inner.p {
            return Err(DecodeError::OutOfRange);
        }
        let v = Fp2 { re, im };
        if v.pow(&inner.desc.q, &inner.fp()) != Fp2::one() {
            return Err(DecodeError::WrongSubgroup);
        }
        Ok(v)
    }

    fn hash_input_len(&self) -> usize {
        1 + FIELD_BYTES + 16
    }

    fn map_candidate(&self, uniform: &[u8]) -> Option<CurvePoint> {
        self.inner.map(uniform)
    }
}
