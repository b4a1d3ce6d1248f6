use rand::RngCore;

use super::{
    check_message, derive_event_public, xor_in_place, EventKeys, IbscError, Reject, SystemParams,
};
use crate::bilinear::{h2_to_scalar, h3_mask, h4_expand, BilinearEngine, Scalar};

/// Single-receiver envelope `(c, T, U)` plus routing fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct P2PEnvelope<E: BilinearEngine> {
    pub sender_id: Vec<u8>,
    pub event_id: String,
    pub t: E::G,
    pub u: E::G,
    pub c: Vec<u8>,
}

/// `r = H2(T || m)`
fn commitment<E: BilinearEngine>(engine: &E, t: &E::G, m: &[u8]) -> Scalar {
    let mut buf = engine.encode_g(t);
    buf.extend_from_slice(m);
    h2_to_scalar(engine, &buf)
}

fn keystream<E: BilinearEngine>(engine: &E, y: &E::Gt, len: usize) -> Vec<u8> {
    let seed = h3_mask(&engine.encode_gt(y));
    h4_expand(&seed, len).expect("message length checked nonzero")
}

pub fn signcrypt_p2p<E: BilinearEngine, R: RngCore + ?Sized>(
    params: &SystemParams<E>,
    sender: &EventKeys<E>,
    receiver_id: &[u8],
    m: &[u8],
    rng: &mut R,
) -> Result<P2PEnvelope<E>, IbscError> {
    let x = params.engine.scalars().random_nonzero(rng);
    signcrypt_p2p_with_nonce(params, sender, receiver_id, m, &x)
}

/// [`signcrypt_p2p`] with the ephemeral `x` supplied by the caller.
/// Reusing `x` across messages leaks the sender's key; tests only.
pub fn signcrypt_p2p_with_nonce<E: BilinearEngine>(
    params: &SystemParams<E>,
    sender: &EventKeys<E>,
    receiver_id: &[u8],
    m: &[u8],
    x: &Scalar,
) -> Result<P2PEnvelope<E>, IbscError> {
    check_message(m)?;
    assert!(!x.is_zero(), "ephemeral scalar must be nonzero");
    let e = &params.engine;
    let q_b = derive_event_public(params, receiver_id, &sender.ctx)?;

    let t = e.scalar_mul(x, &params.generator);
    let r = commitment(e, &t, m);
    let w = e.scalar_mul(x, &params.mpk);
    let u = e.add(&e.scalar_mul(&r, &sender.secret), &w);
    let y = e.pair(&w, &q_b);
    let mut c = m.to_vec();
    xor_in_place(&mut c, &keystream(e, &y, m.len()));

    Ok(P2PEnvelope {
        sender_id: sender.id.clone(),
        event_id: sender.ctx.event_id.clone(),
        t,
        u,
        c,
    })
}

/// Decrypts, then accepts iff `e(U, P) == e(Q_a, mpk)^r * e(T, mpk)`.
pub fn unsigncrypt_p2p<E: BilinearEngine>(
    params: &SystemParams<E>,
    receiver: &EventKeys<E>,
    sender_id: &[u8],
    env: &P2PEnvelope<E>,
) -> Result<Vec<u8>, Reject> {
    let e = &params.engine;
    if env.sender_id != sender_id
        || env.event_id != receiver.ctx.event_id
        || env.c.is_empty()
        || e.is_identity(&env.t)
    {
        return Err(Reject);
    }
    let q_a = derive_event_public(params, sender_id, &receiver.ctx).map_err(|_| Reject)?;

    let y = e.pair(&receiver.secret, &env.t);
    let mut m = env.c.clone();
    xor_in_place(&mut m, &keystream(e, &y, env.c.len()));
    let r = commitment(e, &env.t, &m);

    let lhs = e.pair(&env.u, &params.generator);
    let rhs = e.gt_mul(
        &e.gt_pow(&e.pair(&q_a, &params.mpk), &r),
        &e.pair(&env.t, &params.mpk),
    );
    if lhs == rhs {
        Ok(m)
    } else {
        Err(Reject)
    }
}

#[cfg(test)]
mod tests {
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    use super::*;
    use crate::bilinear::{h1_to_group, ToyEngine};
    use crate::ibsc::{derive_event_keys, setup, setup_with_secret, EventContext, MicroDegrees};

    fn ctx() -> EventContext {
        EventContext::new("ev", MicroDegrees(1_500_000), MicroDegrees(-2_000_000)).unwrap()
    }

    #[test]
    fn toy_vector_q11() {
        let e = ToyEngine::small();
        let f = e.scalars().clone();
        let (params, msk) = setup_with_secret(e.clone(), f.from_u64(7));
        let a = derive_event_keys(&params, &msk, b"a", &ctx()).unwrap();
        let b = derive_event_keys(&params, &msk, b"b", &ctx()).unwrap();
        let x = f.from_u64(5);
        let env = signcrypt_p2p_with_nonce(&params, &a, b"b", &[0x41], &x).unwrap();

        // Independent recomputation in Z_11: T = x, W = x*msk, U = r*msk*Q_a + W.
        let q_a = h1_to_group(&e, &ctx().identity_input(b"a")).unwrap();
        assert_eq!(q_a, a.public);
        assert_eq!(env.t, e.element(5));
        let r = commitment(&e, &env.t, &[0x41]);
        let expected_u = (r.value() * 7u32 * q_a.value() + 35u32) % 11u32;
        assert_eq!(env.u.value(), &expected_u);

        assert_eq!(unsigncrypt_p2p(&params, &b, b"a", &env), Ok(vec![0x41]));
    }

    #[test]
    fn ciphertext_length_matches_and_nonces_vary() {
        let e = ToyEngine::demo();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let (params, msk) = setup(e, &mut rng);
        let a = derive_event_keys(&params, &msk, b"a", &ctx()).unwrap();
        let m = b"status: two casualties at gate 4";
        let e1 = signcrypt_p2p(&params, &a, b"b", m, &mut rng).unwrap();
        let e2 = signcrypt_p2p(&params, &a, b"b", m, &mut rng).unwrap();
        assert_eq!(e1.c.len(), m.len());
        assert_ne!(e1.t, e2.t);
    }

    #[test]
    fn wrong_sender_and_wrong_event_reject() {
        let e = ToyEngine::demo();
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let (params, msk) = setup(e, &mut rng);
        let a = derive_event_keys(&params, &msk, b"a", &ctx()).unwrap();
        let b = derive_event_keys(&params, &msk, b"b", &ctx()).unwrap();
        let env = signcrypt_p2p(&params, &a, b"b", b"hello", &mut rng).unwrap();

        let mut forged = env.clone();
        forged.sender_id = b"mallory".to_vec();
        assert_eq!(unsigncrypt_p2p(&params, &b, b"mallory", &forged), Err(Reject));
        assert_eq!(unsigncrypt_p2p(&params, &b, b"mallory", &env), Err(Reject));

        let mut other = ctx();
        other.event_id = "ev-other".into();
        let b_other = derive_event_keys(&params, &msk, b"b", &other).unwrap();
        let mut relabeled = env.clone();
        relabeled.event_id = other.event_id.clone();
        assert_eq!(unsigncrypt_p2p(&params, &b_other, b"a", &relabeled), Err(Reject));
    }

    #[test]
    fn rejects_empty_and_oversized_messages() {
        let e = ToyEngine::demo();
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let (params, msk) = setup(e, &mut rng);
        let a = derive_event_keys(&params, &msk, b"a", &ctx()).unwrap();
        assert_eq!(
            signcrypt_p2p(&params, &a, b"b", b"", &mut rng),
            Err(IbscError::EmptyMessage)
        );
        let big = vec![0u8; super::super::MAX_MESSAGE_LEN + 1];
        assert!(matches!(
            signcrypt_p2p(&params, &a, b"b", &big, &mut rng),
            Err(IbscError::MessageTooLarge(_))
        ));
    }
}
