//! Multi-receiver signcryption.
//!
//! The sender hides a 32-byte seed `s` behind a scalar `p`, and publishes the
//! monic polynomial `f(x) = prod (x - v_i) + p` where `v_i` can only be
//! computed by receiver `i`. Each receiver evaluates `f(v_i) = p`, unmasks
//! `s`, and expands it into the keystream.
//!
//! Two details differ from a literal reading of the construction and are
//! needed for it to work:
//!
//! * `J = r * mpk`, so the sender's `e(Q_i, J)` equals the receiver's
//!   `e(S_i, U)` with `U = r * P`.
//! * `p = H2(s)`. A receiver holding a valid event key that was not listed
//!   passes both pairing checks but recovers a wrong `p`; binding `p` to `s`
//!   lets it detect that and reject instead of returning noise.
//!
//! Verification also checks `e(T, P) == e(Q_a, U)`, which ties `T` to the
//! claimed sender. Without it the pairing equations hold for a `T` built
//! from any valid private key, so the sender field would be unauthenticated.

use std::collections::HashSet;

use rand::RngCore;

use super::poly::{evaluate_monic, masking_polynomial};
use super::{
    check_message, derive_event_public, xor_in_place, EventKeys, IbscError, Reject, SystemParams,
};
use crate::bilinear::{
    h2_to_scalar, h3_mask, h4_expand, h5_bind, BilinearEngine, Scalar, SEED_LEN,
};

/// `(c, T, U, V, W, X, a_0 .. a_{n-1})` plus routing fields.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BroadcastEnvelope<E: BilinearEngine> {
    pub sender_id: Vec<u8>,
    pub event_id: String,
    pub t: E::G,
    pub u: E::G,
    pub w: E::G,
    pub x: E::G,
    pub v: [u8; SEED_LEN],
    pub coeffs: Vec<Scalar>,
    pub c: Vec<u8>,
}

/// Randomness consumed by one broadcast signcryption. `r_retry` replaces `r`
/// if the first draw makes two receivers' `v_i` collide.
#[derive(Clone, Debug)]
pub struct BroadcastNonces {
    pub r: Scalar,
    pub r_retry: Scalar,
    pub r_prime: Scalar,
    pub seed: [u8; SEED_LEN],
}

impl BroadcastNonces {
    pub fn random<E: BilinearEngine, R: RngCore + ?Sized>(engine: &E, rng: &mut R) -> Self {
        let f = engine.scalars();
        let r = f.random_nonzero(rng);
        let r_retry = f.random_nonzero(rng);
        let r_prime = f.random_nonzero(rng);
        let mut seed = [0u8; SEED_LEN];
        rng.fill_bytes(&mut seed);
        BroadcastNonces {
            r,
            r_retry,
            r_prime,
            seed,
        }
    }
}

fn receiver_tag<E: BilinearEngine>(engine: &E, y: &E::Gt) -> Scalar {
    h2_to_scalar(engine, &engine.encode_gt(y))
}

fn mask<E: BilinearEngine>(engine: &E, p: &Scalar) -> [u8; SEED_LEN] {
    h3_mask(&engine.scalars().encode(p))
}

fn binding<E: BilinearEngine>(
    engine: &E,
    c: &[u8],
    x: &E::G,
    u: &E::G,
    v: &[u8],
    coeffs: &[Scalar],
) -> Scalar {
    let x = engine.encode_g(x);
    let u = engine.encode_g(u);
    let encoded: Vec<Vec<u8>> = coeffs.iter().map(|a| engine.scalars().encode(a)).collect();
    let mut parts: Vec<&[u8]> = vec![c, &x, &u, v];
    parts.extend(encoded.iter().map(Vec::as_slice));
    h5_bind(engine, &parts)
}

pub fn signcrypt_broadcast<E: BilinearEngine, R: RngCore + ?Sized>(
    params: &SystemParams<E>,
    sender: &EventKeys<E>,
    receiver_ids: &[&[u8]],
    m: &[u8],
    rng: &mut R,
) -> Result<BroadcastEnvelope<E>, IbscError> {
    let nonces = BroadcastNonces::random(&params.engine, rng);
    signcrypt_broadcast_with(params, sender, receiver_ids, m, &nonces)
}

pub fn signcrypt_broadcast_with<E: BilinearEngine>(
    params: &SystemParams<E>,
    sender: &EventKeys<E>,
    receiver_ids: &[&[u8]],
    m: &[u8],
    nonces: &BroadcastNonces,
) -> Result<BroadcastEnvelope<E>, IbscError> {
    check_message(m)?;
    if receiver_ids.is_empty() {
        return Err(IbscError::NoReceivers);
    }
    let mut seen = HashSet::new();
    for id in receiver_ids {
        if !seen.insert(*id) {
            return Err(IbscError::DuplicateReceiver(
                String::from_utf8_lossy(id).into_owned(),
            ));
        }
    }
    let e = &params.engine;
    let f = e.scalars();
    let receivers = receiver_ids
        .iter()
        .map(|id| derive_event_public(params, id, &sender.ctx))
        .collect::<Result<Vec<_>, _>>()?;

    let tags_for = |r: &Scalar| -> Option<Vec<Scalar>> {
        let j = e.scalar_mul(r, &params.mpk);
        let tags: Vec<Scalar> = receivers
            .iter()
            .map(|q| receiver_tag(e, &e.pair(q, &j)))
            .collect();
        let distinct: HashSet<_> = tags.iter().collect();
        (distinct.len() == tags.len()).then_some(tags)
    };
    let (r, tags) = match tags_for(&nonces.r) {
        Some(tags) => (nonces.r.clone(), tags),
        None => match tags_for(&nonces.r_retry) {
            Some(tags) => (nonces.r_retry.clone(), tags),
            None => return Err(IbscError::ReceiverCollision),
        },
    };

    let t = e.scalar_mul(&r, &sender.public);
    let u = e.scalar_mul(&r, &params.generator);
    let x = e.scalar_mul(&nonces.r_prime, &t);

    let p = h2_to_scalar(e, &nonces.seed);
    let coeffs = masking_polynomial(f, &tags, &p);
    let mut v = nonces.seed;
    xor_in_place(&mut v, &mask(e, &p));

    let mut c = m.to_vec();
    xor_in_place(&mut c, &h4_expand(&nonces.seed, m.len())?);

    let h = binding(e, &c, &x, &u, &v, &coeffs);
    let w = e.scalar_mul(&f.mul(&f.add(&nonces.r_prime, &h), &r), &sender.secret);

    Ok(BroadcastEnvelope {
        sender_id: sender.id.clone(),
        event_id: sender.ctx.event_id.clone(),
        t,
        u,
        w,
        x,
        v,
        coeffs,
        c,
    })
}

pub fn unsigncrypt_broadcast<E: BilinearEngine>(
    params: &SystemParams<E>,
    receiver: &EventKeys<E>,
    sender_id: &[u8],
    env: &BroadcastEnvelope<E>,
) -> Result<Vec<u8>, Reject> {
    let e = &params.engine;
    let f = e.scalars();
    if env.sender_id != sender_id
        || env.event_id != receiver.ctx.event_id
        || env.c.is_empty()
        || env.coeffs.is_empty()
        || e.is_identity(&env.t)
        || e.is_identity(&env.u)
    {
        return Err(Reject);
    }
    let q_a = derive_event_public(params, sender_id, &receiver.ctx).map_err(|_| Reject)?;

    if e.pair(&env.t, &params.generator) != e.pair(&q_a, &env.u) {
        return Err(Reject);
    }
    let h = binding(e, &env.c, &env.x, &env.u, &env.v, &env.coeffs);
    let x_ht = e.add(&env.x, &e.scalar_mul(&h, &env.t));
    // public verification
    if e.pair(&env.w, &params.generator) != e.pair(&x_ht, &params.mpk) {
        return Err(Reject);
    }
    // receiver verification
    if e.pair(&env.w, &receiver.public) != e.pair(&x_ht, &receiver.secret) {
        return Err(Reject);
    }

    let tag = receiver_tag(e, &e.pair(&receiver.secret, &env.u));
    let p = evaluate_monic(f, &env.coeffs, &tag);
    let mut seed = env.v;
    xor_in_place(&mut seed, &mask(e, &p));
    if h2_to_scalar(e, &seed) != p {
        return Err(Reject);
    }
    let mut m = env.c.clone();
    xor_in_place(&mut m, &h4_expand(&seed, env.c.len()).map_err(|_| Reject)?);
    Ok(m)
}
