//! Monic polynomials over `Z_q` used to mask the broadcast secret.
//!
//! Coefficients are stored low-to-high without the leading 1, so a slice of
//! length `n` describes `a_0 + a_1 x + ... + a_{n-1} x^{n-1} + x^n`.

use crate::bilinear::{Scalar, ScalarField};

/// Expands `prod (x - v_i)` and returns its `n` lower coefficients.
pub fn monic_from_roots(field: &ScalarField, roots: &[Scalar]) -> Vec<Scalar> {
    // full coefficient vector including the leading term, ascending degree
    let mut poly = vec![field.one()];
    for v in roots {
        let mut next = vec![field.zero(); poly.len() + 1];
        for (k, c) in poly.iter().enumerate() {
            next[k + 1] = field.add(&next[k + 1], c);
            next[k] = field.sub(&next[k], &field.mul(v, c));
        }
        poly = next;
    }
    poly.pop();
    poly
}

/// Coefficients of `prod (x - v_i) + secret`, so that `f(v_i) = secret`.
pub fn masking_polynomial(field: &ScalarField, roots: &[Scalar], secret: &Scalar) -> Vec<Scalar> {
    let mut coeffs = monic_from_roots(field, roots);
    if let Some(a0) = coeffs.first_mut() {
        *a0 = field.add(a0, secret);
    }
    coeffs
}

/// Horner evaluation of the monic polynomial at `x`.
pub fn evaluate_monic(field: &ScalarField, coeffs: &[Scalar], x: &Scalar) -> Scalar {
    coeffs
        .iter()
        .rev()
        .fold(field.one(), |acc, c| field.add(&field.mul(&acc, x), c))
}
