//! (N, k) Shamir sharing of ring elements, coefficient-wise over `Z_q`.

use std::collections::HashSet;

use rand::Rng;

use crate::error::{Error, Result};
use crate::ring::modular::{add_mod, inv_mod, mul_mod, sub_mod};
use crate::ring::{Distribution, RingElement};

/// A nonzero evaluation point `x` in `Z_q` bound to a client.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct EvalPoint {
    pub client_id: u16,
    pub x: u64,
}

impl EvalPoint {
    /// Points are assigned as `x = id + 1`.
    pub fn for_client(client_id: u16) -> Self {
        Self {
            client_id,
            x: client_id as u64 + 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Share {
    pub point: EvalPoint,
    pub value: RingElement,
}

fn check_points(points: &[EvalPoint], q: u64) -> Result<()> {
    let mut seen = HashSet::with_capacity(points.len());
    for p in points {
        let x = p.x % q;
        if x == 0 || !seen.insert(x) {
            return Err(Error::BadEvalPoint(p.x));
        }
    }
    Ok(())
}

/// Share `secret` at every point with threshold `k`, sampling the blinding
/// polynomials `t_1..t_{k-1}` uniformly from `R_q`.
pub fn make_shares<R: Rng + ?Sized>(
    secret: &RingElement,
    k: usize,
    points: &[EvalPoint],
    rng: &mut R,
) -> Result<Vec<Share>> {
    if k == 0 || k > points.len() {
        return Err(Error::Threshold {
            k,
            n: points.len(),
        });
    }
    check_points(points, secret.context().q())?;
    let blinding = (1..k)
        .map(|_| RingElement::sample(secret.context(), Distribution::Uniform, rng))
        .collect::<Result<Vec<_>>>()?;
    make_shares_with(secret, &blinding, points)
}

/// Evaluate `f(x) = secret + Σ_l t_l x^l` at each point.
pub fn make_shares_with(
    secret: &RingElement,
    blinding: &[RingElement],
    points: &[EvalPoint],
) -> Result<Vec<Share>> {
    let q = secret.context().q();
    check_points(points, q)?;
    points
        .iter()
        .map(|&point| {
            Ok(Share {
                point,
                value: evaluate(secret, blinding, point.x)?,
            })
        })
        .collect()
}

/// Horner evaluation of `c_0 + c_1 x + ... ` with ring-element coefficients.
pub fn evaluate(
    constant: &RingElement,
    higher: &[RingElement],
    x: u64,
) -> Result<RingElement> {
    let mut acc = match higher.last() {
        Some(top) => top.clone(),
        None => return Ok(constant.clone()),
    };
    for c in higher.iter().rev().skip(1) {
        acc = acc.scalar_mul(x).add(c)?;
    }
    acc.scalar_mul(x).add(constant)
}

/// Lagrange basis at zero: `r_i = Π_{j≠i} x_j (x_j - x_i)^{-1} mod q`.
pub fn lagrange_at_zero(points: &[EvalPoint], k: usize, q: u64) -> Result<Vec<u64>> {
    if points.len() != k || k == 0 {
        return Err(Error::ShareCount {
            needed: k,
            got: points.len(),
        });
    }
    check_points(points, q)?;
    points
        .iter()
        .enumerate()
        .map(|(i, pi)| {
            let mut num = 1u64;
            let mut den = 1u64;
            for (j, pj) in points.iter().enumerate() {
                if i != j {
                    num = mul_mod(num, pj.x % q, q);
                    den = mul_mod(den, sub_mod(pj.x % q, pi.x % q, q), q);
                }
            }
            let inv = inv_mod(den, q).ok_or(Error::BadEvalPoint(pi.x))?;
            Ok(mul_mod(num, inv, q))
        })
        .collect()
}

/// Inverse-Vandermonde coefficients: `matrix[l][i]` is the weight of share
/// `i` in the degree-`l` coefficient of the interpolating polynomial. Row 0
/// equals [`lagrange_at_zero`].
pub fn coeff_recon_coeffs(points: &[EvalPoint], k: usize, q: u64) -> Result<Vec<Vec<u64>>> {
    if points.len() != k || k == 0 {
        return Err(Error::ShareCount {
            needed: k,
            got: points.len(),
        });
    }
    check_points(points, q)?;
    let mut matrix = vec![vec![0u64; k]; k];
    for (i, pi) in points.iter().enumerate() {
        // basis numerator Π_{j≠i} (x - x_j), coefficients low to high
        let mut basis = vec![1u64];
        let mut den = 1u64;
        for (j, pj) in points.iter().enumerate() {
            if i == j {
                continue;
            }
            let xj = pj.x % q;
            let mut next = vec![0u64; basis.len() + 1];
            for (d, &c) in basis.iter().enumerate() {
                next[d + 1] = add_mod(next[d + 1], c, q);
                next[d] = sub_mod(next[d], mul_mod(c, xj, q), q);
            }
            basis = next;
            den = mul_mod(den, sub_mod(pi.x % q, xj, q), q);
        }
        let inv = inv_mod(den, q).ok_or(Error::BadEvalPoint(pi.x))?;
        for (l, row) in matrix.iter_mut().enumerate() {
            row[i] = mul_mod(basis[l], inv, q);
        }
    }
    Ok(matrix)
}

/// `Σ r_i · share_i` over exactly `k` shares.
pub fn reconstruct(shares: &[Share], k: usize) -> Result<RingElement> {
    let first = shares.first().ok_or(Error::ShareCount { needed: k, got: 0 })?;
    let ctx = first.value.context();
    let points: Vec<EvalPoint> = shares.iter().map(|s| s.point).collect();
    let coeffs = lagrange_at_zero(&points, k, ctx.q())?;
    let mut acc = RingElement::zero(ctx);
    for (share, &r) in shares.iter().zip(&coeffs) {
        acc.add_assign(&share.value.scalar_mul(r))?;
    }
    Ok(acc)
}
