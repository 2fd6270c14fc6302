//! The cryptographic steps of setup, aggregation, threshold decryption and
//! share issuance for new users, free of any messaging.

use std::collections::BTreeSet;
use std::sync::Arc;

use rand::Rng;

use crate::bfv::{self, Ciphertext, Plaintext, PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::ring::modular::{add_mod, mul_mod};
use crate::ring::{Distribution, RingContext, RingElement, RingParams};
use crate::shamir::{self, EvalPoint, Share};

#[derive(Debug, Clone)]
pub struct SetupOutput {
    pub secret: SecretKey,
    /// One share per roster point, in roster order (including our own).
    pub shares: Vec<Share>,
    /// `p0_i = -(p1·s_i + e_i)`.
    pub pk_share: RingElement,
}

pub fn client_setup<R: Rng + ?Sized>(
    ctx: &Arc<RingContext>,
    k: usize,
    p1: &RingElement,
    points: &[EvalPoint],
    rng: &mut R,
) -> Result<SetupOutput> {
    if points.is_empty() {
        return Err(Error::State("setup needs the roster of evaluation points".into()));
    }
    if p1.params() != ctx.params() {
        return Err(Error::ParamMismatch);
    }
    let secret = bfv::keygen_secret(ctx, rng);
    let shares = shamir::make_shares(&secret.s, k, points, rng)?;
    let pk = bfv::keygen_public(&secret, p1, rng)?;
    Ok(SetupOutput {
        secret,
        shares,
        pk_share: pk.p0,
    })
}

/// `s'_i = Σ_j s_{j,i}` over the shares addressed to one client.
pub fn combine_key_shares(incoming: &[RingElement]) -> Result<RingElement> {
    let (first, rest) = incoming
        .split_first()
        .ok_or_else(|| Error::State("no incoming key shares".into()))?;
    let mut acc = first.clone();
    for s in rest {
        acc.add_assign(s)?;
    }
    Ok(acc)
}

/// `cpk = (Σ p0_i, p1)`.
pub fn server_setup_aggregate(p0_shares: &[RingElement], p1: &RingElement) -> Result<PublicKey> {
    if p0_shares.is_empty() {
        return Err(Error::SetupAborted("no public-key shares".into()));
    }
    Ok(PublicKey {
        p0: combine_key_shares(p0_shares)?,
        p1: p1.clone(),
    })
}

pub fn client_encrypt_input<R: Rng + ?Sized>(
    g: &[i64],
    cpk: &PublicKey,
    rng: &mut R,
) -> Result<Vec<Ciphertext>> {
    let params = cpk.p0.params();
    bfv::encode(g, params)?
        .iter()
        .enumerate()
        .map(|(j, m)| bfv::encrypt(cpk, m, j as u32, rng))
        .collect()
}

/// Chunk-wise sum of every contributor's ciphertexts.
pub fn server_aggregate_ciphertexts(uploads: &[&[Ciphertext]]) -> Result<Vec<Ciphertext>> {
    let (first, rest) = uploads
        .split_first()
        .ok_or_else(|| Error::State("no ciphertexts to aggregate".into()))?;
    let mut acc = first.to_vec();
    for cts in rest {
        if cts.len() != acc.len() {
            return Err(Error::Dimension {
                expected: acc.len(),
                got: cts.len(),
            });
        }
        for (a, b) in acc.iter_mut().zip(cts.iter()) {
            *a = bfv::ct_add(a, b)?;
        }
    }
    Ok(acc)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selection {
    pub selected: Vec<EvalPoint>,
    /// `r_{a_i}`, aligned with `selected`.
    pub coeffs: Vec<u64>,
}

/// Pick the `k` lowest-id available share holders and their Lagrange
/// coefficients at zero.
pub fn server_select_and_coeffs(
    round: u32,
    holders: &[EvalPoint],
    available: &BTreeSet<u16>,
    k: usize,
    q: u64,
) -> Result<Selection> {
    let mut candidates: Vec<EvalPoint> = holders
        .iter()
        .filter(|p| available.contains(&p.client_id))
        .copied()
        .collect();
    candidates.sort_by_key(|p| p.client_id);
    if candidates.len() < k {
        return Err(Error::RoundAborted {
            round,
            reason: format!("{} of {k} required decryptors available", candidates.len()),
        });
    }
    candidates.truncate(k);
    let coeffs = shamir::lagrange_at_zero(&candidates, k, q)?;
    Ok(Selection {
        selected: candidates,
        coeffs,
    })
}

/// Per chunk `h = r·s'·c1 + e_smg` with fresh smudging noise.
pub fn client_decryption_share<R: Rng + ?Sized>(
    c1s: &[RingElement],
    r: u64,
    s_prime: &RingElement,
    rng: &mut R,
) -> Result<Vec<RingElement>> {
    let rs = s_prime.scalar_mul(r);
    c1s.iter()
        .map(|c1| {
            let e = RingElement::sample(s_prime.context(), Distribution::Smudging, rng)?;
            rs.mul(c1)?.add(&e)
        })
        .collect()
}

/// `c0 + Σ h` for every chunk, the quantity that is scaled and rounded.
pub fn combine_decryption_shares(
    agg: &[Ciphertext],
    shares: &[&[RingElement]],
) -> Result<Vec<RingElement>> {
    agg.iter()
        .enumerate()
        .map(|(j, ct)| {
            let mut v = ct.c0.clone();
            for h in shares {
                let hj = h.get(j).ok_or(Error::Dimension {
                    expected: agg.len(),
                    got: h.len(),
                })?;
                v.add_assign(hj)?;
            }
            Ok(v)
        })
        .collect()
}

/// Round and decode `(p/q)(c0 + Σ h)` back to the aggregate vector.
pub fn server_finalize_round(
    agg: &[Ciphertext],
    shares: &[&[RingElement]],
    d: usize,
    params: &RingParams,
) -> Result<Vec<i64>> {
    let polys: Vec<Plaintext> = combine_decryption_shares(agg, shares)?
        .iter()
        .map(bfv::scale_and_round)
        .collect();
    bfv::decode(&polys, d, params)
}

/// Residual noise `c0 + Σh - Δ·m` per chunk, given the true plaintext sum.
/// Test instrumentation; needs the answer.
pub fn decryption_noise(
    agg: &[Ciphertext],
    shares: &[&[RingElement]],
    expected: &[i64],
) -> Result<Vec<RingElement>> {
    let Some(first) = agg.first() else {
        return Ok(Vec::new());
    };
    let ctx = first.c0.context();
    let params = ctx.params();
    // the expected sum reduced into the plaintext range, as decryption sees it
    let reduced: Vec<i64> = expected
        .iter()
        .map(|&x| crate::ring::modular::center_i128(x as i128, params.p))
        .collect();
    let polys = bfv::encode(&reduced, params)?;
    combine_decryption_shares(agg, shares)?
        .iter()
        .zip(&polys)
        .map(|(v, m)| v.sub(&bfv::scaled_message(ctx, m)?))
        .collect()
}

/// `f̂_a(x_new) = s'_a·(r_a + Σ_l r_{a,l} x_new^l)`, where `column` holds
/// `[r_a, r_{a,1}, ..., r_{a,k-1}]`.
pub fn helper_aux_share(
    s_prime: &RingElement,
    column: &[u64],
    x_new: u64,
    existing: &[EvalPoint],
) -> Result<RingElement> {
    let q = s_prime.context().q();
    if x_new % q == 0 || existing.iter().any(|p| p.x % q == x_new % q) {
        return Err(Error::BadEvalPoint(x_new));
    }
    let x = x_new % q;
    let mut acc = 0u64;
    for &c in column.iter().rev() {
        acc = add_mod(mul_mod(acc, x, q), c % q, q);
    }
    Ok(s_prime.scalar_mul(acc))
}

/// The new user's key share is the sum of the `k` helper evaluations.
pub fn newuser_assemble(aux: &[RingElement], k: usize, point: EvalPoint) -> Result<Share> {
    if aux.len() != k {
        return Err(Error::ShareCount {
            needed: k,
            got: aux.len(),
        });
    }
    Ok(Share {
        point,
        value: combine_key_shares(aux)?,
    })
}

/// Column `i` of the inverse-Vandermonde matrix: helper `i`'s weights.
pub fn helper_columns(helpers: &[EvalPoint], k: usize, q: u64) -> Result<Vec<Vec<u64>>> {
    let matrix = shamir::coeff_recon_coeffs(helpers, k, q)?;
    Ok((0..k).map(|i| matrix.iter().map(|row| row[i]).collect()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::modular::center;
    use crate::seeds::derive_rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    struct Net {
        ctx: Arc<RingContext>,
        points: Vec<EvalPoint>,
        outputs: Vec<SetupOutput>,
        key_shares: Vec<RingElement>,
        cpk: PublicKey,
    }

    fn setup(params: RingParams, n_clients: usize, k: usize, seed: u64) -> Net {
        let ctx = RingContext::new(params).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        let p1 = RingElement::sample(&ctx, Distribution::Uniform, &mut rng).unwrap();
        let points: Vec<EvalPoint> = (0..n_clients as u16).map(EvalPoint::for_client).collect();
        let outputs: Vec<SetupOutput> = (0..n_clients)
            .map(|i| {
                client_setup(&ctx, k, &p1, &points, &mut derive_rng(seed, "client", i as u64, 0)).unwrap()
            })
            .collect();
        let key_shares = (0..n_clients)
            .map(|j| {
                let incoming: Vec<RingElement> =
                    outputs.iter().map(|o| o.shares[j].value.clone()).collect();
                combine_key_shares(&incoming).unwrap()
            })
            .collect();
        let pk_shares: Vec<RingElement> = outputs.iter().map(|o| o.pk_share.clone()).collect();
        let cpk = server_setup_aggregate(&pk_shares, &p1).unwrap();
        Net {
            ctx,
            points,
            outputs,
            key_shares,
            cpk,
        }
    }

    fn collective_secret(net: &Net) -> SecretKey {
        let s: Vec<RingElement> = net.outputs.iter().map(|o| o.secret.s.clone()).collect();
        SecretKey {
            s: combine_key_shares(&s).unwrap(),
        }
    }

    fn threshold_decrypt(
        net: &Net,
        agg: &[Ciphertext],
        available: &BTreeSet<u16>,
        k: usize,
        d: usize,
        rng: &mut ChaCha20Rng,
    ) -> Result<Vec<i64>> {
        let sel = server_select_and_coeffs(1, &net.points, available, k, net.ctx.q())?;
        let c1s: Vec<RingElement> = agg.iter().map(|c| c.c1.clone()).collect();
        let hs: Vec<Vec<RingElement>> = sel
            .selected
            .iter()
            .zip(&sel.coeffs)
            .map(|(p, &r)| {
                client_decryption_share(&c1s, r, &net.key_shares[p.client_id as usize], rng).unwrap()
            })
            .collect();
        let refs: Vec<&[RingElement]> = hs.iter().map(|h| h.as_slice()).collect();
        server_finalize_round(agg, &refs, d, net.ctx.params())
    }

    #[test]
    fn degenerate_single_client() {
        let net = setup(RingParams::toy(), 1, 1, 1);
        assert_eq!(net.outputs[0].shares.len(), 1);
        assert_eq!(net.key_shares[0], net.outputs[0].secret.s);
        let mut rng = ChaCha20Rng::seed_from_u64(2);
        let cts = client_encrypt_input(&[1, -2, 3, 7], &net.cpk, &mut rng).unwrap();
        let m = bfv::decrypt(&net.outputs[0].secret, &cts[0]).unwrap();
        assert_eq!(m.coeffs, vec![1, -2, 3, 7]);
    }

    #[test]
    fn collective_public_key_noise() {
        let net = setup(RingParams::toy(), 3, 2, 3);
        let s = collective_secret(&net);
        // Σ p0_i + p1·Σ s_i = -Σ e_i
        let residual = net.cpk.p0.add(&net.cpk.p1.mul(&s.s).unwrap()).unwrap();
        assert!(residual.inf_norm() <= 3 * net.ctx.params().error_bound);
        assert!(net.outputs.iter().all(|o| o.shares.len() == 3));
    }

    #[test]
    fn collective_round_trip() {
        let net = setup(RingParams::toy(), 3, 2, 4);
        let s = collective_secret(&net);
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        for _ in 0..50 {
            let m: Vec<i64> = (0..4).map(|_| rng.gen_range(-8..8)).collect();
            let cts = client_encrypt_input(&m, &net.cpk, &mut rng).unwrap();
            assert_eq!(bfv::decrypt(&s, &cts[0]).unwrap().coeffs, m);
        }
    }

    #[test]
    fn chunking_of_large_vectors() {
        let net = setup(RingParams::new(8192, crate::ring::Q60, 1 << 20).unwrap(), 1, 1, 6);
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let cts = client_encrypt_input(&vec![1; 200_000], &net.cpk, &mut rng).unwrap();
        assert_eq!(cts.len(), 25);
    }

    #[test]
    fn encryptions_are_randomized() {
        let net = setup(RingParams::toy(), 2, 2, 7);
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let a = client_encrypt_input(&[1, 2, 3, 4], &net.cpk, &mut rng).unwrap();
        let b = client_encrypt_input(&[1, 2, 3, 4], &net.cpk, &mut rng).unwrap();
        assert_ne!(a, b);
        let zero = client_encrypt_input(&[0; 4], &net.cpk, &mut rng).unwrap();
        let s = collective_secret(&net);
        assert_eq!(bfv::decrypt(&s, &zero[0]).unwrap().coeffs, vec![0; 4]);
    }

    #[test]
    fn three_clients_one_dropout() {
        let params = RingParams::toy().with_smudging(10);
        let net = setup(params, 3, 2, 8);
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        let inputs = [vec![1, 2, -3, 0], vec![2, -1, 1, 1], vec![-2, 3, 0, 4]];
        let cts: Vec<Vec<Ciphertext>> = inputs
            .iter()
            .map(|g| client_encrypt_input(g, &net.cpk, &mut rng).unwrap())
            .collect();
        let refs: Vec<&[Ciphertext]> = cts.iter().map(|c| c.as_slice()).collect();
        let agg = server_aggregate_ciphertexts(&refs).unwrap();
        let available = BTreeSet::from([0, 2]);
        let out = threshold_decrypt(&net, &agg, &available, 2, 4, &mut rng).unwrap();
        assert_eq!(out, vec![1, 4, -2, 5]);
        // single contributor is the identity
        let single = server_aggregate_ciphertexts(&refs[..1]).unwrap();
        assert_eq!(single, cts[0]);
    }

    #[test]
    fn selection_rules() {
        let q = 65537;
        let points: Vec<EvalPoint> = (0..3).map(EvalPoint::for_client).collect();
        let sel = server_select_and_coeffs(4, &points, &BTreeSet::from([0, 2]), 2, q).unwrap();
        assert_eq!(
            sel.selected.iter().map(|p| p.client_id).collect::<Vec<_>>(),
            vec![0, 2]
        );
        let inv2 = crate::ring::modular::inv_mod(2, q).unwrap();
        assert_eq!(sel.coeffs, vec![mul_mod(3, inv2, q), mul_mod(q - 1, inv2, q)]);
        let all = server_select_and_coeffs(4, &points, &BTreeSet::from([0, 1, 2]), 3, q).unwrap();
        assert_eq!(all.coeffs, shamir::lagrange_at_zero(&points, 3, q).unwrap());
        let err = server_select_and_coeffs(4, &points, &BTreeSet::from([1]), 2, q).unwrap_err();
        assert!(matches!(err, Error::RoundAborted { round: 4, .. }));
    }

    #[test]
    fn decryption_share_without_smudging_is_plain_decryption() {
        let net = setup(RingParams::toy(), 1, 1, 9);
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        let m = vec![3, -4, 5, 0];
        let cts = client_encrypt_input(&m, &net.cpk, &mut rng).unwrap();
        let sel = server_select_and_coeffs(1, &net.points, &BTreeSet::from([0]), 1, net.ctx.q()).unwrap();
        assert_eq!(sel.coeffs, vec![1]);
        let h = client_decryption_share(&[cts[0].c1.clone()], 1, &net.key_shares[0], &mut rng).unwrap();
        let v = cts[0].c0.add(&h[0]).unwrap();
        let direct = cts[0].c0.add(&cts[0].c1.mul(&net.outputs[0].secret.s).unwrap()).unwrap();
        assert_eq!(v, direct);
    }

    #[test]
    fn smudging_is_bounded_and_fresh() {
        let params = RingParams::toy().with_smudging(1000);
        let net = setup(params, 2, 2, 10);
        let mut rng = ChaCha20Rng::seed_from_u64(10);
        let cts = client_encrypt_input(&[1, 1, 1, 1], &net.cpk, &mut rng).unwrap();
        let c1s = vec![cts[0].c1.clone()];
        let r = 12345;
        let exact = net.key_shares[0].scalar_mul(r).mul(&c1s[0]).unwrap();
        let h1 = client_decryption_share(&c1s, r, &net.key_shares[0], &mut rng).unwrap();
        let h2 = client_decryption_share(&c1s, r, &net.key_shares[0], &mut rng).unwrap();
        assert!(h1[0].sub(&exact).unwrap().inf_norm() <= 1000);
        assert!(h2[0].sub(&exact).unwrap().inf_norm() <= 1000);
        assert_ne!(h1, h2);
    }

    #[test]
    fn finalize_noise_within_bound() {
        let params = RingParams::new(64, 1_152_921_504_606_584_833, 1 << 16)
            .unwrap()
            .with_smudging(1 << 20);
        let (n_clients, k) = (5, 3);
        let net = setup(params.clone(), n_clients, k, 11);
        let mut rng = ChaCha20Rng::seed_from_u64(11);
        let bound = params.error_bound * n_clients as u64 * (2 * 64 * n_clients as u64 + 1)
            + k as u64 * params.smudging_bound;
        for round in 0..20 {
            let inputs: Vec<Vec<i64>> = (0..n_clients)
                .map(|_| (0..100).map(|_| rng.gen_range(-1000..1000)).collect())
                .collect();
            let cts: Vec<Vec<Ciphertext>> = inputs
                .iter()
                .map(|g| client_encrypt_input(g, &net.cpk, &mut rng).unwrap())
                .collect();
            let refs: Vec<&[Ciphertext]> = cts.iter().map(|c| c.as_slice()).collect();
            let agg = server_aggregate_ciphertexts(&refs).unwrap();
            let available: BTreeSet<u16> = (0..n_clients as u16).filter(|&c| c as usize != round % 5).collect();
            let sel = server_select_and_coeffs(1, &net.points, &available, k, net.ctx.q()).unwrap();
            let c1s: Vec<RingElement> = agg.iter().map(|c| c.c1.clone()).collect();
            let hs: Vec<Vec<RingElement>> = sel
                .selected
                .iter()
                .zip(&sel.coeffs)
                .map(|(p, &r)| client_decryption_share(&c1s, r, &net.key_shares[p.client_id as usize], &mut rng).unwrap())
                .collect();
            let hrefs: Vec<&[RingElement]> = hs.iter().map(|h| h.as_slice()).collect();
            let expected: Vec<i64> = (0..100).map(|i| inputs.iter().map(|g| g[i]).sum()).collect();
            for e in decryption_noise(&agg, &hrefs, &expected).unwrap() {
                assert!(e.inf_norm() <= bound, "{} > {bound}", e.inf_norm());
            }
            let out = server_finalize_round(&agg, &hrefs, 100, &params).unwrap();
            assert_eq!(out, expected);
        }
    }

    #[test]
    fn undersized_modulus_breaks_correctness() {
        // q far below what the noise needs: the sum no longer decrypts
        let params = RingParams::new(64, 7681, 256).unwrap().with_smudging(2000);
        let net = setup(params, 4, 2, 12);
        let mut rng = ChaCha20Rng::seed_from_u64(12);
        let inputs: Vec<Vec<i64>> = (0..4).map(|_| (0..64).map(|_| rng.gen_range(-20..20)).collect()).collect();
        let cts: Vec<Vec<Ciphertext>> = inputs.iter().map(|g| client_encrypt_input(g, &net.cpk, &mut rng).unwrap()).collect();
        let refs: Vec<&[Ciphertext]> = cts.iter().map(|c| c.as_slice()).collect();
        let agg = server_aggregate_ciphertexts(&refs).unwrap();
        let out = threshold_decrypt(&net, &agg, &BTreeSet::from([0, 1, 2, 3]), 2, 64, &mut rng).unwrap();
        let expected: Vec<i64> = (0..64).map(|i| inputs.iter().map(|g| g[i]).sum()).collect();
        assert_ne!(out, expected);
    }

    #[test]
    fn chunk_count_mismatch_rejected() {
        let net = setup(RingParams::toy(), 1, 1, 13);
        let mut rng = ChaCha20Rng::seed_from_u64(13);
        let a = client_encrypt_input(&[1; 8], &net.cpk, &mut rng).unwrap();
        let b = client_encrypt_input(&[1; 4], &net.cpk, &mut rng).unwrap();
        assert!(server_aggregate_ciphertexts(&[&a, &b]).is_err());
        assert!(server_aggregate_ciphertexts(&[]).is_err());
    }

    fn scalar_ctx() -> Arc<RingContext> {
        RingContext::new(RingParams::new(1, 17, 2).unwrap()).unwrap()
    }

    #[test]
    fn aux_shares_hand_example() {
        // f(x) = 5 + 3x over Z_17; helpers at x = 1, 2 hold 8 and 11
        let ctx = scalar_ctx();
        let helpers = [EvalPoint { client_id: 0, x: 1 }, EvalPoint { client_id: 1, x: 2 }];
        let cols = helper_columns(&helpers, 2, 17).unwrap();
        let s1 = RingElement::from_coeffs(&ctx, &[8]).unwrap();
        let s2 = RingElement::from_coeffs(&ctx, &[11]).unwrap();
        let ns1 = helper_aux_share(&s1, &cols[0], 4, &helpers).unwrap();
        let ns2 = helper_aux_share(&s2, &cols[1], 4, &helpers).unwrap();
        assert_eq!(ns1.residues(), vec![1]);
        assert_eq!(ns2.residues(), vec![16]);
        let new = newuser_assemble(&[ns1, ns2], 2, EvalPoint { client_id: 3, x: 4 }).unwrap();
        assert_eq!(new.value.residues(), vec![0]);
        assert!(helper_aux_share(&s1, &cols[0], 2, &helpers).is_err());
        assert!(newuser_assemble(&[s1], 2, new.point).is_err());
    }

    #[test]
    fn single_helper_forwards_its_share() {
        let ctx = scalar_ctx();
        let helpers = [EvalPoint { client_id: 0, x: 1 }];
        let cols = helper_columns(&helpers, 1, 17).unwrap();
        let s = RingElement::from_coeffs(&ctx, &[6]).unwrap();
        assert_eq!(helper_aux_share(&s, &cols[0], 9, &helpers).unwrap(), s);
    }

    #[test]
    fn aux_polynomials_reproduce_existing_shares() {
        let net = setup(RingParams::toy(), 5, 3, 14);
        let helpers = [net.points[1], net.points[3], net.points[4]];
        let cols = helper_columns(&helpers, 3, net.ctx.q()).unwrap();
        for held_out in [0usize, 2] {
            let x = net.points[held_out].x;
            let sum = combine_key_shares(
                &helpers
                    .iter()
                    .zip(&cols)
                    .map(|(p, c)| helper_aux_share(&net.key_shares[p.client_id as usize], c, x, &[]).unwrap())
                    .collect::<Vec<_>>(),
            )
            .unwrap();
            assert_eq!(sum, net.key_shares[held_out]);
        }
        // a new point 6 joins; with two old shares it reconstructs s
        let x_new = 6;
        let aux: Vec<RingElement> = helpers
            .iter()
            .zip(&cols)
            .map(|(p, c)| helper_aux_share(&net.key_shares[p.client_id as usize], c, x_new, &net.points).unwrap())
            .collect();
        let new = newuser_assemble(&aux, 3, EvalPoint { client_id: 5, x: x_new }).unwrap();
        let shares = vec![
            new,
            Share { point: net.points[0], value: net.key_shares[0].clone() },
            Share { point: net.points[2], value: net.key_shares[2].clone() },
        ];
        let s = shamir::reconstruct(&shares, 3).unwrap();
        assert_eq!(s, collective_secret(&net).s);
        assert!(s.coeffs().iter().all(|&c| center(c.rem_euclid(65537) as u64, 65537).abs() <= 5));
    }
}
