//! Additive BFV: keys, coefficient packing, encryption, decryption and the
//! parameter inequality that guarantees threshold decryption is correct.

use std::sync::Arc;

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::modular::{center_i128, uncenter};
use crate::ring::{Distribution, RingContext, RingElement, RingParams};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SecretKey {
    pub s: RingElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PublicKey {
    pub p0: RingElement,
    pub p1: RingElement,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ciphertext {
    pub c0: RingElement,
    pub c1: RingElement,
    pub chunk_index: u32,
}

/// A plaintext polynomial: exactly `n` coefficients in `[-p/2, p/2)`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Plaintext {
    pub coeffs: Vec<i64>,
}

/// True when `x` lies in the centered plaintext range for modulus `p`.
pub fn in_plaintext_range(x: i64, p: u64) -> bool {
    let half = (p / 2) as i64;
    x >= -half && x < p as i64 - half
}

fn center_mod_p(x: i128, p: u64) -> i64 {
    center_i128(x, p)
}

pub fn keygen_secret<R: Rng + ?Sized>(ctx: &Arc<RingContext>, rng: &mut R) -> SecretKey {
    SecretKey {
        s: RingElement::sample(ctx, Distribution::Ternary, rng).expect("ternary sampling"),
    }
}

/// `p0 = -(s·p1 + e)` with a fresh error `e`.
pub fn keygen_public<R: Rng + ?Sized>(
    sk: &SecretKey,
    p1: &RingElement,
    rng: &mut R,
) -> Result<PublicKey> {
    let e = RingElement::sample(sk.s.context(), Distribution::Error, rng)?;
    keygen_public_with_error(sk, p1, &e)
}

pub fn keygen_public_with_error(
    sk: &SecretKey,
    p1: &RingElement,
    e: &RingElement,
) -> Result<PublicKey> {
    let p0 = sk.s.mul(p1)?.add(e)?.neg();
    Ok(PublicKey {
        p0,
        p1: p1.clone(),
    })
}

/// Coefficient packing: chunk `j` carries `g[j·n .. j·n + n]`, the last chunk
/// zero-padded.
pub fn encode(g: &[i64], params: &RingParams) -> Result<Vec<Plaintext>> {
    if let Some((index, &value)) = g
        .iter()
        .enumerate()
        .find(|(_, &v)| !in_plaintext_range(v, params.p))
    {
        return Err(Error::PlaintextOutOfRange { index, value });
    }
    let n = params.n;
    Ok(g.chunks(n)
        .map(|chunk| {
            let mut coeffs = chunk.to_vec();
            coeffs.resize(n, 0);
            Plaintext { coeffs }
        })
        .collect())
}

/// Number of plaintext chunks needed for a vector of dimension `d`.
pub fn chunk_count(d: usize, n: usize) -> usize {
    d.div_ceil(n)
}

pub fn decode(polys: &[Plaintext], d: usize, params: &RingParams) -> Result<Vec<i64>> {
    let expected = chunk_count(d, params.n);
    if polys.len() != expected {
        return Err(Error::ChunkCount {
            expected,
            got: polys.len(),
            dim: d,
        });
    }
    let mut out: Vec<i64> = polys.iter().flat_map(|m| m.coeffs.iter().copied()).collect();
    out.truncate(d);
    Ok(out)
}

pub fn encrypt<R: Rng + ?Sized>(
    pk: &PublicKey,
    m: &Plaintext,
    chunk_index: u32,
    rng: &mut R,
) -> Result<Ciphertext> {
    let ctx = pk.p0.context();
    let u = RingElement::sample(ctx, Distribution::Ternary, rng)?;
    let e0 = RingElement::sample(ctx, Distribution::Error, rng)?;
    let e1 = RingElement::sample(ctx, Distribution::Error, rng)?;
    encrypt_with(pk, m, chunk_index, &u, &e0, &e1)
}

/// Encryption with caller-supplied randomness `(u, e0, e1)`.
pub fn encrypt_with(
    pk: &PublicKey,
    m: &Plaintext,
    chunk_index: u32,
    u: &RingElement,
    e0: &RingElement,
    e1: &RingElement,
) -> Result<Ciphertext> {
    let scaled = scaled_message(pk.p0.context(), m)?;
    let c0 = scaled.add(&u.mul(&pk.p0)?)?.add(e0)?;
    let c1 = u.mul(&pk.p1)?.add(e1)?;
    Ok(Ciphertext { c0, c1, chunk_index })
}

/// `Δ·m` lifted into `R_q`.
pub fn scaled_message(ctx: &Arc<RingContext>, m: &Plaintext) -> Result<RingElement> {
    let params = ctx.params();
    if m.coeffs.len() != params.n {
        return Err(Error::Dimension {
            expected: params.n,
            got: m.coeffs.len(),
        });
    }
    if let Some((index, &value)) = m
        .coeffs
        .iter()
        .enumerate()
        .find(|(_, &v)| !in_plaintext_range(v, params.p))
    {
        return Err(Error::PlaintextOutOfRange { index, value });
    }
    Ok(RingElement::from_coeffs(ctx, &m.coeffs)?.scalar_mul(params.delta()))
}

/// `⌊(p/q)·v⌉ mod p` on the centered coefficients of `v`, rounding half away
/// from zero in exact integer arithmetic.
pub fn scale_and_round(v: &RingElement) -> Plaintext {
    let params = v.params();
    let (p, q) = (params.p as i128, params.q as i128);
    let coeffs = v
        .coeffs()
        .iter()
        .map(|&c| {
            let mag = (2 * p * (c.unsigned_abs() as i128) + q) / (2 * q);
            let rounded = if c < 0 { -mag } else { mag };
            center_mod_p(rounded, params.p)
        })
        .collect();
    Plaintext { coeffs }
}

pub fn decrypt(sk: &SecretKey, ct: &Ciphertext) -> Result<Plaintext> {
    let v = ct.c0.add(&ct.c1.mul(&sk.s)?)?;
    Ok(scale_and_round(&v))
}

/// `e_ct = c0 + s·c1 - Δ·m`, centered.
pub fn ciphertext_noise(sk: &SecretKey, ct: &Ciphertext, m: &Plaintext) -> Result<RingElement> {
    let scaled = scaled_message(ct.c0.context(), m)?;
    ct.c0.add(&ct.c1.mul(&sk.s)?)?.sub(&scaled)
}

pub fn ct_add(a: &Ciphertext, b: &Ciphertext) -> Result<Ciphertext> {
    if a.chunk_index != b.chunk_index {
        return Err(Error::ChunkMismatch(a.chunk_index, b.chunk_index));
    }
    Ok(Ciphertext {
        c0: a.c0.add(&b.c0)?,
        c1: a.c1.add(&b.c1)?,
        chunk_index: a.chunk_index,
    })
}

impl Ciphertext {
    pub fn zero(ctx: &Arc<RingContext>, chunk_index: u32) -> Self {
        Self {
            c0: RingElement::zero(ctx),
            c1: RingElement::zero(ctx),
            chunk_index,
        }
    }
}

/// Largest per-client magnitude `c` such that `clients · c < p/2`, so the
/// plaintext sum of that many inputs never wraps modulo `p`.
pub fn aggregate_capacity(params: &RingParams, clients: usize) -> i64 {
    let half = (params.p / 2) as i64;
    if clients == 0 {
        return half - 1;
    }
    (half - 1) / clients as i64
}

/// Which side of the parameter report failed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    /// `B·N·(2nN+1) + k·B_smg >= q/(2p)`.
    Correctness {
        noise_term: u128,
        smudging_term: u128,
        budget: u128,
    },
    /// `B_smg >= q/2`.
    SmudgingAliases { bound: u64 },
    /// `k` outside `[1, N]`.
    Threshold { k: usize, clients: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub clients: usize,
    pub threshold: usize,
    /// `B·N·(2nN+1)`.
    pub noise_term: u128,
    /// `k·B_smg`.
    pub smudging_term: u128,
    /// `⌊q/(2p)⌋`.
    pub budget: u128,
    /// `log2(k·B_smg / (B·N·(2nN+1)))`; `-inf` without smudging.
    pub lambda_eff: f64,
    pub min_smudging_bits: f64,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passes(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<Self> {
        if self.passes() {
            Ok(self)
        } else {
            Err(Error::Validation(format!("{:?}", self.violations)))
        }
    }
}

/// Default smudging-ratio target in bits.
pub const DEFAULT_SMUDGING_BITS: f64 = 40.0;

/// Check `B·N·(2nN+1) + k·B_smg < q/(2p)` and report the effective smudging
/// ratio.
pub fn validate_params(
    params: &RingParams,
    clients: usize,
    threshold: usize,
    min_smudging_bits: f64,
) -> ValidationReport {
    let b = params.error_bound as u128;
    let big_n = clients as u128;
    let n = params.n as u128;
    let noise_term = b * big_n * (2 * n * big_n + 1);
    let smudging_term = threshold as u128 * params.smudging_bound as u128;
    let budget = params.q as u128 / (2 * params.p as u128);
    let mut violations = Vec::new();
    let mut warnings = Vec::new();

    if threshold == 0 || threshold > clients {
        violations.push(Violation::Threshold {
            k: threshold,
            clients,
        });
    }
    if params.smudging_bound >= params.q / 2 {
        violations.push(Violation::SmudgingAliases {
            bound: params.smudging_bound,
        });
    }
    // exact: LHS < q/(2p)  <=>  2p·LHS < q
    let lhs = noise_term + smudging_term;
    if lhs.saturating_mul(2 * params.p as u128) >= params.q as u128 {
        violations.push(Violation::Correctness {
            noise_term,
            smudging_term,
            budget,
        });
    }
    let lambda_eff = if smudging_term == 0 {
        f64::NEG_INFINITY
    } else if noise_term == 0 {
        f64::INFINITY
    } else {
        (smudging_term as f64 / noise_term as f64).log2()
    };
    if lambda_eff < min_smudging_bits {
        warnings.push(format!(
            "smudging ratio 2^{lambda_eff:.2} below target 2^{min_smudging_bits}"
        ));
    }
    ValidationReport {
        clients,
        threshold,
        noise_term,
        smudging_term,
        budget,
        lambda_eff,
        min_smudging_bits,
        violations,
        warnings,
    }
}

/// Largest smudging bound that keeps the correctness inequality satisfied
/// with a `1/margin` share of the leftover budget.
pub fn max_smudging_bound(params: &RingParams, clients: usize, threshold: usize, margin: u64) -> u64 {
    let report = validate_params(&params.clone().with_smudging(0), clients, threshold, 0.0);
    // largest L with 2p·L < q
    let max_lhs = (params.q as u128 - 1) / (2 * params.p as u128);
    if report.noise_term >= max_lhs || threshold == 0 {
        return 0;
    }
    let spare = (max_lhs - report.noise_term) / threshold as u128 / margin.max(1) as u128;
    spare.min((params.q / 2 - 1) as u128) as u64
}

/// Lift a centered plaintext coefficient to a `Z_q` residue.
pub fn plaintext_residue(x: i64, q: u64) -> u64 {
    uncenter(x, q)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ring::{RingParams, Q60};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn toy() -> Arc<RingContext> {
        RingContext::new(RingParams::toy()).unwrap()
    }

    fn el(ctx: &Arc<RingContext>, c: &[i64]) -> RingElement {
        RingElement::from_coeffs(ctx, c).unwrap()
    }

    fn pt(c: &[i64]) -> Plaintext {
        Plaintext { coeffs: c.to_vec() }
    }

    #[test]
    fn secret_keys_are_ternary_and_seeded() {
        let ctx = RingContext::new(RingParams::new(1024, Q60, 1 << 20).unwrap()).unwrap();
        let a = keygen_secret(&ctx, &mut ChaCha20Rng::seed_from_u64(1));
        let b = keygen_secret(&ctx, &mut ChaCha20Rng::seed_from_u64(1));
        let c = keygen_secret(&ctx, &mut ChaCha20Rng::seed_from_u64(2));
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert!(a.s.inf_norm() <= 1);
    }

    #[test]
    fn public_key_hand_example() {
        let ctx = toy();
        let sk = SecretKey { s: el(&ctx, &[1, 0, 0, 0]) };
        let pk = keygen_public_with_error(&sk, &el(&ctx, &[2, 0, 0, 0]), &el(&ctx, &[1, 0, 0, 0]))
            .unwrap();
        assert_eq!(pk.p0.coeffs(), &[-3, 0, 0, 0]);

        let zero = SecretKey { s: RingElement::zero(&ctx) };
        let pk0 = keygen_public_with_error(&zero, &el(&ctx, &[5, 1, 2, 3]), &RingElement::zero(&ctx))
            .unwrap();
        assert!(pk0.p0.is_zero());
    }

    #[test]
    fn public_key_error_is_bounded() {
        let ctx = RingContext::new(RingParams::new(512, Q60, 1 << 20).unwrap()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(3);
        for _ in 0..20 {
            let sk = keygen_secret(&ctx, &mut rng);
            let p1 = RingElement::sample(&ctx, Distribution::Uniform, &mut rng).unwrap();
            let pk = keygen_public(&sk, &p1, &mut rng).unwrap();
            let e = pk.p0.add(&sk.s.mul(&p1).unwrap()).unwrap();
            assert!(e.inf_norm() <= 20);
        }
    }

    #[test]
    fn encode_examples() {
        let params = RingParams::toy();
        let polys = encode(&[1, 2, 3, 4], &params).unwrap();
        assert_eq!(polys, vec![pt(&[1, 2, 3, 4])]);
        assert!(encode(&[], &params).unwrap().is_empty());
        let g: Vec<i64> = (0..11).map(|i| i % 8 - 4).collect();
        let polys = encode(&g, &params).unwrap();
        assert_eq!(polys.len(), 3);
        assert_eq!(&polys[2].coeffs[3..], &[0]);
        assert_eq!(polys[2].coeffs.iter().skip(3).filter(|&&c| c == 0).count(), 1);
        assert_eq!(decode(&polys, 11, &params).unwrap(), g);
        assert_eq!(
            encode(&[1, 8], &params),
            Err(Error::PlaintextOutOfRange { index: 1, value: 8 })
        );
        assert!(encode(&[-8, 7], &params).is_ok());
    }

    #[test]
    fn padded_chunk_at_2n_plus_3() {
        let params = RingParams::new(8, 65537, 16).unwrap();
        let g: Vec<i64> = (0..19).map(|i| (i % 16) - 8).collect();
        let polys = encode(&g, &params).unwrap();
        assert_eq!(polys.len(), 3);
        assert_eq!(&polys[2].coeffs[3..], &[0; 5]);
        assert_eq!(decode(&polys, 19, &params).unwrap(), g);
    }

    #[test]
    fn decode_examples() {
        let params = RingParams::toy();
        assert_eq!(decode(&[pt(&[0; 4])], 4, &params).unwrap(), vec![0; 4]);
        assert_eq!(
            decode(&[pt(&[0; 4])], 5, &params),
            Err(Error::ChunkCount { expected: 2, got: 1, dim: 5 })
        );
    }

    #[test]
    fn zero_randomness_encryption() {
        let ctx = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(4);
        let sk = keygen_secret(&ctx, &mut rng);
        let p1 = RingElement::sample(&ctx, Distribution::Uniform, &mut rng).unwrap();
        let pk = keygen_public(&sk, &p1, &mut rng).unwrap();
        let z = RingElement::zero(&ctx);
        let m = pt(&[1, -2, 7, -8]);
        let ct = encrypt_with(&pk, &m, 0, &z, &z, &z).unwrap();
        assert_eq!(ct.c0.coeffs(), &[4096, -8192, 28672, -32768]);
        assert!(ct.c1.is_zero());
        assert_eq!(decrypt(&sk, &ct).unwrap(), m);
    }

    #[test]
    fn rounding_threshold() {
        // (Δm + e, 0) decrypts to m exactly while |e| < Δ/2 = 2048
        let ctx = toy();
        let sk = SecretKey { s: el(&ctx, &[1, -1, 0, 1]) };
        for e in [-2047i64, -1000, 0, 1, 2047] {
            let m = pt(&[3, -4, 0, 7]);
            let c0 = scaled_message(&ctx, &m).unwrap().add(&el(&ctx, &[e, -e, e, e])).unwrap();
            let ct = Ciphertext { c0, c1: RingElement::zero(&ctx), chunk_index: 0 };
            assert_eq!(decrypt(&sk, &ct).unwrap(), m, "e = {e}");
        }
    }

    #[test]
    fn round_trip_and_noise_bound_toy() {
        let ctx = toy();
        let params = ctx.params().clone();
        assert!(validate_params(&params, 1, 1, 0.0).passes());
        let mut rng = ChaCha20Rng::seed_from_u64(5);
        let sk = keygen_secret(&ctx, &mut rng);
        let p1 = RingElement::sample(&ctx, Distribution::Uniform, &mut rng).unwrap();
        let pk = keygen_public(&sk, &p1, &mut rng).unwrap();
        let bound = params.error_bound * (2 * params.n as u64 + 1);
        for _ in 0..1000 {
            let m = pt(&(0..4).map(|_| rng.gen_range(-8..8)).collect::<Vec<_>>());
            let ct = encrypt(&pk, &m, 0, &mut rng).unwrap();
            assert_eq!(decrypt(&sk, &ct).unwrap(), m);
            assert!(ciphertext_noise(&sk, &ct, &m).unwrap().inf_norm() <= bound);
        }
    }

    #[test]
    fn ciphertext_addition() {
        let ctx = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(6);
        let sk = keygen_secret(&ctx, &mut rng);
        let p1 = RingElement::sample(&ctx, Distribution::Uniform, &mut rng).unwrap();
        let pk = keygen_public(&sk, &p1, &mut rng).unwrap();
        let (m1, m2) = (pt(&[1, 2, -3, 4]), pt(&[-5, 6, 7, 7]));
        let c1 = encrypt(&pk, &m1, 0, &mut rng).unwrap();
        let c2 = encrypt(&pk, &m2, 0, &mut rng).unwrap();
        let sum = ct_add(&c1, &c2).unwrap();
        assert_eq!(sum, ct_add(&c2, &c1).unwrap());
        assert_eq!(ct_add(&c1, &Ciphertext::zero(&ctx, 0)).unwrap(), c1);
        // 2 + 6 = 8 and 4 + 7 = 11 wrap modulo 16
        assert_eq!(decrypt(&sk, &sum).unwrap(), pt(&[-4, -8, 4, -5]));
        let other = Ciphertext { chunk_index: 1, ..c2 };
        assert_eq!(ct_add(&c1, &other), Err(Error::ChunkMismatch(0, 1)));
    }

    #[test]
    fn collective_key_three_parties() {
        let ctx = toy();
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        let p1 = RingElement::sample(&ctx, Distribution::Uniform, &mut rng).unwrap();
        let keys: Vec<SecretKey> = (0..3).map(|_| keygen_secret(&ctx, &mut rng)).collect();
        let mut p0 = RingElement::zero(&ctx);
        let mut s = RingElement::zero(&ctx);
        for k in &keys {
            p0.add_assign(&keygen_public(k, &p1, &mut rng).unwrap().p0).unwrap();
            s.add_assign(&k.s).unwrap();
        }
        let cpk = PublicKey { p0, p1 };
        let one = pt(&[1, 0, 0, 0]);
        let mut agg = Ciphertext::zero(&ctx, 0);
        for _ in 0..3 {
            agg = ct_add(&agg, &encrypt(&cpk, &one, 0, &mut rng).unwrap()).unwrap();
        }
        assert_eq!(decrypt(&SecretKey { s }, &agg).unwrap(), pt(&[3, 0, 0, 0]));
    }

    #[test]
    fn validation_examples() {
        let params = RingParams::production().with_smudging(0);
        let r = validate_params(&params, 8, 6, DEFAULT_SMUDGING_BITS);
        assert_eq!(r.noise_term, 20_971_680);
        assert!(r.passes());
        assert_eq!(r.lambda_eff, f64::NEG_INFINITY);
        assert_eq!(r.warnings.len(), 1);

        let max = max_smudging_bound(&params, 8, 6, 1);
        assert!(validate_params(&params.clone().with_smudging(max), 8, 6, 0.0).passes());
        assert!(!validate_params(&params.clone().with_smudging(max + 1), 8, 6, 0.0).passes());
        // (2^39 - 2.1e7) / 6 order of magnitude
        assert!(max > 91_000_000_000 && max < 92_000_000_000, "{max}");

        let small = RingParams::new(8192, 65537, 16).unwrap();
        let r = validate_params(&small, 8, 6, 0.0);
        assert!(matches!(r.violations[0], Violation::Correctness { .. }));
        assert!(r.into_result().is_err());
    }

    #[test]
    fn capacity() {
        let params = RingParams::production();
        let c = aggregate_capacity(&params, 8);
        assert!(8 * c < (1 << 19));
        assert!(8 * (c + 1) >= (1 << 19) - 8);
    }
}
