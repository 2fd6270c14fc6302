//! Arithmetic in `R_q = Z_q[X]/(X^n + 1)` with centered coefficients.

pub mod modular;
pub mod ntt;
mod sampling;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use modular::{center, center_i128, center_small, mul_shoup, shoup, uncenter};
use ntt::NttTables;

pub use sampling::Distribution;

/// 60-bit prime with `q ≡ 1 (mod 2^16)`, NTT-friendly up to n = 32768.
pub const Q60: u64 = 1_152_921_504_606_584_833;

pub const DEFAULT_SIGMA: f64 = 3.2;

/// Global parameter record shared by every ring element, key and ciphertext.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RingParams {
    /// Polynomial degree, a power of two.
    pub n: usize,
    /// Ciphertext modulus, an odd prime below 2^62.
    pub q: u64,
    /// Plaintext modulus.
    pub p: u64,
    /// Standard deviation of the error distribution.
    pub sigma: f64,
    /// Truncation bound `B` of the error distribution.
    pub error_bound: u64,
    /// Smudging bound `B_smg`.
    pub smudging_bound: u64,
}

impl RingParams {
    /// Parameters with the default error distribution (σ = 3.2, B = ⌈6σ⌉) and
    /// no smudging.
    pub fn new(n: usize, q: u64, p: u64) -> Result<Self> {
        let params = Self {
            n,
            q,
            p,
            sigma: DEFAULT_SIGMA,
            error_bound: (6.0 * DEFAULT_SIGMA).ceil() as u64,
            smudging_bound: 0,
        };
        params.check()?;
        Ok(params)
    }

    /// n = 4, q = 65537, p = 16.
    pub fn toy() -> Self {
        Self::new(4, 65537, 16).expect("toy parameters are valid")
    }

    /// n = 8192, 60-bit q, p = 2^20.
    pub fn production() -> Self {
        Self::new(8192, Q60, 1 << 20).expect("production parameters are valid")
    }

    pub fn with_error(mut self, sigma: f64, bound: u64) -> Result<Self> {
        self.sigma = sigma;
        self.error_bound = bound;
        self.check()?;
        Ok(self)
    }

    pub fn with_smudging(mut self, bound: u64) -> Self {
        self.smudging_bound = bound;
        self
    }

    /// `Δ = ⌊q/p⌋`.
    pub fn delta(&self) -> u64 {
        self.q / self.p
    }

    pub fn check(&self) -> Result<()> {
        let fail = |m: String| Err(Error::InvalidParams(m));
        if self.n == 0 || !self.n.is_power_of_two() {
            return fail(format!("n = {} is not a power of two", self.n));
        }
        if self.q >= 1 << 62 {
            return fail(format!("q = {} exceeds 2^62", self.q));
        }
        if !modular::is_prime(self.q) || self.q == 2 {
            return fail(format!("q = {} is not an odd prime", self.q));
        }
        if self.p == 0 || self.p >= self.q {
            return fail(format!("p = {} must satisfy 1 <= p < q", self.p));
        }
        if !(self.sigma >= 0.0 && self.sigma.is_finite()) {
            return fail(format!("sigma = {} is not a non-negative real", self.sigma));
        }
        if (self.error_bound as f64) < (6.0 * self.sigma).ceil() {
            return fail(format!(
                "error bound {} below the 6-sigma truncation {}",
                self.error_bound,
                (6.0 * self.sigma).ceil()
            ));
        }
        Ok(())
    }
}

/// Parameters plus precomputed transform tables. Shared behind an `Arc` by
/// every element of the ring.
pub struct RingContext {
    params: RingParams,
    ntt: Option<NttTables>,
}

impl fmt::Debug for RingContext {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("RingContext")
            .field("params", &self.params)
            .field("ntt", &self.ntt.is_some())
            .finish()
    }
}

impl RingContext {
    pub fn new(params: RingParams) -> Result<Arc<Self>> {
        params.check()?;
        let ntt = NttTables::new(params.q, params.n);
        Ok(Arc::new(Self { params, ntt }))
    }

    pub fn params(&self) -> &RingParams {
        &self.params
    }

    pub fn n(&self) -> usize {
        self.params.n
    }

    pub fn q(&self) -> u64 {
        self.params.q
    }

    pub fn has_ntt(&self) -> bool {
        self.ntt.is_some()
    }
}

/// A polynomial of degree `< n` with coefficients centered in `[-q/2, q/2)`.
#[derive(Clone)]
pub struct RingElement {
    ctx: Arc<RingContext>,
    coeffs: Vec<i64>,
}

impl fmt::Debug for RingElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let n = self.coeffs.len();
        if n <= 16 {
            write!(f, "RingElement{:?}", self.coeffs)
        } else {
            write!(f, "RingElement[{:?}.. ({} coeffs)]", &self.coeffs[..8], n)
        }
    }
}

impl PartialEq for RingElement {
    fn eq(&self, other: &Self) -> bool {
        self.same_ring(other) && self.coeffs == other.coeffs
    }
}

impl Eq for RingElement {}

impl RingElement {
    pub fn zero(ctx: &Arc<RingContext>) -> Self {
        Self {
            ctx: ctx.clone(),
            coeffs: vec![0; ctx.n()],
        }
    }

    /// Build from arbitrary signed coefficients, reducing each into the
    /// centered range. Shorter inputs are zero-padded.
    pub fn from_coeffs(ctx: &Arc<RingContext>, coeffs: &[i64]) -> Result<Self> {
        if coeffs.len() > ctx.n() {
            return Err(Error::Dimension {
                expected: ctx.n(),
                got: coeffs.len(),
            });
        }
        let q = ctx.q();
        let mut out = vec![0; ctx.n()];
        for (o, &c) in out.iter_mut().zip(coeffs) {
            *o = center(uncenter(c, q), q);
        }
        Ok(Self {
            ctx: ctx.clone(),
            coeffs: out,
        })
    }

    /// Build from residues in `[0, q)`.
    pub fn from_residues(ctx: &Arc<RingContext>, residues: &[u64]) -> Result<Self> {
        if residues.len() != ctx.n() {
            return Err(Error::Dimension {
                expected: ctx.n(),
                got: residues.len(),
            });
        }
        let q = ctx.q();
        if let Some(&bad) = residues.iter().find(|&&r| r >= q) {
            return Err(Error::Decode(format!("coefficient {bad} >= q")));
        }
        Ok(Self {
            ctx: ctx.clone(),
            coeffs: residues.iter().map(|&r| center(r, q)).collect(),
        })
    }

    pub(crate) fn from_centered_unchecked(ctx: &Arc<RingContext>, coeffs: Vec<i64>) -> Self {
        debug_assert_eq!(coeffs.len(), ctx.n());
        Self {
            ctx: ctx.clone(),
            coeffs,
        }
    }

    pub fn context(&self) -> &Arc<RingContext> {
        &self.ctx
    }

    pub fn params(&self) -> &RingParams {
        &self.ctx.params
    }

    pub fn coeffs(&self) -> &[i64] {
        &self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<i64> {
        self.coeffs
    }

    /// Coefficients mapped to `[0, q)`.
    pub fn residues(&self) -> Vec<u64> {
        let q = self.ctx.q();
        self.coeffs.iter().map(|&c| uncenter(c, q)).collect()
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0)
    }

    pub fn same_ring(&self, other: &Self) -> bool {
        Arc::ptr_eq(&self.ctx, &other.ctx) || self.ctx.params == other.ctx.params
    }

    fn check_ring(&self, other: &Self) -> Result<()> {
        if self.same_ring(other) {
            Ok(())
        } else {
            Err(Error::ParamMismatch)
        }
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_ring(other)?;
        let q = self.ctx.q();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| center_small(a + b, q))
            .collect();
        Ok(Self::from_centered_unchecked(&self.ctx, coeffs))
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.check_ring(other)?;
        let q = self.ctx.q();
        for (a, &b) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *a = center_small(*a + b, q);
        }
        Ok(())
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_ring(other)?;
        let q = self.ctx.q();
        let coeffs = self
            .coeffs
            .iter()
            .zip(&other.coeffs)
            .map(|(&a, &b)| center_small(a - b, q))
            .collect();
        Ok(Self::from_centered_unchecked(&self.ctx, coeffs))
    }

    pub fn neg(&self) -> Self {
        let q = self.ctx.q();
        let coeffs = self
            .coeffs
            .iter()
            .map(|&a| center_small(-a, q))
            .collect();
        Self::from_centered_unchecked(&self.ctx, coeffs)
    }

    /// Multiply every coefficient by a scalar of `Z_q`.
    pub fn scalar_mul(&self, scalar: u64) -> Self {
        let q = self.ctx.q();
        let s = scalar % q;
        let s_shoup = shoup(s, q);
        let coeffs = self
            .coeffs
            .iter()
            .map(|&a| center(mul_shoup(uncenter(a, q), s, s_shoup, q), q))
            .collect();
        Self::from_centered_unchecked(&self.ctx, coeffs)
    }

    /// Negacyclic product. Uses the NTT when `q ≡ 1 (mod 2n)` and schoolbook
    /// convolution otherwise; both give identical results.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check_ring(other)?;
        match &self.ctx.ntt {
            Some(ntt) => {
                let q = self.ctx.q();
                let prod = ntt.multiply(&self.residues(), &other.residues());
                let coeffs = prod.into_iter().map(|r| center(r, q)).collect();
                Ok(Self::from_centered_unchecked(&self.ctx, coeffs))
            }
            None => Ok(self.mul_schoolbook(other)),
        }
    }

    /// Reference negacyclic convolution, `O(n^2)`.
    pub fn mul_schoolbook(&self, other: &Self) -> Self {
        let n = self.ctx.n();
        let q = self.ctx.q();
        let qi = q as i128;
        let mut acc = vec![0i128; n];
        for (i, &a) in self.coeffs.iter().enumerate() {
            if a == 0 {
                continue;
            }
            for (j, &b) in other.coeffs.iter().enumerate() {
                let prod = (a as i128 * b as i128) % qi;
                let k = i + j;
                if k < n {
                    acc[k] = (acc[k] + prod) % qi;
                } else {
                    acc[k - n] = (acc[k - n] - prod) % qi;
                }
            }
        }
        let coeffs = acc.into_iter().map(|c| center_i128(c, q)).collect();
        Self::from_centered_unchecked(&self.ctx, coeffs)
    }

    /// Largest absolute centered coefficient.
    pub fn inf_norm(&self) -> u64 {
        self.coeffs
            .iter()
            .map(|c| c.unsigned_abs())
            .max()
            .unwrap_or(0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha20Rng;

    fn ctx17() -> Arc<RingContext> {
        RingContext::new(RingParams::new(4, 17, 2).unwrap()).unwrap()
    }

    fn el(ctx: &Arc<RingContext>, c: &[i64]) -> RingElement {
        RingElement::from_coeffs(ctx, c).unwrap()
    }

    /// Independent oracle: full polynomial product followed by reduction
    /// with X^n = -1, computed on plain integers.
    fn convolve_then_fold(a: &[i64], b: &[i64], q: i64) -> Vec<i64> {
        let n = a.len();
        let mut full = vec![0i128; 2 * n];
        for i in 0..n {
            for j in 0..n {
                full[i + j] += a[i] as i128 * b[j] as i128;
            }
        }
        (0..n)
            .map(|i| {
                let v = (full[i] - full[i + n]).rem_euclid(q as i128) as i64;
                if v > q / 2 {
                    v - q
                } else {
                    v
                }
            })
            .collect()
    }

    #[test]
    fn addition_examples() {
        let ctx = ctx17();
        let a = el(&ctx, &[3, -5, 7, 1]);
        assert_eq!(a.add(&RingElement::zero(&ctx)).unwrap(), a);
        assert!(a.add(&a.neg()).unwrap().is_zero());
        let wrap = el(&ctx, &[8, 0, 0, 0]).add(&el(&ctx, &[9, 0, 0, 0])).unwrap();
        assert_eq!(wrap.coeffs(), &[0, 0, 0, 0]);
    }

    #[test]
    fn multiplication_examples() {
        let ctx = ctx17();
        assert!(ctx.has_ntt());
        let x = el(&ctx, &[0, 1, 0, 0]);
        let x3 = el(&ctx, &[0, 0, 0, 1]);
        assert_eq!(x3.mul(&x).unwrap().coeffs(), &[-1, 0, 0, 0]);
        let lhs = el(&ctx, &[1, 1, 0, 0]).mul(&el(&ctx, &[1, -1, 0, 0])).unwrap();
        assert_eq!(lhs.coeffs(), &[1, 0, -1, 0]);
        let all = el(&ctx, &[1, 1, 1, 1]);
        let expected = convolve_then_fold(&[1, 1, 1, 1], &[0, 1, 0, 0], 17);
        assert_eq!(expected, vec![-1, 1, 1, 1]);
        assert_eq!(all.mul(&x).unwrap().coeffs(), expected.as_slice());
    }

    #[test]
    fn norms() {
        let ctx = ctx17();
        assert_eq!(RingElement::zero(&ctx).inf_norm(), 0);
        assert_eq!(el(&ctx, &[-8, 3, 0, 0]).inf_norm(), 8);
        let nine = el(&ctx, &[9, 0, 0, 0]);
        assert_eq!(nine.coeffs()[0], -8);
        assert_eq!(nine.inf_norm(), 8);
    }

    #[test]
    fn mismatched_params_are_rejected() {
        let a = RingElement::zero(&ctx17());
        let other = RingContext::new(RingParams::toy()).unwrap();
        let b = RingElement::zero(&other);
        assert_eq!(a.add(&b), Err(Error::ParamMismatch));
        assert_eq!(a.mul(&b), Err(Error::ParamMismatch));
    }

    #[test]
    fn invalid_params() {
        assert!(RingParams::new(6, 17, 2).is_err());
        assert!(RingParams::new(4, 15, 2).is_err());
        assert!(RingParams::new(4, 17, 17).is_err());
        assert!(RingParams::new(4, 17, 0).is_err());
        assert!(RingParams::toy().with_error(3.2, 10).is_err());
        assert!(RingParams::toy().with_error(0.0, 0).is_ok());
    }

    #[test]
    fn distributivity_exhaustive_on_basis_triples() {
        // every (a, b, c) drawn from the 4 monomials with coefficients in
        // {-8, -1, 1, 8} at n = 4, q = 17
        let ctx = ctx17();
        let vals = [-8i64, -1, 1, 8];
        let mut polys = Vec::new();
        for pos in 0..4 {
            for &v in &vals {
                let mut c = [0i64; 4];
                c[pos] = v;
                polys.push(el(&ctx, &c));
            }
        }
        for a in &polys {
            for b in &polys {
                let ab = a.add(b).unwrap();
                for c in &polys {
                    let lhs = ab.mul(c).unwrap();
                    let rhs = a.mul(c).unwrap().add(&b.mul(c).unwrap()).unwrap();
                    assert_eq!(lhs, rhs);
                }
            }
        }
    }

    #[test]
    fn distributivity_full_ring_n4_q17_slice() {
        // all 17^4 values of `a` against fixed b, c
        let ctx = ctx17();
        let b = el(&ctx, &[3, -7, 2, 5]);
        let c = el(&ctx, &[-4, 1, 8, -2]);
        for idx in 0..17i64.pow(4) {
            let mut x = idx;
            let mut coeffs = [0i64; 4];
            for co in coeffs.iter_mut() {
                *co = x % 17 - 8;
                x /= 17;
            }
            let a = el(&ctx, &coeffs);
            let lhs = a.add(&b).unwrap().mul(&c).unwrap();
            let rhs = a.mul(&c).unwrap().add(&b.mul(&c).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn ntt_equals_schoolbook_production_size() {
        let ctx = RingContext::new(RingParams::new(1024, Q60, 1 << 20).unwrap()).unwrap();
        assert!(ctx.has_ntt());
        let mut rng = ChaCha20Rng::seed_from_u64(7);
        for _ in 0..20 {
            let a = RingElement::sample(&ctx, Distribution::Uniform, &mut rng).unwrap();
            let b = RingElement::sample(&ctx, Distribution::Uniform, &mut rng).unwrap();
            assert_eq!(a.mul(&b).unwrap(), a.mul_schoolbook(&b));
        }
    }

    #[test]
    fn ntt_equals_schoolbook_many_small() {
        let ctx = RingContext::new(RingParams::new(16, 97, 2).unwrap()).unwrap();
        assert!(ctx.has_ntt());
        let mut rng = ChaCha20Rng::seed_from_u64(8);
        for _ in 0..1000 {
            let a: Vec<i64> = (0..16).map(|_| rng.gen_range(-48..=48)).collect();
            let b: Vec<i64> = (0..16).map(|_| rng.gen_range(-48..=48)).collect();
            let (ea, eb) = (el(&ctx, &a), el(&ctx, &b));
            let ntt = ea.mul(&eb).unwrap();
            assert_eq!(ntt, ea.mul_schoolbook(&eb));
            assert_eq!(ntt.coeffs(), convolve_then_fold(&a, &b, 97).as_slice());
        }
    }

    #[test]
    fn schoolbook_fallback_for_unfriendly_q() {
        // 19 is not 1 mod 8
        let ctx = RingContext::new(RingParams::new(4, 19, 2).unwrap()).unwrap();
        assert!(!ctx.has_ntt());
        let a = el(&ctx, &[1, 2, 3, 4]);
        let b = el(&ctx, &[-1, 5, 0, 2]);
        assert_eq!(
            a.mul(&b).unwrap().coeffs(),
            convolve_then_fold(&[1, 2, 3, 4], &[-1, 5, 0, 2], 19).as_slice()
        );
    }

    #[test]
    fn product_norm_bound() {
        let ctx = RingContext::new(RingParams::new(256, Q60, 1 << 20).unwrap()).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(9);
        for _ in 0..200 {
            let a = RingElement::sample(&ctx, Distribution::Ternary, &mut rng).unwrap();
            let b = RingElement::sample(&ctx, Distribution::Error, &mut rng).unwrap();
            let bound = 256 * a.inf_norm() * b.inf_norm();
            assert!(a.mul(&b).unwrap().inf_norm() <= bound);
        }
    }
}
