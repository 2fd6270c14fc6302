//! Fixtures shared by the criterion benches.

use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use secagg_core::bfv::{self, max_smudging_bound, PublicKey, SecretKey};
use secagg_core::ring::{Distribution, RingContext, RingElement, RingParams, Q60};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Q60 ring of degree `n` with plaintext modulus 2^20 and a smudging bound
/// sized for `clients`/`threshold`.
pub fn params(n: usize, clients: usize, threshold: usize) -> RingParams {
    let base = RingParams::new(n, Q60, 1 << 20).expect("valid degree");
    let smudging = max_smudging_bound(&base, clients, threshold, 2);
    base.with_smudging(smudging)
}

pub fn uniform_pair(ctx: &Arc<RingContext>, seed: u64) -> (RingElement, RingElement) {
    let mut r = rng(seed);
    let a = RingElement::sample(ctx, Distribution::Uniform, &mut r).expect("uniform");
    let b = RingElement::sample(ctx, Distribution::Uniform, &mut r).expect("uniform");
    (a, b)
}

pub fn keypair(ctx: &Arc<RingContext>, seed: u64) -> (SecretKey, PublicKey) {
    let mut r = rng(seed);
    let sk = bfv::keygen_secret(ctx, &mut r);
    let p1 = RingElement::sample(ctx, Distribution::Uniform, &mut r).expect("uniform");
    let pk = bfv::keygen_public(&sk, &p1, &mut r).expect("keygen");
    (sk, pk)
}
