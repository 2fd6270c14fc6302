//! Pure-computation runners for comparing the persistent threshold scheme
//! against re-running a k-party key setup every round.
//!
//! Both runners draw identical inputs and availability, perform the same
//! cryptographic work the message-driven protocol would, and count the
//! envelopes it would send, without any transport overhead.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::Serialize;

use crate::bfv::{self, Ciphertext, SecretKey};
use crate::error::Result;
use crate::ring::{Distribution, RingContext, RingElement, RingParams};
use crate::seeds::derive_rng;
use crate::shamir::EvalPoint;

use super::ops;
use super::session::{exact_sum, synthetic_input, RoundAvailability};

#[derive(Debug, Clone)]
pub struct BaselineConfig {
    pub params: RingParams,
    pub clients: usize,
    pub threshold: usize,
    pub rounds: u32,
    pub dim: usize,
    pub dropout: f64,
    pub input_bound: i64,
    pub seed: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineRound {
    pub round: u32,
    pub completed: bool,
    pub exact: bool,
    pub values: Option<Vec<i64>>,
    pub contributors: Vec<u16>,
    pub selected: Vec<u16>,
    pub messages: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct BaselineReport {
    pub setup_elapsed: Duration,
    pub setup_messages: u64,
    pub rounds: Vec<BaselineRound>,
}

impl BaselineReport {
    pub fn total_elapsed(&self) -> Duration {
        self.setup_elapsed + self.rounds.iter().map(|r| r.elapsed).sum::<Duration>()
    }

    /// Total time including setup, divided by the number of rounds.
    pub fn mean_round(&self) -> Duration {
        self.total_elapsed() / self.rounds.len().max(1) as u32
    }
}

struct RoundInputs {
    inputs: BTreeMap<u16, Vec<i64>>,
    available: Vec<u16>,
}

fn round_inputs(cfg: &BaselineConfig, t: u32) -> RoundInputs {
    let ids: Vec<u16> = (0..cfg.clients as u16).collect();
    let avail = RoundAvailability::bernoulli(ids.iter().copied(), cfg.dropout, cfg.seed, t);
    RoundInputs {
        inputs: ids
            .iter()
            .map(|&id| (id, synthetic_input(cfg.seed, id, t, cfg.dim, cfg.input_bound)))
            .collect(),
        available: avail.online.into_iter().collect(),
    }
}

fn encrypt_all(
    cfg: &BaselineConfig,
    t: u32,
    ri: &RoundInputs,
    cpk: &bfv::PublicKey,
    label: &str,
) -> Result<Vec<Ciphertext>> {
    let cts: Vec<Vec<Ciphertext>> = ri
        .available
        .iter()
        .map(|&id| {
            let mut rng = derive_rng(cfg.seed, label, id as u64, t as u64);
            ops::client_encrypt_input(&ri.inputs[&id], cpk, &mut rng)
        })
        .collect::<Result<_>>()?;
    let refs: Vec<&[Ciphertext]> = cts.iter().map(|c| c.as_slice()).collect();
    ops::server_aggregate_ciphertexts(&refs)
}

fn aborted(t: u32, available: Vec<u16>, messages: u64, start: Instant) -> BaselineRound {
    BaselineRound {
        round: t,
        completed: false,
        exact: false,
        values: None,
        contributors: available,
        selected: Vec::new(),
        messages,
        elapsed: start.elapsed(),
    }
}

/// Every round: the `k` lowest-id available clients run a fresh k-of-k key
/// setup under a new `p1` (no secret sharing), every available client
/// encrypts, and the `k` decrypt with coefficient 1.
///
/// Envelopes per round: `k` setup parameters, `k` key shares, one key
/// broadcast, `|A|` uploads, one aggregate broadcast and `k` decryption
/// shares, i.e. `3k + |A| + 2`.
pub fn run_asa_baseline(cfg: &BaselineConfig) -> Result<BaselineReport> {
    let ctx = RingContext::new(cfg.params.clone())?;
    let k = cfg.threshold;
    let mut rounds = Vec::with_capacity(cfg.rounds as usize);
    for t in 1..=cfg.rounds {
        let ri = round_inputs(cfg, t);
        let start = Instant::now();
        if ri.available.len() < k {
            rounds.push(aborted(t, ri.available, 0, start));
            continue;
        }
        let selected: Vec<u16> = ri.available[..k].to_vec();
        let p1 = RingElement::sample(&ctx, Distribution::Uniform, &mut derive_rng(cfg.seed, "asa-p1", t as u64, 0))?;
        let mut secrets = Vec::with_capacity(k);
        let mut pk_shares = Vec::with_capacity(k);
        for &id in &selected {
            let mut rng = derive_rng(cfg.seed, "asa-key", id as u64, t as u64);
            let sk = bfv::keygen_secret(&ctx, &mut rng);
            pk_shares.push(bfv::keygen_public(&sk, &p1, &mut rng)?.p0);
            secrets.push(sk);
        }
        let cpk = ops::server_setup_aggregate(&pk_shares, &p1)?;
        let agg = encrypt_all(cfg, t, &ri, &cpk, "asa-enc")?;
        let c1s: Vec<RingElement> = agg.iter().map(|c| c.c1.clone()).collect();
        let hs: Vec<Vec<RingElement>> = selected
            .iter()
            .zip(&secrets)
            .map(|(&id, SecretKey { s })| {
                let mut rng = derive_rng(cfg.seed, "asa-smudge", id as u64, t as u64);
                ops::client_decryption_share(&c1s, 1, s, &mut rng)
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&[RingElement]> = hs.iter().map(|h| h.as_slice()).collect();
        let values = ops::server_finalize_round(&agg, &refs, cfg.dim, &cfg.params)?;
        let elapsed = start.elapsed();
        let exact = values == exact_sum(&ri.inputs, &ri.available, cfg.dim);
        rounds.push(BaselineRound {
            round: t,
            completed: true,
            exact,
            values: Some(values),
            messages: (3 * k + ri.available.len() + 2) as u64,
            contributors: ri.available,
            selected,
            elapsed,
        });
    }
    Ok(BaselineReport {
        setup_elapsed: Duration::ZERO,
        setup_messages: 0,
        rounds,
    })
}

/// The persistent scheme on the same workload: one (N, k) setup, then per
/// round `|A|` uploads, one aggregate broadcast, `k` coefficient messages
/// and `k` decryption shares.
pub fn run_rsa_ops(cfg: &BaselineConfig) -> Result<BaselineReport> {
    let ctx = RingContext::new(cfg.params.clone())?;
    let (n_clients, k) = (cfg.clients, cfg.threshold);
    let setup_start = Instant::now();
    let points: Vec<EvalPoint> = (0..n_clients as u16).map(EvalPoint::for_client).collect();
    let p1 = RingElement::sample(&ctx, Distribution::Uniform, &mut derive_rng(cfg.seed, "rsa-p1", 0, 0))?;
    let outputs: Vec<ops::SetupOutput> = (0..n_clients)
        .map(|i| ops::client_setup(&ctx, k, &p1, &points, &mut derive_rng(cfg.seed, "rsa-setup", i as u64, 0)))
        .collect::<Result<_>>()?;
    let key_shares: Vec<RingElement> = (0..n_clients)
        .map(|j| {
            let incoming: Vec<RingElement> = outputs.iter().map(|o| o.shares[j].value.clone()).collect();
            ops::combine_key_shares(&incoming)
        })
        .collect::<Result<_>>()?;
    let pk_shares: Vec<RingElement> = outputs.iter().map(|o| o.pk_share.clone()).collect();
    let cpk = ops::server_setup_aggregate(&pk_shares, &p1)?;
    let setup_elapsed = setup_start.elapsed();
    let setup_messages = (n_clients * n_clients + n_clients) as u64;

    let mut rounds = Vec::with_capacity(cfg.rounds as usize);
    for t in 1..=cfg.rounds {
        let ri = round_inputs(cfg, t);
        let start = Instant::now();
        let available: BTreeSet<u16> = ri.available.iter().copied().collect();
        let selection = match ops::server_select_and_coeffs(t, &points, &available, k, ctx.q()) {
            Ok(s) => s,
            Err(_) => {
                rounds.push(aborted(t, ri.available, 0, start));
                continue;
            }
        };
        let agg = encrypt_all(cfg, t, &ri, &cpk, "rsa-enc")?;
        let c1s: Vec<RingElement> = agg.iter().map(|c| c.c1.clone()).collect();
        let hs: Vec<Vec<RingElement>> = selection
            .selected
            .iter()
            .zip(&selection.coeffs)
            .map(|(p, &r)| {
                let mut rng = derive_rng(cfg.seed, "rsa-smudge", p.client_id as u64, t as u64);
                ops::client_decryption_share(&c1s, r, &key_shares[p.client_id as usize], &mut rng)
            })
            .collect::<Result<_>>()?;
        let refs: Vec<&[RingElement]> = hs.iter().map(|h| h.as_slice()).collect();
        let values = ops::server_finalize_round(&agg, &refs, cfg.dim, &cfg.params)?;
        let elapsed = start.elapsed();
        let exact = values == exact_sum(&ri.inputs, &ri.available, cfg.dim);
        rounds.push(BaselineRound {
            round: t,
            completed: true,
            exact,
            values: Some(values),
            messages: (ri.available.len() + 1 + 2 * k) as u64,
            contributors: ri.available,
            selected: selection.selected.iter().map(|p| p.client_id).collect(),
            elapsed,
        });
    }
    Ok(BaselineReport {
        setup_elapsed,
        setup_messages,
        rounds,
    })
}
