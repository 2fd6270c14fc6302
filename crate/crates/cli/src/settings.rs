//! Merging flags, config file and per-command defaults.

use anyhow::Result;
use secagg_core::bfv::{aggregate_capacity, max_smudging_bound};
use secagg_core::ring::{RingParams, DEFAULT_SIGMA, Q60};

use crate::config::ConfigFile;
use crate::{ProtocolArgs, RingArgs};

#[derive(Debug, Clone, Copy)]
pub struct Defaults {
    pub n: usize,
    pub p: u64,
    pub clients: usize,
    pub threshold: usize,
    pub rounds: u32,
    pub dim: usize,
    pub dropout: f64,
}

impl Defaults {
    pub const PROTOCOL: Defaults = Defaults {
        n: 8192,
        p: 1 << 20,
        clients: 8,
        threshold: 6,
        rounds: 20,
        dim: 10_000,
        dropout: 0.25,
    };
}

#[derive(Debug, Clone)]
pub struct Resolved {
    pub params: RingParams,
    pub clients: usize,
    pub threshold: usize,
    pub rounds: u32,
    pub dim: usize,
    pub dropout: f64,
    pub seed: u64,
    pub input_bound: i64,
    pub file: ConfigFile,
}

pub fn resolve(ring: &RingArgs, proto: &ProtocolArgs, defaults: Defaults) -> Result<Resolved> {
    let file = ConfigFile::load(ring.config.as_deref())?;
    let clients = file.pick(proto.clients, "clients", defaults.clients)?;
    let threshold = file.pick(proto.threshold, "threshold", defaults.threshold.min(clients))?;
    let n = file.pick(ring.n, "n", defaults.n)?;
    let q = file.pick(ring.q, "q", Q60)?;
    let p = file.pick(ring.p, "p", defaults.p)?;
    let sigma = file.pick(ring.sigma, "sigma", DEFAULT_SIGMA)?;
    let error_bound = file.pick(ring.error_bound, "error_bound", (6.0 * sigma).ceil() as u64)?;
    let base = RingParams::new(n, q, p)?.with_error(sigma, error_bound)?;
    let smudging = match file.pick_opt(ring.smudging_bound, "smudging_bound")? {
        Some(b) => b,
        None => max_smudging_bound(&base, clients, threshold, 2),
    };
    let params = base.with_smudging(smudging);
    let input_bound = file.pick(
        proto.input_bound,
        "input_bound",
        aggregate_capacity(&params, clients).min(1000),
    )?;
    Ok(Resolved {
        clients,
        threshold,
        rounds: file.pick(proto.rounds, "rounds", defaults.rounds)?,
        dim: file.pick(proto.dim, "dim", defaults.dim)?,
        dropout: file.pick(proto.dropout, "dropout", defaults.dropout)?,
        seed: file.pick(proto.seed, "seed", 1)?,
        input_bound,
        params,
        file,
    })
}
