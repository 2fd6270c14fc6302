//! In-process protocol runs over the simulated network.

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use rand::Rng;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::ring::RingParams;
use crate::seeds::derive_rng;
use crate::transport::{Envelope, LatencyModel, MsgType, Network, Node, SERVER_ID};

use super::client::Client;
use super::messages::RoundStatus;
use super::server::{RoundCounters, RoundPhase, Server, ServerConfig, ServerPhase};

#[derive(Debug, Clone)]
pub struct SessionConfig {
    pub params: RingParams,
    pub clients: usize,
    pub threshold: usize,
    pub seed: u64,
    pub latency: LatencyModel,
    pub retain_round_data: bool,
}

impl SessionConfig {
    pub fn new(params: RingParams, clients: usize, threshold: usize, seed: u64) -> Self {
        Self {
            params,
            clients,
            threshold,
            seed,
            latency: LatencyModel::default(),
            retain_round_data: false,
        }
    }
}

/// Who is reachable during one round. Clients in `leave_after_upload` upload
/// and then vanish before decryption.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct RoundAvailability {
    pub online: BTreeSet<u16>,
    pub leave_after_upload: BTreeSet<u16>,
}

impl RoundAvailability {
    pub fn all(ids: impl IntoIterator<Item = u16>) -> Self {
        Self {
            online: ids.into_iter().collect(),
            leave_after_upload: BTreeSet::new(),
        }
    }

    /// Each client independently offline with probability `rate`, drawn from
    /// a stream fixed by `(seed, round)`.
    pub fn bernoulli(ids: impl IntoIterator<Item = u16>, rate: f64, seed: u64, round: u32) -> Self {
        let mut rng = derive_rng(seed, "dropout", round as u64, 0);
        Self::all(ids.into_iter().filter(|_| !rng.gen_bool(rate.clamp(0.0, 1.0))))
    }
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct SetupReport {
    pub messages: u64,
    pub bytes: u64,
    pub elapsed: Duration,
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundReport {
    pub round: u32,
    pub completed: bool,
    pub abort_reason: Option<String>,
    pub values: Option<Vec<i64>>,
    pub contributors: Vec<u16>,
    pub selected: Vec<u16>,
    pub messages: RoundCounters,
    /// Envelopes originated during the round, including the result broadcast.
    pub envelopes: u64,
    pub bytes: u64,
    /// Client-originated wire bytes.
    pub bytes_up: u64,
    /// Server-originated wire bytes, one copy per client for broadcasts.
    pub bytes_down: u64,
    pub encrypt_time: Duration,
    pub decrypt_share_time: Duration,
    pub server_time: Duration,
    pub elapsed: Duration,
}

#[derive(Default)]
struct Timers {
    encrypt: Duration,
    decrypt_share: Duration,
    server: Duration,
}

pub struct Session {
    cfg: SessionConfig,
    server: Server,
    clients: BTreeMap<u16, Client>,
    net: Network,
    transcript: Vec<Envelope>,
    bytes: u64,
    bytes_up: u64,
    bytes_down: u64,
    errors: Vec<(Node, Error)>,
    timers: Timers,
}

impl Session {
    pub fn new(cfg: SessionConfig) -> Result<Self> {
        let server = Server::new(ServerConfig {
            params: cfg.params.clone(),
            clients: cfg.clients,
            threshold: cfg.threshold,
            seed: cfg.seed,
            retain_round_data: cfg.retain_round_data,
        })?;
        let clients = (0..cfg.clients as u16)
            .map(|id| Ok((id, Client::new(id, cfg.params.clone(), cfg.seed)?)))
            .collect::<Result<_>>()?;
        Ok(Self {
            net: Network::new(cfg.latency),
            cfg,
            server,
            clients,
            transcript: Vec::new(),
            bytes: 0,
            bytes_up: 0,
            bytes_down: 0,
            errors: Vec::new(),
            timers: Timers::default(),
        })
    }

    pub fn config(&self) -> &SessionConfig {
        &self.cfg
    }

    pub fn server(&self) -> &Server {
        &self.server
    }

    pub fn client(&self, id: u16) -> Option<&Client> {
        self.clients.get(&id)
    }

    pub fn client_ids(&self) -> Vec<u16> {
        self.clients.keys().copied().collect()
    }

    /// Every envelope in the order its originator emitted it. Relays by the
    /// server are not repeated.
    pub fn transcript(&self) -> &[Envelope] {
        &self.transcript
    }

    /// Handler errors raised while pumping messages, with the node that
    /// raised them.
    pub fn errors(&self) -> &[(Node, Error)] {
        &self.errors
    }

    pub fn network(&self) -> &Network {
        &self.net
    }

    fn route(&mut self, from: Node, outs: Vec<Envelope>) {
        let all: Vec<u16> = self.clients.keys().copied().collect();
        for env in outs {
            let originated = match from {
                Node::Server => env.sender == SERVER_ID,
                Node::Client(c) => env.sender == c,
            };
            if originated {
                let len = env.wire_len() as u64;
                self.bytes += len;
                match from {
                    Node::Client(_) => self.bytes_up += len,
                    Node::Server if env.receiver == SERVER_ID => self.bytes_down += len * all.len() as u64,
                    Node::Server => self.bytes_down += len,
                }
                self.transcript.push(env.clone());
            }
            match from {
                Node::Server if env.receiver == SERVER_ID => {
                    for &c in &all {
                        self.net.post(from, Node::Client(c), env.clone(), 1);
                    }
                }
                Node::Server => {
                    self.net.post(from, Node::Client(env.receiver), env, 1);
                }
                Node::Client(_) => {
                    self.net.post(from, Node::Server, env, 1);
                }
            }
        }
    }

    fn pump(&mut self) {
        while let Some(d) = self.net.next_delivery() {
            let env = d.envelope;
            let result = match d.to {
                Node::Server => {
                    let start = Instant::now();
                    let r = self.server.handle(&env);
                    self.timers.server += start.elapsed();
                    r
                }
                Node::Client(c) => match self.clients.get_mut(&c) {
                    Some(client) => {
                        let start = Instant::now();
                        let r = client.handle(&env);
                        if matches!(env.msg_type, MsgType::AggBcast | MsgType::SelectCoeffs) {
                            self.timers.decrypt_share += start.elapsed();
                        }
                        r
                    }
                    None => Ok(vec![]),
                },
            };
            match result {
                Ok(outs) => self.route(d.to, outs),
                Err(e) => {
                    log::warn!("{:?} failed on {:?}: {e}", d.to, env.msg_type);
                    self.errors.push((d.to, e));
                }
            }
        }
    }

    pub fn setup(&mut self) -> Result<SetupReport> {
        self.setup_with_offline(&BTreeSet::new())
    }

    /// Run setup with some clients unreachable; any missing client aborts.
    pub fn setup_with_offline(&mut self, offline: &BTreeSet<u16>) -> Result<SetupReport> {
        let start = Instant::now();
        let (msgs0, bytes0) = (self.transcript.len(), self.bytes);
        for &id in offline {
            self.net.set_online(id, false);
        }
        let registrations: Vec<(u16, Envelope)> =
            self.clients.values().map(|c| (c.id(), c.register())).collect();
        for (id, env) in registrations {
            self.route(Node::Client(id), vec![env]);
        }
        self.pump();
        if self.server.phase() != &ServerPhase::Ready {
            self.server.on_timeout()?;
        }
        for &id in offline {
            self.net.set_online(id, true);
        }
        if let Some(c) = self.clients.values().find(|c| !c.is_ready()) {
            return Err(Error::SetupAborted(format!("client {} is not ready", c.id())));
        }
        // registrations are not protocol messages
        let messages = self.transcript[msgs0..]
            .iter()
            .filter(|e| !matches!(e.msg_type, MsgType::Register | MsgType::CpkBcast))
            .count() as u64;
        Ok(SetupReport {
            messages,
            bytes: self.bytes - bytes0,
            elapsed: start.elapsed(),
        })
    }

    pub fn run_round(
        &mut self,
        t: u32,
        inputs: &BTreeMap<u16, Vec<i64>>,
        avail: &RoundAvailability,
    ) -> Result<RoundReport> {
        let start = Instant::now();
        let (msgs0, bytes0) = (self.transcript.len(), self.bytes);
        let (up0, down0) = (self.bytes_up, self.bytes_down);
        self.timers = Timers::default();
        self.server.open_round(t);
        let ids: Vec<u16> = self.clients.keys().copied().collect();
        for &id in &ids {
            self.net.set_online(id, avail.online.contains(&id));
        }
        for (&id, g) in inputs {
            if !avail.online.contains(&id) {
                continue;
            }
            let Some(client) = self.clients.get_mut(&id) else {
                continue;
            };
            if !client.is_ready() && client.cpk().is_none() {
                continue;
            }
            let t0 = Instant::now();
            let env = client.submit(t, g)?;
            self.timers.encrypt += t0.elapsed();
            self.route(Node::Client(id), vec![env]);
        }
        for &id in &avail.leave_after_upload {
            self.net.set_online(id, false);
        }
        for _ in 0..4 {
            self.pump();
            if self.server.round(t).is_some_and(|r| r.phase.is_final()) {
                break;
            }
            let t0 = Instant::now();
            let outs = self.server.on_timeout()?;
            self.timers.server += t0.elapsed();
            self.route(Node::Server, outs);
        }
        let record = self
            .server
            .round(t)
            .ok_or_else(|| Error::State(format!("round {t} has no record")))?;
        if !record.phase.is_final() {
            return Err(Error::State(format!("round {t} did not terminate")));
        }
        let (completed, abort_reason) = match &record.phase {
            RoundPhase::Aborted(r) => (false, Some(r.clone())),
            _ => (true, None),
        };
        Ok(RoundReport {
            round: t,
            completed,
            abort_reason,
            values: record.result.clone(),
            contributors: record.contributors.clone(),
            selected: record.selected.clone(),
            messages: self.server.counters().round(t),
            envelopes: (self.transcript.len() - msgs0) as u64,
            bytes: self.bytes - bytes0,
            bytes_up: self.bytes_up - up0,
            bytes_down: self.bytes_down - down0,
            encrypt_time: self.timers.encrypt,
            decrypt_share_time: self.timers.decrypt_share,
            server_time: self.timers.server,
            elapsed: start.elapsed(),
        })
    }

    /// Bring a new client in after setup; `k` existing holders issue its
    /// share. Helpers must be online.
    pub fn add_user(&mut self, id: u16) -> Result<()> {
        if self.clients.contains_key(&id) {
            return Err(Error::State(format!("client {id} already exists")));
        }
        let client = Client::new(id, self.cfg.params.clone(), self.cfg.seed)?;
        let env = client.register();
        self.clients.insert(id, client);
        self.route(Node::Client(id), vec![env]);
        self.pump();
        if self.server.join_pending() {
            let outs = self.server.on_timeout()?;
            self.route(Node::Server, outs);
            self.pump();
        }
        if self.clients[&id].is_ready() {
            Ok(())
        } else {
            self.clients.remove(&id);
            Err(Error::State(format!("client {id} did not receive a key share")))
        }
    }
}

/// Input for client `id` in round `t`: uniform integers in `[-bound, bound]`.
pub fn synthetic_input(seed: u64, id: u16, t: u32, dim: usize, bound: i64) -> Vec<i64> {
    let mut rng = derive_rng(seed, "input", id as u64, t as u64);
    (0..dim).map(|_| rng.gen_range(-bound..=bound)).collect()
}

#[derive(Debug, Clone)]
pub struct SimulationConfig {
    pub session: SessionConfig,
    pub rounds: u32,
    pub dim: usize,
    pub dropout: f64,
    pub input_bound: i64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SimulationReport {
    pub setup: SetupReport,
    pub setup_messages: u64,
    pub rounds: Vec<RoundReport>,
    /// Per round: whether a completed round returned the exact sum of the
    /// contributors' inputs.
    pub exact: Vec<bool>,
}

impl SimulationReport {
    pub fn all_exact(&self) -> bool {
        self.rounds
            .iter()
            .zip(&self.exact)
            .all(|(r, &ok)| !r.completed || ok)
    }
}

pub fn exact_sum(inputs: &BTreeMap<u16, Vec<i64>>, contributors: &[u16], dim: usize) -> Vec<i64> {
    let mut sum = vec![0i64; dim];
    for c in contributors {
        for (s, v) in sum.iter_mut().zip(&inputs[c]) {
            *s += v;
        }
    }
    sum
}

/// Setup followed by `rounds` aggregation rounds with Bernoulli dropout.
pub fn run_simulation(cfg: &SimulationConfig) -> Result<SimulationReport> {
    let mut session = Session::new(cfg.session.clone())?;
    let setup = session.setup()?;
    let seed = cfg.session.seed;
    let mut rounds = Vec::with_capacity(cfg.rounds as usize);
    let mut exact = Vec::with_capacity(cfg.rounds as usize);
    for t in 1..=cfg.rounds {
        let ids = session.client_ids();
        let inputs: BTreeMap<u16, Vec<i64>> = ids
            .iter()
            .map(|&id| (id, synthetic_input(seed, id, t, cfg.dim, cfg.input_bound)))
            .collect();
        let avail = RoundAvailability::bernoulli(ids, cfg.dropout, seed, t);
        let report = session.run_round(t, &inputs, &avail)?;
        let ok = report
            .values
            .as_ref()
            .is_some_and(|v| *v == exact_sum(&inputs, &report.contributors, cfg.dim));
        log::info!(
            "round {t}: {} contributors, {}",
            report.contributors.len(),
            if report.completed { "completed" } else { "aborted" }
        );
        exact.push(ok);
        rounds.push(report);
    }
    Ok(SimulationReport {
        setup_messages: session.server().counters().setup_total(),
        setup,
        rounds,
        exact,
    })
}

impl RoundReport {
    pub fn status(&self) -> RoundStatus {
        match (&self.values, &self.abort_reason) {
            (Some(v), _) => RoundStatus::Completed(v.clone()),
            (None, r) => RoundStatus::Aborted(r.clone().unwrap_or_default()),
        }
    }
}
