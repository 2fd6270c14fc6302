use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use serde::Serialize;

use crate::bfv::{self, Ciphertext, PublicKey};
use crate::error::{Error, Result};
use crate::ring::{Distribution, RingContext, RingElement, RingParams};
use crate::seeds::derive_rng;
use crate::shamir::EvalPoint;
use crate::transport::{Envelope, MsgType, SERVER_ID};

use super::messages::{
    decode_ring, encode_ring, AggBcast, CtUpload, DecShare, NewUserReq, RosterEntry, RoundResult,
    RoundStatus, SelectCoeffs, SetupMode, SetupParams,
};
use super::ops;

#[derive(Debug, Clone)]
pub struct ServerConfig {
    pub params: RingParams,
    /// Setup participants `N`.
    pub clients: usize,
    /// Decryption threshold `k`.
    pub threshold: usize,
    pub seed: u64,
    /// Keep aggregates and decryption shares after a round completes.
    pub retain_round_data: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ServerPhase {
    Registering,
    Setup,
    Ready,
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundPhase {
    Collecting,
    Decrypting,
    Completed,
    Aborted(String),
}

impl RoundPhase {
    pub fn is_final(&self) -> bool {
        matches!(self, RoundPhase::Completed | RoundPhase::Aborted(_))
    }
}

#[derive(Debug, Clone)]
pub struct RoundRecord {
    pub round: u32,
    pub phase: RoundPhase,
    pub dim: Option<u32>,
    pub contributors: Vec<u16>,
    /// Per-client ciphertexts until aggregation.
    pub uploads: BTreeMap<u16, Vec<Ciphertext>>,
    pub aggregate: Option<Vec<Ciphertext>>,
    pub selected: Vec<u16>,
    pub coeffs: Vec<u64>,
    pub shares: BTreeMap<u16, Vec<RingElement>>,
    pub result: Option<Vec<i64>>,
}

impl RoundRecord {
    fn new(round: u32) -> Self {
        Self {
            round,
            phase: RoundPhase::Collecting,
            dim: None,
            contributors: Vec::new(),
            uploads: BTreeMap::new(),
            aggregate: None,
            selected: Vec::new(),
            coeffs: Vec::new(),
            shares: BTreeMap::new(),
            result: None,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct RoundCounters {
    pub uploads: u64,
    pub agg_bcast: u64,
    pub select: u64,
    pub dec_shares: u64,
    pub results: u64,
}

impl RoundCounters {
    /// Uploads + aggregate broadcast + coefficients + decryption shares; the
    /// result broadcast is the round's output and is tallied separately.
    pub fn total(&self) -> u64 {
        self.uploads + self.agg_bcast + self.select + self.dec_shares
    }
}

/// Envelopes seen or originated by the server, one count per envelope.
/// Relayed client-to-client blobs count once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct MessageCounters {
    pub setup_params: u64,
    pub pk_shares: u64,
    pub secret_shares: u64,
    pub cpk_bcast: u64,
    pub join: u64,
    pub late: u64,
    pub rounds: BTreeMap<u32, RoundCounters>,
}

impl MessageCounters {
    pub fn setup_total(&self) -> u64 {
        self.setup_params + self.pk_shares + self.secret_shares
    }

    pub fn round(&self, t: u32) -> RoundCounters {
        self.rounds.get(&t).copied().unwrap_or_default()
    }
}

struct JoinState {
    helpers: Vec<u16>,
    relayed: BTreeSet<u16>,
}

pub struct Server {
    ctx: Arc<RingContext>,
    cfg: ServerConfig,
    phase: ServerPhase,
    roster: BTreeMap<u16, RosterEntry>,
    holders: BTreeSet<u16>,
    p1: Option<RingElement>,
    pk_shares: BTreeMap<u16, RingElement>,
    relayed: BTreeSet<(u16, u16)>,
    cpk: Option<PublicKey>,
    rounds: BTreeMap<u32, RoundRecord>,
    joins: BTreeMap<u16, JoinState>,
    counters: MessageCounters,
}

fn bcast(msg_type: MsgType, round: u32, payload: Vec<u8>) -> Envelope {
    Envelope::new(msg_type, round, SERVER_ID, SERVER_ID, payload)
}

fn unicast(msg_type: MsgType, round: u32, to: u16, payload: Vec<u8>) -> Envelope {
    Envelope::new(msg_type, round, SERVER_ID, to, payload)
}

impl Server {
    pub fn new(cfg: ServerConfig) -> Result<Self> {
        if cfg.threshold == 0 || cfg.threshold > cfg.clients {
            return Err(Error::Threshold {
                k: cfg.threshold,
                n: cfg.clients,
            });
        }
        if cfg.clients >= SERVER_ID as usize {
            return Err(Error::Config(format!("{} clients exceed the id space", cfg.clients)));
        }
        let ctx = RingContext::new(cfg.params.clone())?;
        Ok(Self {
            ctx,
            cfg,
            phase: ServerPhase::Registering,
            roster: BTreeMap::new(),
            holders: BTreeSet::new(),
            p1: None,
            pk_shares: BTreeMap::new(),
            relayed: BTreeSet::new(),
            cpk: None,
            rounds: BTreeMap::new(),
            joins: BTreeMap::new(),
            counters: MessageCounters::default(),
        })
    }

    pub fn config(&self) -> &ServerConfig {
        &self.cfg
    }

    pub fn context(&self) -> &Arc<RingContext> {
        &self.ctx
    }

    pub fn phase(&self) -> &ServerPhase {
        &self.phase
    }

    pub fn cpk(&self) -> Option<&PublicKey> {
        self.cpk.as_ref()
    }

    pub fn counters(&self) -> &MessageCounters {
        &self.counters
    }

    pub fn round(&self, t: u32) -> Option<&RoundRecord> {
        self.rounds.get(&t)
    }

    pub fn rounds(&self) -> &BTreeMap<u32, RoundRecord> {
        &self.rounds
    }

    pub fn roster(&self) -> Vec<u16> {
        self.roster.keys().copied().collect()
    }

    /// Clients holding a share of the collective secret.
    pub fn holders(&self) -> &BTreeSet<u16> {
        &self.holders
    }

    pub fn join_pending(&self) -> bool {
        !self.joins.is_empty()
    }

    fn holder_points(&self) -> Vec<EvalPoint> {
        self.holders
            .iter()
            .map(|id| EvalPoint {
                client_id: *id,
                x: self.roster[id].x,
            })
            .collect()
    }

    pub fn handle(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        if let ServerPhase::Aborted(reason) = &self.phase {
            return Err(Error::SetupAborted(reason.clone()));
        }
        if env.sender == SERVER_ID {
            return Err(Error::State("server received its own envelope".into()));
        }
        match env.msg_type {
            MsgType::Register => self.on_register(env),
            MsgType::PkShare => self.on_pk_share(env),
            MsgType::SecretShare => self.on_secret_share(env),
            MsgType::CtUpload => self.on_upload(env),
            MsgType::DecShare => self.on_dec_share(env),
            MsgType::AuxShare => self.on_aux_share(env),
            other => Err(Error::State(format!("server cannot handle {other:?}"))),
        }
    }

    fn entry_point(id: u16) -> u64 {
        EvalPoint::for_client(id).x
    }

    fn on_register(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        let transport_key: [u8; 32] = env
            .payload
            .as_slice()
            .try_into()
            .map_err(|_| Error::Decode("register payload must be a 32-byte key".into()))?;
        let id = env.sender;
        if self.roster.contains_key(&id) {
            return Err(Error::State(format!("client {id} registered twice")));
        }
        let entry = RosterEntry {
            client_id: id,
            x: Self::entry_point(id),
            transport_key,
        };
        match self.phase {
            ServerPhase::Registering => {
                self.roster.insert(id, entry);
                if self.roster.len() == self.cfg.clients {
                    return self.start_setup();
                }
                Ok(vec![])
            }
            ServerPhase::Ready => self.start_join(entry),
            _ => Err(Error::State(format!("registration of {id} during setup"))),
        }
    }

    fn start_setup(&mut self) -> Result<Vec<Envelope>> {
        let mut rng = derive_rng(self.cfg.seed, "p1", SERVER_ID as u64, 0);
        let p1 = RingElement::sample(&self.ctx, Distribution::Uniform, &mut rng)?;
        let sp = SetupParams {
            mode: SetupMode::Setup,
            params: self.cfg.params.clone(),
            threshold: self.cfg.threshold as u16,
            p1: p1.clone(),
            roster: self.roster.values().cloned().collect(),
        };
        let payload = sp.encode();
        self.p1 = Some(p1);
        self.phase = ServerPhase::Setup;
        self.counters.setup_params += self.roster.len() as u64;
        Ok(self
            .roster
            .keys()
            .map(|&id| unicast(MsgType::SetupParams, 0, id, payload.clone()))
            .collect())
    }

    fn on_pk_share(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        if self.phase != ServerPhase::Setup || !self.roster.contains_key(&env.sender) {
            return Err(Error::State(format!("unexpected key share from {}", env.sender)));
        }
        let p0 = decode_ring(&self.ctx, &env.payload)?;
        if self.pk_shares.insert(env.sender, p0).is_none() {
            self.counters.pk_shares += 1;
        }
        Ok(self.check_setup_complete())
    }

    fn on_secret_share(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        let (from, to) = (env.sender, env.receiver);
        if self.phase != ServerPhase::Setup
            || from == to
            || !self.roster.contains_key(&from)
            || !self.roster.contains_key(&to)
        {
            return Err(Error::State(format!("unexpected secret share {from} -> {to}")));
        }
        if !self.relayed.insert((from, to)) {
            return Ok(vec![]);
        }
        self.counters.secret_shares += 1;
        let mut out = vec![env.clone()];
        out.extend(self.check_setup_complete());
        Ok(out)
    }

    fn check_setup_complete(&mut self) -> Vec<Envelope> {
        let n = self.roster.len();
        if self.pk_shares.len() < n || self.relayed.len() < n * (n - 1) {
            return vec![];
        }
        let shares: Vec<RingElement> = self.pk_shares.values().cloned().collect();
        let cpk = ops::server_setup_aggregate(&shares, self.p1.as_ref().unwrap())
            .expect("roster is non-empty");
        let payload = encode_ring(&cpk.p0);
        self.cpk = Some(cpk);
        self.holders = self.roster.keys().copied().collect();
        self.pk_shares.clear();
        self.phase = ServerPhase::Ready;
        self.counters.cpk_bcast += 1;
        log::info!("setup complete with {n} clients");
        vec![bcast(MsgType::CpkBcast, 0, payload)]
    }

    /// Helpers for a join: the lowest-id share holders among the contributors
    /// of the latest finished round, falling back to all holders.
    fn pick_helpers(&self) -> Vec<u16> {
        let k = self.cfg.threshold;
        let recent: Vec<u16> = self
            .rounds
            .values()
            .rev()
            .find(|r| r.phase.is_final() && !r.contributors.is_empty())
            .map(|r| {
                r.contributors
                    .iter()
                    .filter(|c| self.holders.contains(c))
                    .copied()
                    .collect()
            })
            .unwrap_or_default();
        let pool: Vec<u16> = if recent.len() >= k {
            recent
        } else {
            self.holders.iter().copied().collect()
        };
        pool.into_iter().take(k).collect()
    }

    fn start_join(&mut self, entry: RosterEntry) -> Result<Vec<Envelope>> {
        let id = entry.client_id;
        if self.roster.values().any(|e| e.x == entry.x) {
            return Err(Error::BadEvalPoint(entry.x));
        }
        let helpers = self.pick_helpers();
        let k = self.cfg.threshold;
        if helpers.len() < k {
            return Err(Error::ShareCount {
                needed: k,
                got: helpers.len(),
            });
        }
        let helper_points: Vec<EvalPoint> = helpers
            .iter()
            .map(|h| EvalPoint {
                client_id: *h,
                x: self.roster[h].x,
            })
            .collect();
        let columns = ops::helper_columns(&helper_points, k, self.ctx.q())?;
        self.roster.insert(id, entry.clone());
        let sp = SetupParams {
            mode: SetupMode::Join,
            params: self.cfg.params.clone(),
            threshold: k as u16,
            p1: self.p1.clone().unwrap(),
            roster: self.roster.values().cloned().collect(),
        };
        let cpk = self.cpk.as_ref().unwrap();
        let mut out = vec![
            unicast(MsgType::SetupParams, 0, id, sp.encode()),
            unicast(MsgType::CpkBcast, 0, id, encode_ring(&cpk.p0)),
        ];
        for (h, column) in helpers.iter().zip(columns) {
            let req = NewUserReq {
                new_id: id,
                x_new: entry.x,
                transport_key: entry.transport_key,
                column,
            };
            out.push(unicast(MsgType::NewUserReq, 0, *h, req.encode()));
        }
        self.counters.join += out.len() as u64;
        self.joins.insert(
            id,
            JoinState {
                helpers,
                relayed: BTreeSet::new(),
            },
        );
        log::info!("client {id} joining");
        Ok(out)
    }

    fn on_aux_share(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        let join = self
            .joins
            .get_mut(&env.receiver)
            .ok_or_else(|| Error::State(format!("no join pending for {}", env.receiver)))?;
        if !join.helpers.contains(&env.sender) {
            return Err(Error::NotSelected(env.sender));
        }
        if !join.relayed.insert(env.sender) {
            return Ok(vec![]);
        }
        self.counters.join += 1;
        if join.relayed.len() == join.helpers.len() {
            self.joins.remove(&env.receiver);
            self.holders.insert(env.receiver);
            log::info!("client {} now holds a key share", env.receiver);
        }
        Ok(vec![env.clone()])
    }

    /// Create the record for round `t` if it does not exist yet, so that a
    /// timeout can close it even when nobody uploads.
    pub fn open_round(&mut self, t: u32) {
        self.rounds.entry(t).or_insert_with(|| RoundRecord::new(t));
    }

    fn on_upload(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        let t = env.round;
        if self.phase != ServerPhase::Ready || !self.roster.contains_key(&env.sender) {
            return Err(Error::State(format!("unexpected upload from {}", env.sender)));
        }
        if t == 0 {
            return Err(Error::State("round numbers start at 1".into()));
        }
        let record = self.rounds.entry(t).or_insert_with(|| RoundRecord::new(t));
        if record.phase != RoundPhase::Collecting {
            self.counters.late += 1;
            log::debug!("late upload from {} for round {t}", env.sender);
            return Ok(vec![]);
        }
        let upload = CtUpload::decode(&self.ctx, &env.payload)?;
        let chunks = bfv::chunk_count(upload.dim as usize, self.ctx.n());
        if upload.cts.len() != chunks || record.dim.is_some_and(|d| d != upload.dim) {
            return Err(Error::Dimension {
                expected: record.dim.unwrap_or(upload.dim) as usize,
                got: upload.dim as usize,
            });
        }
        record.dim = Some(upload.dim);
        let cts = upload
            .cts
            .into_iter()
            .enumerate()
            .map(|(j, (c0, c1))| Ciphertext {
                c0,
                c1,
                chunk_index: j as u32,
            })
            .collect();
        if record.uploads.insert(env.sender, cts).is_none() {
            self.counters.rounds.entry(t).or_default().uploads += 1;
        }
        let all_in = self.holders.iter().all(|h| record.uploads.contains_key(h));
        if all_in {
            return self.close_collection(t);
        }
        Ok(vec![])
    }

    fn abort_round(&mut self, t: u32, reason: String) -> Vec<Envelope> {
        let record = self.rounds.get_mut(&t).expect("round exists");
        log::info!("{reason}");
        record.phase = RoundPhase::Aborted(reason.clone());
        record.uploads.clear();
        let rr = RoundResult {
            dim: record.dim.unwrap_or(0),
            contributors: record.contributors.clone(),
            status: RoundStatus::Aborted(reason),
        };
        self.counters.rounds.entry(t).or_default().results += 1;
        vec![bcast(MsgType::RoundResult, t, rr.encode())]
    }

    fn close_collection(&mut self, t: u32) -> Result<Vec<Envelope>> {
        let holder_points = self.holder_points();
        let record = self.rounds.get_mut(&t).expect("round exists");
        record.contributors = record.uploads.keys().copied().collect();
        if record.contributors.is_empty() {
            return Ok(self.abort_round(t, "no contributions".into()));
        }
        let available: BTreeSet<u16> = record.contributors.iter().copied().collect();
        let selection = match ops::server_select_and_coeffs(
            t,
            &holder_points,
            &available,
            self.cfg.threshold,
            self.ctx.q(),
        ) {
            Ok(s) => s,
            Err(e) => return Ok(self.abort_round(t, e.to_string())),
        };
        let refs: Vec<&[Ciphertext]> = record.uploads.values().map(|v| v.as_slice()).collect();
        let agg = ops::server_aggregate_ciphertexts(&refs)?;
        record.uploads.clear();
        let bc = AggBcast {
            dim: record.dim.unwrap_or(0),
            contributors: record.contributors.clone(),
            c1s: agg.iter().map(|c| c.c1.clone()).collect(),
        };
        record.aggregate = Some(agg);
        record.selected = selection.selected.iter().map(|p| p.client_id).collect();
        record.coeffs = selection.coeffs.clone();
        record.phase = RoundPhase::Decrypting;

        let mut out = vec![bcast(MsgType::AggBcast, t, bc.encode())];
        for (id, &r) in record.selected.iter().zip(&record.coeffs) {
            let sel = SelectCoeffs {
                r,
                selected: record.selected.clone(),
            };
            out.push(unicast(MsgType::SelectCoeffs, t, *id, sel.encode()));
        }
        let c = self.counters.rounds.entry(t).or_default();
        c.agg_bcast += 1;
        c.select += record.selected.len() as u64;
        Ok(out)
    }

    fn on_dec_share(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        let t = env.round;
        let Some(record) = self.rounds.get_mut(&t) else {
            return Err(Error::State(format!("decryption share for unknown round {t}")));
        };
        if record.phase != RoundPhase::Decrypting {
            self.counters.late += 1;
            return Ok(vec![]);
        }
        if !record.selected.contains(&env.sender) {
            return Err(Error::NotSelected(env.sender));
        }
        let share = DecShare::decode(&self.ctx, &env.payload)?;
        let chunks = record.aggregate.as_ref().map_or(0, |a| a.len());
        if share.hs.len() != chunks {
            return Err(Error::Dimension {
                expected: chunks,
                got: share.hs.len(),
            });
        }
        if record.shares.insert(env.sender, share.hs).is_none() {
            self.counters.rounds.entry(t).or_default().dec_shares += 1;
        }
        if record.shares.len() < record.selected.len() {
            return Ok(vec![]);
        }
        let agg = record.aggregate.as_ref().unwrap();
        let refs: Vec<&[RingElement]> = record.selected.iter().map(|id| record.shares[id].as_slice()).collect();
        let dim = record.dim.unwrap_or(0);
        let values = ops::server_finalize_round(agg, &refs, dim as usize, &self.cfg.params)?;
        record.result = Some(values.clone());
        record.phase = RoundPhase::Completed;
        if !self.cfg.retain_round_data {
            record.aggregate = None;
            record.shares.clear();
        }
        let rr = RoundResult {
            dim,
            contributors: record.contributors.clone(),
            status: RoundStatus::Completed(values),
        };
        self.counters.rounds.entry(t).or_default().results += 1;
        Ok(vec![bcast(MsgType::RoundResult, t, rr.encode())])
    }

    /// Mark non-responsive parties inactive and move the protocol on: an
    /// incomplete setup aborts, the oldest collecting round closes with the
    /// uploads it has, a round stuck in decryption aborts, and an unfinished
    /// join is dropped.
    pub fn on_timeout(&mut self) -> Result<Vec<Envelope>> {
        match self.phase.clone() {
            ServerPhase::Registering | ServerPhase::Setup => {
                let reason = format!(
                    "{} of {} clients completed setup",
                    self.pk_shares.len(),
                    self.cfg.clients
                );
                self.phase = ServerPhase::Aborted(reason.clone());
                return Err(Error::SetupAborted(reason));
            }
            ServerPhase::Aborted(reason) => return Err(Error::SetupAborted(reason)),
            ServerPhase::Ready => {}
        }
        if let Some(t) = self
            .rounds
            .values()
            .find(|r| r.phase == RoundPhase::Collecting)
            .map(|r| r.round)
        {
            return self.close_collection(t);
        }
        if let Some(t) = self
            .rounds
            .values()
            .find(|r| r.phase == RoundPhase::Decrypting)
            .map(|r| r.round)
        {
            let missing: Vec<u16> = {
                let r = &self.rounds[&t];
                r.selected.iter().filter(|id| !r.shares.contains_key(id)).copied().collect()
            };
            return Ok(self.abort_round(t, format!("missing decryption shares from {missing:?}")));
        }
        let stale: Vec<u16> = self.joins.keys().copied().collect();
        for id in stale {
            log::warn!("join of client {id} timed out");
            self.joins.remove(&id);
            self.roster.remove(&id);
        }
        Ok(vec![])
    }
}
