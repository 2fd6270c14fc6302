use std::collections::{BTreeMap, BTreeSet};
use std::sync::Arc;

use crate::bfv::{PublicKey, SecretKey};
use crate::error::{Error, Result};
use crate::ring::{RingContext, RingElement, RingParams};
use crate::seeds::derive_rng;
use crate::shamir::EvalPoint;
use crate::transport::{secure_unwrap, secure_wrap, Envelope, MsgType, SecureBlob, TransportKeypair, SERVER_ID};

use super::messages::{
    decode_ring, encode_ring, AggBcast, CtUpload, DecShare, NewUserReq, RosterEntry, RoundResult,
    SelectCoeffs, SetupMode, SetupParams,
};
use super::ops;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ClientPhase {
    /// Waiting for the server to start setup.
    Registered,
    /// Key material sent; collecting incoming shares and the collective key.
    Shared,
    /// Joined after setup; collecting helper evaluations.
    Joining,
    /// Holds `s'_i` and `cpk`.
    Ready,
}

#[derive(Default)]
struct PendingDecrypt {
    c1s: Option<Vec<RingElement>>,
    r: Option<u64>,
}

/// One participant. Every input is an [`Envelope`]; every output is a list of
/// envelopes for the server to route.
pub struct Client {
    id: u16,
    ctx: Arc<RingContext>,
    seed: u64,
    keys: TransportKeypair,
    phase: ClientPhase,
    threshold: usize,
    roster: BTreeMap<u16, RosterEntry>,
    p1: Option<RingElement>,
    cpk_p0: Option<RingElement>,
    secret: Option<SecretKey>,
    incoming: BTreeMap<u16, RingElement>,
    aux: BTreeMap<u16, RingElement>,
    key_share: Option<RingElement>,
    pending: BTreeMap<u32, PendingDecrypt>,
    submitted: BTreeSet<u32>,
    results: BTreeMap<u32, RoundResult>,
}

impl Client {
    /// All randomness (transport keys, key material, encryption, smudging)
    /// comes from streams derived from `(seed, id)`.
    pub fn new(id: u16, params: RingParams, seed: u64) -> Result<Self> {
        if id == SERVER_ID {
            return Err(Error::Config(format!("client id {id} is reserved")));
        }
        let ctx = RingContext::new(params)?;
        let keys = TransportKeypair::generate(&mut derive_rng(seed, "transport", id as u64, 0));
        Ok(Self {
            id,
            ctx,
            seed,
            keys,
            phase: ClientPhase::Registered,
            threshold: 0,
            roster: BTreeMap::new(),
            p1: None,
            cpk_p0: None,
            secret: None,
            incoming: BTreeMap::new(),
            aux: BTreeMap::new(),
            key_share: None,
            pending: BTreeMap::new(),
            submitted: BTreeSet::new(),
            results: BTreeMap::new(),
        })
    }

    pub fn id(&self) -> u16 {
        self.id
    }

    pub fn context(&self) -> &Arc<RingContext> {
        &self.ctx
    }

    pub fn phase(&self) -> ClientPhase {
        self.phase
    }

    pub fn is_ready(&self) -> bool {
        self.phase == ClientPhase::Ready
    }

    pub fn transport_public(&self) -> [u8; 32] {
        self.keys.public_bytes()
    }

    pub fn eval_point(&self) -> Option<EvalPoint> {
        self.roster.get(&self.id).map(|e| EvalPoint {
            client_id: self.id,
            x: e.x,
        })
    }

    /// `s'_i`, once every incoming share (or helper evaluation) arrived.
    pub fn key_share(&self) -> Option<&RingElement> {
        self.key_share.as_ref()
    }

    /// The local secret `s_i`. Exposed for test oracles only.
    pub fn local_secret(&self) -> Option<&SecretKey> {
        self.secret.as_ref()
    }

    pub fn cpk(&self) -> Option<PublicKey> {
        Some(PublicKey {
            p0: self.cpk_p0.clone()?,
            p1: self.p1.clone()?,
        })
    }

    pub fn result(&self, round: u32) -> Option<&RoundResult> {
        self.results.get(&round)
    }

    pub fn results(&self) -> &BTreeMap<u32, RoundResult> {
        &self.results
    }

    pub fn has_submitted(&self, round: u32) -> bool {
        self.submitted.contains(&round)
    }

    pub fn register(&self) -> Envelope {
        Envelope::new(MsgType::Register, 0, self.id, SERVER_ID, self.keys.public_bytes().to_vec())
    }

    /// Encrypt this round's input and produce the upload.
    pub fn submit(&mut self, round: u32, g: &[i64]) -> Result<Envelope> {
        let cpk = self
            .cpk()
            .ok_or_else(|| Error::State(format!("client {} has no collective key", self.id)))?;
        if !self.submitted.insert(round) {
            return Err(Error::State(format!("client {} already submitted round {round}", self.id)));
        }
        let mut rng = derive_rng(self.seed, "encrypt", self.id as u64, round as u64);
        let cts = ops::client_encrypt_input(g, &cpk, &mut rng)?;
        let upload = CtUpload {
            dim: g.len() as u32,
            cts: cts.into_iter().map(|c| (c.c0, c.c1)).collect(),
        };
        Ok(Envelope::new(MsgType::CtUpload, round, self.id, SERVER_ID, upload.encode()))
    }

    pub fn handle(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        match env.msg_type {
            MsgType::SetupParams => self.on_setup_params(env),
            MsgType::SecretShare => self.on_secret_share(env),
            MsgType::CpkBcast => {
                self.cpk_p0 = Some(decode_ring(&self.ctx, &env.payload)?);
                self.check_ready();
                Ok(vec![])
            }
            MsgType::AggBcast => {
                if self.key_share.is_some() {
                    let agg = AggBcast::decode(&self.ctx, &env.payload)?;
                    self.pending.entry(env.round).or_default().c1s = Some(agg.c1s);
                    self.try_decrypt(env.round)
                } else {
                    Ok(vec![])
                }
            }
            MsgType::SelectCoeffs => {
                let sel = SelectCoeffs::decode(&env.payload)?;
                if !sel.selected.contains(&self.id) || self.key_share.is_none() {
                    return Err(Error::NotSelected(self.id));
                }
                self.pending.entry(env.round).or_default().r = Some(sel.r);
                self.try_decrypt(env.round)
            }
            MsgType::RoundResult => {
                self.pending.remove(&env.round);
                self.results.insert(env.round, RoundResult::decode(&env.payload)?);
                Ok(vec![])
            }
            MsgType::NewUserReq => self.on_new_user(env),
            MsgType::AuxShare => self.on_aux_share(env),
            other => Err(Error::State(format!("client cannot handle {other:?}"))),
        }
    }

    fn on_setup_params(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        if self.phase != ClientPhase::Registered {
            return Err(Error::State(format!("setup parameters in phase {:?}", self.phase)));
        }
        let sp = SetupParams::decode(&self.ctx, &env.payload)?;
        let me = sp
            .roster
            .iter()
            .find(|e| e.client_id == self.id)
            .ok_or_else(|| Error::State(format!("client {} missing from roster", self.id)))?;
        if me.transport_key != self.keys.public_bytes() {
            return Err(Error::State("roster carries a different transport key".into()));
        }
        self.threshold = sp.threshold as usize;
        self.roster = sp.roster.iter().map(|e| (e.client_id, e.clone())).collect();
        self.p1 = Some(sp.p1.clone());
        if sp.mode == SetupMode::Join {
            self.phase = ClientPhase::Joining;
            self.check_ready();
            return Ok(vec![]);
        }

        let points: Vec<EvalPoint> = sp
            .roster
            .iter()
            .map(|e| EvalPoint {
                client_id: e.client_id,
                x: e.x,
            })
            .collect();
        let mut rng = derive_rng(self.seed, "setup", self.id as u64, 0);
        let out = ops::client_setup(&self.ctx, self.threshold, &sp.p1, &points, &mut rng)?;
        let mut outgoing = Vec::with_capacity(points.len());
        for share in &out.shares {
            let j = share.point.client_id;
            if j == self.id {
                self.incoming.insert(j, share.value.clone());
                continue;
            }
            let blob = secure_wrap(&encode_ring(&share.value), &self.roster[&j].transport_key, &mut rng)?;
            outgoing.push(Envelope::new(MsgType::SecretShare, 0, self.id, j, blob.to_bytes()));
        }
        outgoing.push(Envelope::new(
            MsgType::PkShare,
            0,
            self.id,
            SERVER_ID,
            encode_ring(&out.pk_share),
        ));
        self.secret = Some(out.secret);
        self.phase = ClientPhase::Shared;
        self.check_ready();
        Ok(outgoing)
    }

    fn open_blob(&self, env: &Envelope) -> Result<RingElement> {
        let blob = SecureBlob::from_bytes(&env.payload)?;
        decode_ring(&self.ctx, &secure_unwrap(&blob, &self.keys)?)
    }

    fn on_secret_share(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        if env.receiver != self.id {
            return Err(Error::State(format!("share for {} delivered to {}", env.receiver, self.id)));
        }
        if self.key_share.is_some() {
            return Err(Error::State("key share already fixed".into()));
        }
        let value = self.open_blob(env)?;
        self.incoming.insert(env.sender, value);
        self.check_ready();
        Ok(vec![])
    }

    fn check_ready(&mut self) {
        if self.phase == ClientPhase::Shared
            && self.key_share.is_none()
            && !self.roster.is_empty()
            && self.roster.keys().all(|id| self.incoming.contains_key(id))
        {
            let shares: Vec<RingElement> = self.incoming.values().cloned().collect();
            self.key_share = ops::combine_key_shares(&shares).ok();
        }
        if self.key_share.is_some() && self.cpk().is_some() {
            self.phase = ClientPhase::Ready;
        }
    }

    fn try_decrypt(&mut self, round: u32) -> Result<Vec<Envelope>> {
        let ready = matches!(
            self.pending.get(&round),
            Some(PendingDecrypt { c1s: Some(_), r: Some(_) })
        );
        if !ready {
            return Ok(vec![]);
        }
        let p = self.pending.remove(&round).unwrap();
        let s_prime = self.key_share.as_ref().expect("checked on receipt");
        let mut rng = derive_rng(self.seed, "smudge", self.id as u64, round as u64);
        let hs = ops::client_decryption_share(&p.c1s.unwrap(), p.r.unwrap(), s_prime, &mut rng)?;
        Ok(vec![Envelope::new(
            MsgType::DecShare,
            round,
            self.id,
            SERVER_ID,
            DecShare { hs }.encode(),
        )])
    }

    fn on_new_user(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        let s_prime = self.key_share.as_ref().ok_or(Error::NotSelected(self.id))?;
        let req = NewUserReq::decode(&env.payload)?;
        let existing: Vec<EvalPoint> = self
            .roster
            .values()
            .filter(|e| e.client_id != req.new_id)
            .map(|e| EvalPoint {
                client_id: e.client_id,
                x: e.x,
            })
            .collect();
        let value = ops::helper_aux_share(s_prime, &req.column, req.x_new, &existing)?;
        let mut rng = derive_rng(self.seed, "aux", self.id as u64, req.new_id as u64);
        let blob = secure_wrap(&encode_ring(&value), &req.transport_key, &mut rng)?;
        self.roster.insert(
            req.new_id,
            RosterEntry {
                client_id: req.new_id,
                x: req.x_new,
                transport_key: req.transport_key,
            },
        );
        Ok(vec![Envelope::new(
            MsgType::AuxShare,
            env.round,
            self.id,
            req.new_id,
            blob.to_bytes(),
        )])
    }

    fn on_aux_share(&mut self, env: &Envelope) -> Result<Vec<Envelope>> {
        if self.phase != ClientPhase::Joining {
            return Err(Error::State(format!("helper evaluation in phase {:?}", self.phase)));
        }
        let value = self.open_blob(env)?;
        self.aux.insert(env.sender, value);
        if self.aux.len() == self.threshold {
            let point = self.eval_point().expect("roster received");
            let aux: Vec<RingElement> = self.aux.values().cloned().collect();
            self.key_share = Some(ops::newuser_assemble(&aux, self.threshold, point)?.value);
            self.check_ready();
        }
        Ok(vec![])
    }
}
