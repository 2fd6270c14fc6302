//! Typed payloads for each message kind and their byte encodings.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::ring::{RingContext, RingElement, RingParams};
use crate::transport::{Reader, Writer};

#[derive(Debug, Clone, PartialEq)]
pub struct RosterEntry {
    pub client_id: u16,
    pub x: u64,
    pub transport_key: [u8; 32],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum SetupMode {
    Setup = 0,
    Join = 1,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SetupParams {
    pub mode: SetupMode,
    pub params: RingParams,
    pub threshold: u16,
    pub p1: RingElement,
    pub roster: Vec<RosterEntry>,
}

fn write_params(w: &mut Writer, p: &RingParams) {
    w.u32(p.n as u32)
        .u64(p.q)
        .u64(p.p)
        .f64(p.sigma)
        .u64(p.error_bound)
        .u64(p.smudging_bound);
}

fn read_params(r: &mut Reader) -> Result<RingParams> {
    let params = RingParams {
        n: r.u32()? as usize,
        q: r.u64()?,
        p: r.u64()?,
        sigma: r.f64()?,
        error_bound: r.u64()?,
        smudging_bound: r.u64()?,
    };
    params.check()?;
    Ok(params)
}

impl SetupParams {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u8(self.mode as u8);
        write_params(&mut w, &self.params);
        w.u16(self.threshold).ring(&self.p1).u32(self.roster.len() as u32);
        for e in &self.roster {
            w.u16(e.client_id).u64(e.x).raw(&e.transport_key);
        }
        w.finish()
    }

    /// Decoding checks the announced parameters against the local context.
    pub fn decode(ctx: &Arc<RingContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let mode = match r.u8()? {
            0 => SetupMode::Setup,
            1 => SetupMode::Join,
            m => return Err(Error::Decode(format!("unknown setup mode {m}"))),
        };
        let params = read_params(&mut r)?;
        if &params != ctx.params() {
            return Err(Error::ParamMismatch);
        }
        let threshold = r.u16()?;
        let p1 = r.ring(ctx)?;
        let count = r.count(42)?;
        let mut roster = Vec::with_capacity(count);
        for _ in 0..count {
            roster.push(RosterEntry {
                client_id: r.u16()?,
                x: r.u64()?,
                transport_key: r.array()?,
            });
        }
        r.finish()?;
        Ok(Self {
            mode,
            params,
            threshold,
            p1,
            roster,
        })
    }
}

/// A single ring element: PK_SHARE and CPK_BCAST, and the plaintext inside
/// sealed key shares.
pub fn encode_ring(a: &RingElement) -> Vec<u8> {
    crate::transport::serialize_ring_element(a)
}

pub fn decode_ring(ctx: &Arc<RingContext>, bytes: &[u8]) -> Result<RingElement> {
    crate::transport::deserialize_ring_element(ctx, bytes)
}

fn write_rings(w: &mut Writer, items: &[RingElement]) {
    w.u32(items.len() as u32);
    for a in items {
        w.ring(a);
    }
}

fn read_rings(r: &mut Reader, ctx: &Arc<RingContext>) -> Result<Vec<RingElement>> {
    let count = r.count(8 * ctx.n())?;
    (0..count).map(|_| r.ring(ctx)).collect()
}

fn write_ids(w: &mut Writer, ids: &[u16]) {
    w.u32(ids.len() as u32);
    for &id in ids {
        w.u16(id);
    }
}

fn read_ids(r: &mut Reader) -> Result<Vec<u16>> {
    let count = r.count(2)?;
    (0..count).map(|_| r.u16()).collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct CtUpload {
    pub dim: u32,
    /// `(c0, c1)` per chunk, chunk index implied by position.
    pub cts: Vec<(RingElement, RingElement)>,
}

impl CtUpload {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.dim).u32(self.cts.len() as u32);
        for (c0, c1) in &self.cts {
            w.ring(c0).ring(c1);
        }
        w.finish()
    }

    pub fn decode(ctx: &Arc<RingContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let dim = r.u32()?;
        let count = r.count(16 * ctx.n())?;
        let cts = (0..count)
            .map(|_| Ok((r.ring(ctx)?, r.ring(ctx)?)))
            .collect::<Result<Vec<_>>>()?;
        r.finish()?;
        Ok(Self { dim, cts })
    }
}

/// The `c1` halves of the aggregate, which is all a decryptor needs.
#[derive(Debug, Clone, PartialEq)]
pub struct AggBcast {
    pub dim: u32,
    pub contributors: Vec<u16>,
    pub c1s: Vec<RingElement>,
}

impl AggBcast {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.dim);
        write_ids(&mut w, &self.contributors);
        write_rings(&mut w, &self.c1s);
        w.finish()
    }

    pub fn decode(ctx: &Arc<RingContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let dim = r.u32()?;
        let contributors = read_ids(&mut r)?;
        let c1s = read_rings(&mut r, ctx)?;
        r.finish()?;
        Ok(Self {
            dim,
            contributors,
            c1s,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SelectCoeffs {
    pub r: u64,
    pub selected: Vec<u16>,
}

impl SelectCoeffs {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u64(self.r);
        write_ids(&mut w, &self.selected);
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let out = Self {
            r: r.u64()?,
            selected: read_ids(&mut r)?,
        };
        r.finish()?;
        Ok(out)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DecShare {
    pub hs: Vec<RingElement>,
}

impl DecShare {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        write_rings(&mut w, &self.hs);
        w.finish()
    }

    pub fn decode(ctx: &Arc<RingContext>, bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let hs = read_rings(&mut r, ctx)?;
        r.finish()?;
        Ok(Self { hs })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RoundStatus {
    Completed(Vec<i64>),
    Aborted(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RoundResult {
    pub dim: u32,
    pub contributors: Vec<u16>,
    pub status: RoundStatus,
}

impl RoundResult {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u32(self.dim);
        write_ids(&mut w, &self.contributors);
        match &self.status {
            RoundStatus::Completed(values) => {
                w.u8(0).u32(values.len() as u32);
                for &v in values {
                    w.i64(v);
                }
            }
            RoundStatus::Aborted(reason) => {
                w.u8(1).bytes(reason.as_bytes());
            }
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let dim = r.u32()?;
        let contributors = read_ids(&mut r)?;
        let status = match r.u8()? {
            0 => {
                let count = r.count(8)?;
                RoundStatus::Completed((0..count).map(|_| r.i64()).collect::<Result<_>>()?)
            }
            1 => RoundStatus::Aborted(String::from_utf8_lossy(r.bytes()?).into_owned()),
            s => return Err(Error::Decode(format!("unknown round status {s}"))),
        };
        r.finish()?;
        Ok(Self {
            dim,
            contributors,
            status,
        })
    }
}

/// Sent to each helper: where the new user sits and the helper's column of
/// reconstruction weights `[r_a, r_{a,1}, ..., r_{a,k-1}]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NewUserReq {
    pub new_id: u16,
    pub x_new: u64,
    pub transport_key: [u8; 32],
    pub column: Vec<u64>,
}

impl NewUserReq {
    pub fn encode(&self) -> Vec<u8> {
        let mut w = Writer::new();
        w.u16(self.new_id)
            .u64(self.x_new)
            .raw(&self.transport_key)
            .u32(self.column.len() as u32);
        for &c in &self.column {
            w.u64(c);
        }
        w.finish()
    }

    pub fn decode(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let new_id = r.u16()?;
        let x_new = r.u64()?;
        let transport_key = r.array()?;
        let count = r.count(8)?;
        let column = (0..count).map(|_| r.u64()).collect::<Result<_>>()?;
        r.finish()?;
        Ok(Self {
            new_id,
            x_new,
            transport_key,
            column,
        })
    }
}
