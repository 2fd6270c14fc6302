//! Running the state machines over real sockets.

use std::net::ToSocketAddrs;
use std::time::{Duration, Instant};

use crate::error::{Error, Result};
use crate::transport::tcp::{Hub, HubEvent, Link};
use crate::transport::{Envelope, MsgType, SERVER_ID};

use super::client::Client;
use super::server::{MessageCounters, RoundRecord, Server, ServerPhase};

#[derive(Debug, Clone)]
pub struct TcpServerOptions {
    pub rounds: u32,
    /// Silence after which non-responsive clients are marked inactive.
    pub round_timeout: Duration,
    /// How long to wait for all clients to register and finish setup.
    pub setup_timeout: Duration,
}

impl Default for TcpServerOptions {
    fn default() -> Self {
        Self {
            rounds: 1,
            round_timeout: Duration::from_secs(5),
            setup_timeout: Duration::from_secs(30),
        }
    }
}

pub struct TcpServerOutcome {
    pub rounds: Vec<RoundRecord>,
    pub counters: MessageCounters,
    /// Originated envelopes as observed at the server.
    pub transcript: Vec<Envelope>,
}

fn dispatch(hub: &Hub, server: &Server, outs: Vec<Envelope>, transcript: &mut Vec<Envelope>) {
    for env in outs {
        if env.sender == SERVER_ID {
            transcript.push(env.clone());
            if env.receiver == SERVER_ID {
                for id in server.roster() {
                    hub.send(id, &env);
                }
                continue;
            }
        }
        hub.send(env.receiver, &env);
    }
}

/// Drive `server` until `opts.rounds` rounds have finished.
pub fn run_tcp_server(mut server: Server, hub: &Hub, opts: &TcpServerOptions) -> Result<TcpServerOutcome> {
    let mut transcript = Vec::new();
    let mut last_progress = Instant::now();
    let mut current = 0u32;
    loop {
        if server.phase() == &ServerPhase::Ready {
            if current == 0 {
                current = 1;
                server.open_round(1);
            }
            while server.round(current).is_some_and(|r| r.phase.is_final()) {
                if current >= opts.rounds {
                    let rounds = server.rounds().values().cloned().collect();
                    return Ok(TcpServerOutcome {
                        rounds,
                        counters: server.counters().clone(),
                        transcript,
                    });
                }
                current += 1;
                server.open_round(current);
            }
        }
        match hub.recv_timeout(Duration::from_millis(20)) {
            Some(HubEvent::Message(env)) => {
                transcript.push(env.clone());
                match server.handle(&env) {
                    Ok(outs) => dispatch(hub, &server, outs, &mut transcript),
                    Err(e @ Error::SetupAborted(_)) => return Err(e),
                    Err(e) => log::warn!("dropping {:?} from {}: {e}", env.msg_type, env.sender),
                }
                last_progress = Instant::now();
            }
            Some(HubEvent::Disconnected(id)) => log::info!("client {id} disconnected"),
            None => {
                let limit = if server.phase() == &ServerPhase::Ready {
                    opts.round_timeout
                } else {
                    opts.setup_timeout
                };
                if last_progress.elapsed() >= limit {
                    log::info!("timeout after {limit:?} of silence");
                    let outs = server.on_timeout()?;
                    dispatch(hub, &server, outs, &mut transcript);
                    last_progress = Instant::now();
                }
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct TcpClientOptions {
    pub rounds: u32,
    pub connect_patience: Duration,
}

/// Register, take part in setup, then submit an input for each round once
/// the previous round's result arrives. `input(t)` returning `None` models
/// the client being unavailable in round `t`.
pub fn run_tcp_client<A, F>(client: &mut Client, addr: A, opts: &TcpClientOptions, mut input: F) -> Result<()>
where
    A: ToSocketAddrs,
    F: FnMut(u32) -> Option<Vec<i64>>,
{
    let mut link = Link::connect(addr, opts.connect_patience)?;
    link.send(&client.register())?;
    let mut cursor = 1u32;
    loop {
        if client.is_ready() {
            while cursor <= opts.rounds && (cursor == 1 || client.result(cursor - 1).is_some()) {
                if let Some(g) = input(cursor) {
                    link.send(&client.submit(cursor, &g)?)?;
                }
                cursor += 1;
            }
        }
        if opts.rounds == 0 && client.is_ready() || client.result(opts.rounds).is_some() {
            return Ok(());
        }
        let env = link.recv()?;
        match client.handle(&env) {
            Ok(outs) => {
                for out in outs {
                    link.send(&out)?;
                }
            }
            Err(e) if env.msg_type == MsgType::SetupParams => return Err(e),
            Err(e) => log::warn!("client {} ignoring {:?}: {e}", client.id(), env.msg_type),
        }
    }
}
