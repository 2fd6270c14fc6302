use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use secagg_core::bfv::{validate_params, DEFAULT_SMUDGING_BITS};
use secagg_core::compression::{run_suite, Quantizer, RlcMode, Side, SuiteConfig};
use secagg_core::protocol::net::{run_tcp_client, run_tcp_server, TcpClientOptions, TcpServerOptions};
use secagg_core::protocol::session::{exact_sum, synthetic_input};
use secagg_core::protocol::{
    run_asa_baseline, run_simulation, BaselineConfig, Client, RoundAvailability, RoundStatus, Server, ServerConfig,
    Session, SessionConfig, SimulationConfig,
};
use secagg_core::transport::tcp::Hub;
use secagg_core::trainer::{self, Backend, Compressor, TrainConfig};
use secagg_core::Error;
use thiserror::Error;

use crate::settings::{resolve, Defaults, Resolved};
use crate::{BackendArg, CompressorArg, Mode, ProtocolArgs, RingArgs};

#[derive(Debug, Error)]
#[error("{0}")]
pub struct Aborted(pub String);

#[derive(Debug, Error)]
#[error("{0} check(s) failed")]
pub struct ChecksFailed(pub usize);

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => std::fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            let mut stdout = std::io::stdout().lock();
            stdout.write_all(text.as_bytes())?;
            Ok(stdout.flush()?)
        }
    }
}

fn ms(d: Duration, on: bool) -> f64 {
    if on {
        d.as_secs_f64() * 1e3
    } else {
        0.0
    }
}

fn join_ids(ids: &[u16]) -> String {
    ids.iter().map(u16::to_string).collect::<Vec<_>>().join(";")
}

fn check_setup(r: &Resolved) -> Result<()> {
    validate_params(&r.params, r.clients, r.threshold, 0.0).into_result()?;
    let cap = secagg_core::bfv::aggregate_capacity(&r.params, r.clients);
    if r.input_bound > cap {
        return Err(Error::Capacity(format!(
            "input bound {} with {} clients exceeds p/2 (per-client limit {cap})",
            r.input_bound, r.clients
        ))
        .into());
    }
    Ok(())
}

pub fn simulate(
    ring: &RingArgs,
    proto: &ProtocolArgs,
    mode: Mode,
    out: Option<&Path>,
    timings: bool,
    max_aborts: Option<usize>,
) -> Result<()> {
    let r = resolve(ring, proto, Defaults::PROTOCOL)?;
    check_setup(&r)?;
    let mut csv = String::from("round,mode,completed,contributors,selected,messages,exact,t_round_ms\n");
    let (mut completed, mut exact, mut total) = (0usize, 0usize, Duration::ZERO);
    let started = Instant::now();
    let label = match mode {
        Mode::Rsa => "rsa",
        Mode::Asa => "asa",
    };
    let setup_messages = match mode {
        Mode::Rsa => {
            let mut session = SessionConfig::new(r.params.clone(), r.clients, r.threshold, r.seed);
            session.retain_round_data = false;
            let report = run_simulation(&SimulationConfig {
                session,
                rounds: r.rounds,
                dim: r.dim,
                dropout: r.dropout,
                input_bound: r.input_bound,
            })?;
            total += report.setup.elapsed;
            for (round, ok) in report.rounds.iter().zip(&report.exact) {
                completed += round.completed as usize;
                exact += *ok as usize;
                total += round.elapsed;
                let _ = writeln!(
                    csv,
                    "{},{label},{},{},{},{},{},{:.3}",
                    round.round,
                    round.completed,
                    round.contributors.len(),
                    join_ids(&round.selected),
                    round.messages.total(),
                    ok,
                    ms(round.elapsed, timings)
                );
            }
            report.setup_messages
        }
        Mode::Asa => {
            let report = run_asa_baseline(&BaselineConfig {
                params: r.params.clone(),
                clients: r.clients,
                threshold: r.threshold,
                rounds: r.rounds,
                dim: r.dim,
                dropout: r.dropout,
                input_bound: r.input_bound,
                seed: r.seed,
            })?;
            total = report.total_elapsed();
            for round in &report.rounds {
                completed += round.completed as usize;
                exact += round.exact as usize;
                let _ = writeln!(
                    csv,
                    "{},{label},{},{},{},{},{},{:.3}",
                    round.round,
                    round.completed,
                    round.contributors.len(),
                    join_ids(&round.selected),
                    round.messages,
                    round.exact,
                    ms(round.elapsed, timings)
                );
            }
            report.setup_messages
        }
    };
    emit(out, &csv)?;
    let aborted = r.rounds as usize - completed;
    eprintln!(
        "{label}: {completed}/{} rounds completed, {exact} exact, {aborted} aborted, {setup_messages} setup messages, {:.1} ms protocol time, {:.1} ms wall",
        r.rounds,
        total.as_secs_f64() * 1e3,
        started.elapsed().as_secs_f64() * 1e3
    );
    if exact != completed {
        return Err(Aborted(format!("{} completed rounds decrypted incorrectly", completed - exact)).into());
    }
    if let Some(max) = max_aborts {
        if aborted > max {
            return Err(Aborted(format!("{aborted} rounds aborted, more than the allowed {max}")).into());
        }
    }
    Ok(())
}

pub fn server(
    listen: &str,
    ring: &RingArgs,
    proto: &ProtocolArgs,
    round_timeout_ms: Option<u64>,
    setup_timeout_ms: Option<u64>,
) -> Result<()> {
    let r = resolve(ring, proto, Defaults::PROTOCOL)?;
    check_setup(&r)?;
    let round_timeout = r.file.pick(round_timeout_ms, "round_timeout_ms", 5_000)?;
    let setup_timeout = r.file.pick(setup_timeout_ms, "setup_timeout_ms", 60_000)?;
    let hub = Hub::bind(listen)?;
    eprintln!("listening on {}", hub.local_addr());
    let server = Server::new(ServerConfig {
        params: r.params.clone(),
        clients: r.clients,
        threshold: r.threshold,
        seed: r.seed,
        retain_round_data: false,
    })?;
    let outcome = run_tcp_server(
        server,
        &hub,
        &TcpServerOptions {
            rounds: r.rounds,
            round_timeout: Duration::from_millis(round_timeout),
            setup_timeout: Duration::from_millis(setup_timeout),
        },
    )?;
    let mut csv = String::from("round,completed,contributors,selected,messages,exact\n");
    for rec in &outcome.rounds {
        // inputs are the synthetic ones, so the server can check its own result
        let inputs: BTreeMap<u16, Vec<i64>> = rec
            .contributors
            .iter()
            .map(|&id| (id, synthetic_input(r.seed, id, rec.round, r.dim, r.input_bound)))
            .collect();
        let exact = rec
            .result
            .as_ref()
            .is_some_and(|v| *v == exact_sum(&inputs, &rec.contributors, r.dim));
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            rec.round,
            rec.result.is_some(),
            rec.contributors.len(),
            join_ids(&rec.selected),
            outcome.counters.round(rec.round).total(),
            exact
        );
    }
    emit(None, &csv)?;
    eprintln!("setup messages: {}", outcome.counters.setup_total());
    Ok(())
}

pub fn client(connect: &str, id: u16, ring: &RingArgs, proto: &ProtocolArgs, skip: &[u32]) -> Result<()> {
    let r = resolve(ring, proto, Defaults::PROTOCOL)?;
    check_setup(&r)?;
    let mut c = Client::new(id, r.params.clone(), r.seed)?;
    let (seed, dim, bound) = (r.seed, r.dim, r.input_bound);
    run_tcp_client(
        &mut c,
        connect,
        &TcpClientOptions {
            rounds: r.rounds,
            connect_patience: Duration::from_secs(10),
        },
        |t| (!skip.contains(&t)).then(|| synthetic_input(seed, id, t, dim, bound)),
    )?;
    let mut csv = String::from("round,status,contributors,checksum\n");
    for (t, res) in c.results() {
        let (status, checksum) = match &res.status {
            RoundStatus::Completed(v) => ("completed", v.iter().sum::<i64>()),
            RoundStatus::Aborted(_) => ("aborted", 0),
        };
        let _ = writeln!(csv, "{t},{status},{},{checksum}", res.contributors.len());
    }
    emit(None, &csv)
}

pub struct TrainArgs {
    pub ring: RingArgs,
    pub proto: ProtocolArgs,
    pub ratio: Option<f64>,
    pub alpha: Option<f64>,
    pub gamma: Option<f64>,
    pub scale: Option<f64>,
    pub clip: Option<f64>,
    pub compressor: Option<CompressorArg>,
    pub error_feedback: bool,
    pub backend: Option<BackendArg>,
    pub samples_per_client: Option<usize>,
    pub out: Option<PathBuf>,
    pub summary: Option<PathBuf>,
    pub timings: bool,
}

pub fn train(a: TrainArgs) -> Result<()> {
    let r = resolve(
        &a.ring,
        &a.proto,
        Defaults {
            n: 128,
            p: 1 << 30,
            clients: 8,
            threshold: 4,
            rounds: 300,
            dim: 2000,
            dropout: 0.5,
        },
    )?;
    let f = &r.file;
    let mut cfg = TrainConfig::desk(r.clients, r.threshold, r.seed);
    cfg.rounds = r.rounds;
    cfg.dropout = r.dropout;
    cfg.params = r.params.clone();
    cfg.data.dim = r.dim;
    cfg.data.samples_per_client = f.pick(a.samples_per_client, "samples_per_client", cfg.data.samples_per_client)?;
    cfg.ratio = f.pick(a.ratio, "ratio", cfg.ratio)?;
    cfg.alpha = f.pick(a.alpha, "alpha", cfg.alpha)?;
    cfg.gamma = f.pick(a.gamma, "gamma", cfg.gamma)?;
    cfg.quantizer = Quantizer::new(
        f.pick(a.scale, "scale", cfg.quantizer.scale)?,
        f.pick(a.clip, "clip", cfg.quantizer.clip)?,
    )?;
    cfg.compressor = match a.compressor {
        None | Some(CompressorArg::Rlc) => Compressor::Rlc(RlcMode::Contract),
        Some(CompressorArg::RlcUnbiased) => Compressor::Rlc(RlcMode::Unbiased),
        Some(CompressorArg::Srlc) => Compressor::Srlc,
        Some(CompressorArg::None) => Compressor::Identity,
    };
    cfg.error_feedback = a.error_feedback;
    cfg.backend = match a.backend {
        None | Some(BackendArg::Secure) => Backend::Secure,
        Some(BackendArg::Plain) => Backend::Plain,
    };
    let report = trainer::train(&cfg)?;
    emit(a.out.as_deref(), &report.csv(a.timings))?;
    let mut summary = report.summary();
    if !a.timings {
        summary.mean_round_ms = 0.0;
        summary.setup_ms = 0.0;
    }
    let json = serde_json::to_string_pretty(&summary)?;
    match &a.summary {
        Some(path) => std::fs::write(path, json + "\n").with_context(|| format!("writing {}", path.display()))?,
        None => eprintln!("{json}"),
    }
    if !summary.all_exact {
        return Err(Aborted("a decrypted aggregate differed from the plaintext sum".into()).into());
    }
    Ok(())
}

pub fn bench_compress(dim: usize, sketch: usize, p_entry: f64, samples: u32, seed: u64) -> Result<()> {
    let mut cfg = SuiteConfig::new(dim, sketch, p_entry);
    cfg.samples = samples;
    cfg.seed = seed;
    let started = Instant::now();
    let checks = run_suite(&cfg)?;
    let mut text = String::new();
    let _ = writeln!(
        text,
        "d={dim} s={sketch} p_entry={p_entry} alpha={} r={} samples={samples}",
        2.0 * sketch as f64 * p_entry,
        dim as f64 / sketch as f64
    );
    for c in &checks {
        let rel = match c.side {
            Side::Equal => "==",
            Side::AtMost => "<=",
            Side::AtLeast => ">=",
        };
        let _ = writeln!(
            text,
            "{} {:<24} {:>14.6} {rel} {:<14.6} (se {:.6})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.estimate,
            c.target,
            c.se
        );
    }
    emit(None, &text)?;
    eprintln!("{} samples in {:.2} s", samples, started.elapsed().as_secs_f64());
    let failed = checks.iter().filter(|c| !c.passed).count();
    if failed > 0 {
        bail!(ChecksFailed(failed));
    }
    Ok(())
}

pub fn validate(ring: &RingArgs, proto: &ProtocolArgs) -> Result<()> {
    let r = resolve(ring, proto, Defaults::PROTOCOL)?;
    let report = validate_params(&r.params, r.clients, r.threshold, DEFAULT_SMUDGING_BITS);
    let json = serde_json::json!({
        "params": r.params,
        "report": report,
    });
    emit(None, &(serde_json::to_string_pretty(&json)? + "\n"))?;
    report.into_result()?;
    Ok(())
}

pub fn adduser(point: u64, ring: &RingArgs, proto: &ProtocolArgs) -> Result<()> {
    let r = resolve(
        ring,
        proto,
        Defaults {
            n: 2048,
            clients: 5,
            threshold: 3,
            rounds: 2,
            dim: 1000,
            ..Defaults::PROTOCOL
        },
    )?;
    check_setup(&r)?;
    let id = point
        .checked_sub(1)
        .and_then(|v| u16::try_from(v).ok())
        .filter(|&v| v as usize >= r.clients)
        .ok_or_else(|| Error::Config(format!("point {point} must be above the {} existing points", r.clients)))?;
    let mut session = Session::new(SessionConfig::new(r.params.clone(), r.clients, r.threshold, r.seed))?;
    session.setup()?;
    let inputs = |ids: &[u16], t: u32| -> BTreeMap<u16, Vec<i64>> {
        ids.iter()
            .map(|&i| (i, synthetic_input(r.seed, i, t, r.dim, r.input_bound)))
            .collect()
    };
    let ids = session.client_ids();
    let first = session.run_round(1, &inputs(&ids, 1), &RoundAvailability::all(ids.clone()))?;
    if !first.completed {
        return Err(Aborted(format!("round 1 aborted: {:?}", first.abort_reason)).into());
    }
    session.add_user(id)?;
    // the new client plus the k-1 highest original ids
    let mut online: Vec<u16> = ids[ids.len() + 1 - r.threshold..].to_vec();
    online.push(id);
    let all = session.client_ids();
    let inp = inputs(&all, 2);
    let second = session.run_round(2, &inp, &RoundAvailability::all(online.clone()))?;
    let correct = second
        .values
        .as_ref()
        .is_some_and(|v| *v == exact_sum(&inp, &second.contributors, r.dim));
    println!("new client {id} at point {point}; holders {}", join_ids(&session.server().holders().iter().copied().collect::<Vec<_>>()));
    println!(
        "round 2 with {}: completed={} selected={} exact={correct}",
        join_ids(&online),
        second.completed,
        join_ids(&second.selected)
    );
    if !correct {
        return Err(Aborted(format!("round 2 did not decrypt: {:?}", second.abort_reason)).into());
    }
    Ok(())
}
