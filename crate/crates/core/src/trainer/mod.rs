//! Federated logistic regression over the secure aggregation pipeline.
//!
//! Per round each available client computes its full-batch gradient, adds
//! its error-feedback residual, sketches, quantizes and encrypts. The server
//! sums, has `k` selected clients decrypt, then expands the integer
//! aggregate and divides by the number of contributors.

mod codec;
mod data;

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

pub use codec::{Compressor, RoundCodec};
pub use data::{accuracy, local_gradient, logistic_loss, DataConfig, Dataset, Samples};

use crate::bfv::{max_smudging_bound, validate_params};
use crate::compression::{rlc_delta, ErrorFeedbackState, PhiSpec, Quantizer, RlcMode};
use crate::error::{Error, Result};
use crate::protocol::session::exact_sum;
use crate::protocol::{RoundAvailability, Session, SessionConfig};
use crate::ring::{RingParams, Q60};

/// Where the integer messages get summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Backend {
    /// Threshold BFV through the simulated protocol.
    Secure,
    /// Plain integer sums under the same availability and threshold rule.
    Plain,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TrainConfig {
    pub clients: usize,
    pub threshold: usize,
    pub rounds: u32,
    pub data: DataConfig,
    /// `r = d/s`; the sketch has `round(d/r)` rows.
    pub ratio: f64,
    /// Expected nonzeros per column of `Φ`.
    pub alpha: f64,
    pub gamma: f64,
    pub quantizer: Quantizer,
    pub dropout: f64,
    pub seed: u64,
    pub compressor: Compressor,
    pub error_feedback: bool,
    pub params: RingParams,
    pub backend: Backend,
    /// Stop at the first aborted round instead of carrying on.
    pub halt_on_abort: bool,
    /// Keep `w` after every round.
    pub record_weights: bool,
}

/// Ring parameters sized for the trainer: 128 slots, a 60-bit modulus and
/// `p = 2^30`, with smudging taking half the leftover budget.
pub fn desk_params(clients: usize, threshold: usize) -> RingParams {
    let params = RingParams::new(128, Q60, 1 << 30).expect("static parameters are valid");
    let smudging = max_smudging_bound(&params, clients, threshold, 2);
    params.with_smudging(smudging)
}

impl TrainConfig {
    /// The desk-scale defaults: 2,000 features, 100 samples per client,
    /// `r = 5`, `α = 0.1`, `γ = 0.1`, scale and clip `10³`, contracting RLC
    /// with error feedback.
    pub fn desk(clients: usize, threshold: usize, seed: u64) -> Self {
        Self {
            clients,
            threshold,
            rounds: 300,
            data: DataConfig {
                clients,
                samples_per_client: 100,
                test_samples: 1000,
                dim: 2000,
                separation: 3.0,
                seed,
            },
            ratio: 5.0,
            alpha: 0.1,
            gamma: 0.1,
            quantizer: Quantizer { scale: 1e3, clip: 1e3 },
            dropout: 0.5,
            seed,
            compressor: Compressor::Rlc(RlcMode::Contract),
            error_feedback: true,
            params: desk_params(clients, threshold),
            backend: Backend::Secure,
            halt_on_abort: false,
            record_weights: false,
        }
    }

    pub fn dim(&self) -> usize {
        self.data.dim
    }

    pub fn sketch_rows(&self) -> usize {
        let d = self.dim();
        ((d as f64 / self.ratio).round() as usize).clamp(1, d)
    }

    pub fn phi_spec(&self, t: u32) -> Result<PhiSpec> {
        PhiSpec::with_alpha(self.seed, t, self.sketch_rows(), self.dim(), self.alpha)
    }

    pub fn check(&self) -> Result<()> {
        if self.data.clients != self.clients {
            return Err(Error::Config(format!(
                "data has {} client splits for {} clients",
                self.data.clients, self.clients
            )));
        }
        if !(self.ratio >= 1.0) {
            return Err(Error::Config(format!("ratio must be at least 1, got {}", self.ratio)));
        }
        if !(self.gamma > 0.0 && self.gamma.is_finite()) {
            return Err(Error::Config(format!("step size must be positive, got {}", self.gamma)));
        }
        Quantizer::new(self.quantizer.scale, self.quantizer.clip)?;
        if self.compressor.uses_sketch() {
            self.phi_spec(0)?;
        }
        self.quantizer.check_capacity(&self.params, self.clients)?;
        if self.backend == Backend::Secure {
            validate_params(&self.params, self.clients, self.threshold, 0.0).into_result()?;
        } else if self.threshold == 0 || self.threshold > self.clients {
            return Err(Error::Threshold {
                k: self.threshold,
                n: self.clients,
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RoundMetrics {
    pub round: u32,
    pub loss: f64,
    pub acc: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub t_encrypt: Duration,
    pub t_decrypt: Duration,
    pub t_compress: Duration,
    pub t_gradient: Duration,
    /// Wall time of the round, excluding the loss and accuracy evaluation.
    pub elapsed: Duration,
    pub completed: bool,
    pub contributors: usize,
    /// Decrypted aggregate equals the plaintext sum of contributed messages.
    pub exact: Option<bool>,
}

#[derive(Debug, Clone, Serialize)]
pub struct TrainSummary {
    pub rounds: usize,
    pub completed_rounds: usize,
    pub aborted_rounds: usize,
    pub all_exact: bool,
    pub initial_loss: f64,
    pub final_loss: f64,
    pub final_acc: f64,
    pub mean_round_ms: f64,
    pub setup_ms: f64,
    pub bytes_up: u64,
    pub bytes_down: u64,
    pub dim: usize,
    pub sketch_rows: usize,
    pub ratio: f64,
    pub alpha: f64,
    pub compressor: Compressor,
    pub error_feedback: bool,
    /// Contraction coefficient of the contracting RLC, when in use.
    pub delta: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TrainReport {
    pub config: TrainConfig,
    pub setup_elapsed: Duration,
    pub initial_loss: f64,
    pub rounds: Vec<RoundMetrics>,
    pub weights: Vec<f64>,
    /// `w` after each round when `record_weights` is set.
    pub history: Vec<Vec<f64>>,
    /// Each client's error-feedback residual norm after each round, also
    /// only with `record_weights`.
    pub residual_norms: Vec<Vec<f64>>,
}

fn ms(d: Duration) -> f64 {
    d.as_secs_f64() * 1e3
}

impl TrainReport {
    pub fn final_acc(&self) -> f64 {
        self.rounds.last().map_or(0.0, |r| r.acc)
    }

    pub fn mean_round(&self) -> Duration {
        let n = self.rounds.len().max(1) as u32;
        self.rounds.iter().map(|r| r.elapsed).sum::<Duration>() / n
    }

    pub fn summary(&self) -> TrainSummary {
        let cfg = &self.config;
        let completed = self.rounds.iter().filter(|r| r.completed).count();
        TrainSummary {
            rounds: self.rounds.len(),
            completed_rounds: completed,
            aborted_rounds: self.rounds.len() - completed,
            all_exact: self.rounds.iter().all(|r| r.exact != Some(false)),
            initial_loss: self.initial_loss,
            final_loss: self.rounds.last().map_or(self.initial_loss, |r| r.loss),
            final_acc: self.final_acc(),
            mean_round_ms: ms(self.mean_round()),
            setup_ms: ms(self.setup_elapsed),
            bytes_up: self.rounds.iter().map(|r| r.bytes_up).sum(),
            bytes_down: self.rounds.iter().map(|r| r.bytes_down).sum(),
            dim: cfg.dim(),
            sketch_rows: cfg.sketch_rows(),
            ratio: cfg.ratio,
            alpha: cfg.alpha,
            compressor: cfg.compressor,
            error_feedback: cfg.error_feedback,
            delta: match cfg.compressor {
                Compressor::Rlc(RlcMode::Contract) => cfg.phi_spec(0).ok().map(|s| rlc_delta(&s)),
                _ => None,
            },
        }
    }

    /// One line per round. With `timings` off every duration is written as
    /// zero so that equal seeds give byte-identical files.
    pub fn csv(&self, timings: bool) -> String {
        let mut out = String::from("round,loss,acc,bytes_up,bytes_down,t_encrypt_ms,t_decrypt_ms,t_compress_ms\n");
        let t = |d: Duration| if timings { ms(d) } else { 0.0 };
        for r in &self.rounds {
            let _ = writeln!(
                out,
                "{},{:.6},{:.4},{},{},{:.3},{:.3},{:.3}",
                r.round,
                r.loss,
                r.acc,
                r.bytes_up,
                r.bytes_down,
                t(r.t_encrypt),
                t(r.t_decrypt),
                t(r.t_compress)
            );
        }
        out
    }
}

/// Averaged over all clients' training data.
pub fn training_loss(w: &[f64], data: &Dataset) -> f64 {
    data.clients.iter().map(|c| logistic_loss(w, c)).sum::<f64>() / data.clients.len() as f64
}

struct Aggregate {
    values: Option<Vec<i64>>,
    contributors: Vec<u16>,
    bytes_up: u64,
    bytes_down: u64,
    t_encrypt: Duration,
    t_decrypt: Duration,
}

enum Summer {
    Secure(Box<Session>),
    Plain { threshold: usize },
}

impl Summer {
    fn sum(&mut self, t: u32, inputs: &BTreeMap<u16, Vec<i64>>, avail: &RoundAvailability, dim: usize) -> Result<Aggregate> {
        match self {
            Summer::Secure(session) => {
                let r = session.run_round(t, inputs, avail)?;
                Ok(Aggregate {
                    values: r.values,
                    contributors: r.contributors,
                    bytes_up: r.bytes_up,
                    bytes_down: r.bytes_down,
                    t_encrypt: r.encrypt_time,
                    t_decrypt: r.decrypt_share_time + r.server_time,
                })
            }
            Summer::Plain { threshold } => {
                let contributors: Vec<u16> = inputs.keys().copied().filter(|id| avail.online.contains(id)).collect();
                let values = (contributors.len() >= *threshold).then(|| exact_sum(inputs, &contributors, dim));
                Ok(Aggregate {
                    values,
                    contributors,
                    bytes_up: 0,
                    bytes_down: 0,
                    t_encrypt: Duration::ZERO,
                    t_decrypt: Duration::ZERO,
                })
            }
        }
    }
}

/// Run the training loop described by `cfg`.
pub fn train(cfg: &TrainConfig) -> Result<TrainReport> {
    cfg.check()?;
    let data = Dataset::generate(&cfg.data)?;
    let d = cfg.dim();
    let ids: Vec<u16> = (0..cfg.clients as u16).collect();

    let setup_start = Instant::now();
    let mut summer = match cfg.backend {
        Backend::Secure => {
            let mut session = Session::new(SessionConfig::new(cfg.params.clone(), cfg.clients, cfg.threshold, cfg.seed))?;
            session.setup()?;
            Summer::Secure(Box::new(session))
        }
        Backend::Plain => Summer::Plain {
            threshold: cfg.threshold,
        },
    };
    let setup_elapsed = setup_start.elapsed();

    let mut w = vec![0.0; d];
    let mut ef: Vec<ErrorFeedbackState> = ids.iter().map(|_| ErrorFeedbackState::new(d, cfg.gamma)).collect();
    let initial_loss = training_loss(&w, &data);
    let mut rounds = Vec::with_capacity(cfg.rounds as usize);
    let mut history = Vec::new();
    let mut residual_norms = Vec::new();

    for t in 1..=cfg.rounds {
        let start = Instant::now();
        let avail = RoundAvailability::bernoulli(ids.iter().copied(), cfg.dropout, cfg.seed, t);

        let c0 = Instant::now();
        let spec = if cfg.compressor.uses_sketch() {
            Some(cfg.phi_spec(t)?)
        } else {
            None
        };
        let codec = RoundCodec::new(cfg.compressor, spec.as_ref(), d, cfg.quantizer)?;
        let mut t_compress = c0.elapsed();
        let mut t_gradient = Duration::ZERO;

        let mut inputs = BTreeMap::new();
        let mut pending = BTreeMap::new();
        for &id in &avail.online {
            let g0 = Instant::now();
            let g = local_gradient(&w, &data.clients[id as usize])?;
            t_gradient += g0.elapsed();
            let c0 = Instant::now();
            let p = ef[id as usize].compensate(&g)?;
            let q = codec.encode(&p)?;
            let emitted = if cfg.error_feedback {
                Some(codec.expand(&q)?)
            } else {
                None
            };
            t_compress += c0.elapsed();
            inputs.insert(id, q);
            pending.insert(id, (p, emitted));
        }

        let agg = summer.sum(t, &inputs, &avail, codec.message_len())?;
        let completed = agg.values.is_some();
        let mut exact = None;
        if let Some(values) = &agg.values {
            exact = Some(*values == exact_sum(&inputs, &agg.contributors, codec.message_len()));
            let c0 = Instant::now();
            let update = codec.expand(values)?;
            let n = agg.contributors.len() as f64;
            for (wj, uj) in w.iter_mut().zip(&update) {
                *wj -= uj / n;
            }
            for id in &agg.contributors {
                if let Some((p, Some(emitted))) = pending.get(id) {
                    ef[*id as usize].absorb(p, emitted)?;
                }
            }
            t_compress += c0.elapsed();
        }
        let elapsed = start.elapsed();

        if cfg.record_weights {
            history.push(w.clone());
            residual_norms.push(ef.iter().map(|e| e.e.iter().map(|v| v * v).sum::<f64>().sqrt()).collect());
        }
        rounds.push(RoundMetrics {
            round: t,
            loss: training_loss(&w, &data),
            acc: accuracy(&w, &data.test),
            bytes_up: agg.bytes_up,
            bytes_down: agg.bytes_down,
            t_encrypt: agg.t_encrypt,
            t_decrypt: agg.t_decrypt,
            t_compress,
            t_gradient,
            elapsed,
            completed,
            contributors: agg.contributors.len(),
            exact,
        });
        if !completed && cfg.halt_on_abort {
            log::warn!("halting after aborted round {t}");
            break;
        }
    }

    Ok(TrainReport {
        config: cfg.clone(),
        setup_elapsed,
        initial_loss,
        rounds,
        weights: w,
        history,
        residual_norms,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small(backend: Backend) -> TrainConfig {
        let mut cfg = TrainConfig::desk(4, 2, 3);
        cfg.data.dim = 60;
        cfg.data.samples_per_client = 30;
        cfg.data.test_samples = 200;
        cfg.rounds = 25;
        cfg.dropout = 0.25;
        cfg.backend = backend;
        cfg.params = RingParams::new(64, Q60, 1 << 30).unwrap().with_smudging(1 << 20);
        cfg
    }

    #[test]
    fn secure_and_plain_trajectories_agree_exactly() {
        let a = train(&small(Backend::Secure)).unwrap();
        let b = train(&small(Backend::Plain)).unwrap();
        assert_eq!(a.weights, b.weights);
        assert!(a.summary().all_exact);
        assert!(a.rounds.iter().any(|r| r.completed));
        assert!(a.rounds.iter().all(|r| !r.completed || r.exact == Some(true)));
    }

    #[test]
    fn loss_goes_down() {
        let r = train(&small(Backend::Plain)).unwrap();
        assert!(r.summary().final_loss < r.initial_loss);
    }

    #[test]
    fn rejects_bad_configs() {
        let mut cfg = small(Backend::Plain);
        cfg.quantizer = Quantizer { scale: 1e6, clip: 1e3 };
        assert!(matches!(train(&cfg), Err(Error::Capacity(_))));
        let mut cfg = small(Backend::Secure);
        cfg.params = cfg.params.with_smudging(1 << 40);
        assert!(matches!(train(&cfg), Err(Error::Validation(_))));
        let mut cfg = small(Backend::Plain);
        cfg.ratio = 0.5;
        assert!(train(&cfg).is_err());
        let mut cfg = small(Backend::Plain);
        cfg.data.clients = 3;
        assert!(train(&cfg).is_err());
    }

    #[test]
    fn csv_layout() {
        let mut cfg = small(Backend::Plain);
        cfg.rounds = 2;
        let csv = train(&cfg).unwrap().csv(false);
        let lines: Vec<&str> = csv.lines().collect();
        assert_eq!(lines.len(), 3);
        assert_eq!(lines[0], "round,loss,acc,bytes_up,bytes_down,t_encrypt_ms,t_decrypt_ms,t_compress_ms");
        assert!(lines[1].starts_with("1,"));
        assert!(lines[1].ends_with(",0.000,0.000,0.000"));
    }
}
