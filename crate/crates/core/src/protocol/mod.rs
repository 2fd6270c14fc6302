//! Setup, per-round aggregation with threshold decryption, new-user share
//! issuance and the per-round-setup baseline.

pub mod asa;
pub mod client;
pub mod messages;
pub mod net;
pub mod ops;
pub mod server;
pub mod session;

pub use asa::{run_asa_baseline, run_rsa_ops, BaselineConfig, BaselineReport};
pub use client::{Client, ClientPhase};
pub use messages::{RoundResult, RoundStatus};
pub use ops::*;
pub use server::{MessageCounters, RoundCounters, RoundPhase, RoundRecord, Server, ServerConfig, ServerPhase};
pub use session::{
    exact_sum, run_simulation, synthetic_input, RoundAvailability, RoundReport, Session, SessionConfig, SimulationConfig,
    SimulationReport,
};
