mod commands;
mod config;
mod settings;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use config::parse_number;
use secagg_core::Error;

#[derive(Parser, Debug)]
#[command(name = "secagg", version, about = "Dropout-tolerant secure aggregation with threshold BFV")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Ring parameters; each falls back to the config file, then a default.
#[derive(Args, Debug, Clone, Default)]
pub struct RingArgs {
    /// key = value settings file; flags override its entries
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Polynomial degree n
    #[arg(long = "ring-degree", value_parser = parse_number::<usize>)]
    pub n: Option<usize>,
    /// Ciphertext modulus q (prime)
    #[arg(long = "modulus", value_parser = parse_number::<u64>)]
    pub q: Option<u64>,
    /// Plaintext modulus p
    #[arg(long = "plain-modulus", value_parser = parse_number::<u64>)]
    pub p: Option<u64>,
    #[arg(long)]
    pub sigma: Option<f64>,
    #[arg(long = "error-bound", value_parser = parse_number::<u64>)]
    pub error_bound: Option<u64>,
    /// Smudging bound; by default half of what the correctness budget allows
    #[arg(long = "smudging-bound", value_parser = parse_number::<u64>)]
    pub smudging_bound: Option<u64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct ProtocolArgs {
    #[arg(long)]
    pub clients: Option<usize>,
    #[arg(long)]
    pub threshold: Option<usize>,
    #[arg(long)]
    pub rounds: Option<u32>,
    #[arg(long, value_parser = parse_number::<usize>)]
    pub dim: Option<usize>,
    /// Independent per-round, per-client dropout probability
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long, env = "RSA_AGG_SEED")]
    pub seed: Option<u64>,
    /// Synthetic inputs are drawn from [-bound, bound]
    #[arg(long = "input-bound", value_parser = parse_number::<i64>)]
    pub input_bound: Option<i64>,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    /// Persistent (N, k) threshold keys
    Rsa,
    /// Fresh k-party key setup every round
    Asa,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum Switch {
    On,
    Off,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum CompressorArg {
    /// Contracting random linear compressor
    Rlc,
    /// Random linear compressor with the unbiased 1/α scaling
    RlcUnbiased,
    /// Sign-quantized random linear compressor
    Srlc,
    /// No sketch
    None,
}

#[derive(ValueEnum, Debug, Clone, Copy, PartialEq, Eq)]
pub enum BackendArg {
    Secure,
    Plain,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// End-to-end run over the in-process network simulator
    Simulate {
        #[command(flatten)]
        ring: RingArgs,
        #[command(flatten)]
        proto: ProtocolArgs,
        #[arg(long, value_enum, default_value = "rsa")]
        mode: Mode,
        /// Write the per-round CSV here instead of stdout
        #[arg(long)]
        out: Option<PathBuf>,
        /// `off` writes zero for every timing column
        #[arg(long, value_enum, default_value = "on")]
        timings: Switch,
        /// Exit with status 3 when more rounds than this abort
        #[arg(long = "max-aborts")]
        max_aborts: Option<usize>,
    },
    /// Serve the protocol over TCP
    Server {
        #[arg(long)]
        listen: String,
        #[command(flatten)]
        ring: RingArgs,
        #[command(flatten)]
        proto: ProtocolArgs,
        /// Milliseconds of silence before absent clients are dropped from a round
        #[arg(long = "round-timeout-ms")]
        round_timeout_ms: Option<u64>,
        #[arg(long = "setup-timeout-ms")]
        setup_timeout_ms: Option<u64>,
    },
    /// Join a TCP server as one client, submitting synthetic inputs
    Client {
        #[arg(long)]
        connect: String,
        #[arg(long)]
        id: u16,
        #[command(flatten)]
        ring: RingArgs,
        #[command(flatten)]
        proto: ProtocolArgs,
        /// Rounds (comma separated) in which this client stays silent
        #[arg(long = "skip-rounds", value_delimiter = ',')]
        skip_rounds: Vec<u32>,
    },
    /// Federated logistic regression through the full pipeline
    Train {
        #[command(flatten)]
        ring: RingArgs,
        #[command(flatten)]
        proto: ProtocolArgs,
        /// Compression ratio r = d/s
        #[arg(long)]
        ratio: Option<f64>,
        /// Expected nonzeros per column of the sketch matrix
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        gamma: Option<f64>,
        #[arg(long, value_parser = parse_number::<f64>)]
        scale: Option<f64>,
        #[arg(long, value_parser = parse_number::<f64>)]
        clip: Option<f64>,
        #[arg(long, value_enum)]
        compressor: Option<CompressorArg>,
        /// Disable error feedback
        #[arg(long = "no-error-feedback")]
        no_error_feedback: bool,
        #[arg(long, value_enum)]
        backend: Option<BackendArg>,
        #[arg(long = "samples-per-client")]
        samples_per_client: Option<usize>,
        #[arg(long)]
        out: Option<PathBuf>,
        /// JSON summary destination; printed to stderr when absent
        #[arg(long)]
        summary: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "on")]
        timings: Switch,
    },
    /// Monte-Carlo checks of the sketch properties and compressor contracts
    BenchCompress {
        #[arg(long, value_parser = parse_number::<usize>)]
        dim: usize,
        #[arg(long)]
        sketch: usize,
        #[arg(long = "p-entry")]
        p_entry: f64,
        #[arg(long, default_value_t = 10_000)]
        samples: u32,
        #[arg(long, env = "RSA_AGG_SEED", default_value_t = 1)]
        seed: u64,
    },
    /// Check the correctness inequality and report the smudging ratio
    Validate {
        #[command(flatten)]
        ring: RingArgs,
        #[command(flatten)]
        proto: ProtocolArgs,
    },
    /// Add a client after setup and decrypt with a set that includes it
    Adduser {
        /// Evaluation point of the new client (client id + 1)
        #[arg(long)]
        point: u64,
        #[command(flatten)]
        ring: RingArgs,
        #[command(flatten)]
        proto: ProtocolArgs,
    },
}

/// 1 usage, 2 parameter validation, 3 protocol abort.
fn exit_code(err: &anyhow::Error) -> u8 {
    match err.downcast_ref::<Error>() {
        Some(
            Error::Validation(_)
            | Error::Capacity(_)
            | Error::InvalidParams(_)
            | Error::Threshold { .. }
            | Error::SmudgingTooLarge { .. }
            | Error::Config(_),
        ) => 2,
        Some(Error::SetupAborted(_) | Error::RoundAborted { .. }) => 3,
        _ if err.downcast_ref::<commands::Aborted>().is_some() => 3,
        _ if err.downcast_ref::<commands::ChecksFailed>().is_some() => 2,
        _ => 1,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let result = match cli.command {
        Command::Simulate {
            ring,
            proto,
            mode,
            out,
            timings,
            max_aborts,
        } => commands::simulate(&ring, &proto, mode, out.as_deref(), timings == Switch::On, max_aborts),
        Command::Server {
            listen,
            ring,
            proto,
            round_timeout_ms,
            setup_timeout_ms,
        } => commands::server(&listen, &ring, &proto, round_timeout_ms, setup_timeout_ms),
        Command::Client {
            connect,
            id,
            ring,
            proto,
            skip_rounds,
        } => commands::client(&connect, id, &ring, &proto, &skip_rounds),
        Command::Train {
            ring,
            proto,
            ratio,
            alpha,
            gamma,
            scale,
            clip,
            compressor,
            no_error_feedback,
            backend,
            samples_per_client,
            out,
            summary,
            timings,
        } => commands::train(commands::TrainArgs {
            ring,
            proto,
            ratio,
            alpha,
            gamma,
            scale,
            clip,
            compressor,
            error_feedback: !no_error_feedback,
            backend,
            samples_per_client,
            out,
            summary,
            timings: timings == Switch::On,
        }),
        Command::BenchCompress {
            dim,
            sketch,
            p_entry,
            samples,
            seed,
        } => commands::bench_compress(dim, sketch, p_entry, samples, seed),
        Command::Validate { ring, proto } => commands::validate(&ring, &proto),
        Command::Adduser { point, ring, proto } => commands::adduser(point, &ring, &proto),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
