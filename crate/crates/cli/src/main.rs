// SPDX-License-Identifier: Apache-2.0

//! `rtlsafe`: IP-preserving RTL optimization from the command line.
//!
//! Exit codes: 0 success, 1 domain failure, 2 configuration or usage error.

mod commands;
mod config;
mod runtime;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rtlsafe_core::synthesis::Attribute;

use crate::config::{BackendKind, RunConfig};

#[derive(Parser, Debug)]
#[command(name = "rtlsafe", version, about = "Optimize Verilog for power or delay without sending proprietary code off-site")]
struct Cli {
    /// TOML run config. Flags override its values.
    #[arg(long, short, global = true)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Root seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Use the extraction prompts exactly as published, including the
    /// power wording inside the delay prompt.
    #[arg(long, global = true)]
    verbatim_paper_prompts: bool,
    /// Allow a Local endpoint at a non-loopback, non-private address.
    #[arg(long, global = true)]
    allow_remote_local: bool,
    /// Repeat for more log output.
    #[arg(long, short, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone, Default)]
pub struct Corpora {
    #[arg(long)]
    pub proprietary: Option<PathBuf>,
    #[arg(long)]
    pub draft: Option<PathBuf>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Parse and classify both codebases; write manifests.
    Ingest(Corpora),
    /// Print category and bit width for every module under a path.
    Classify {
        path: PathBuf,
    },
    /// Measure both codebases and mine contrastive pairs.
    MinePairs {
        #[command(flatten)]
        corpora: Corpora,
        #[arg(long)]
        threshold: Option<f64>,
        #[arg(long)]
        orient_by_winner: bool,
        #[arg(long)]
        backend: Option<BackendKind>,
    },
    /// Write mined pairs as dataset JSONL.
    EmitDataset {
        #[command(flatten)]
        corpora: Corpora,
        /// Pair JSONL; defaults to `<out>/pairs.jsonl`.
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Distill principles from K sampled pairs on the local endpoint.
    ExtractPrinciples {
        #[command(flatten)]
        corpora: Corpora,
        #[arg(long)]
        attribute: Option<Attribute>,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Replay logged audits and join cloud calls to their clearances.
    Audit {
        #[command(flatten)]
        corpora: Corpora,
        #[arg(long)]
        targets: Option<PathBuf>,
        /// Log directory; defaults to `<out>/logs`.
        #[arg(long)]
        logs: Option<PathBuf>,
    },
    /// Rewrite targets on the cloud endpoint under a principle set.
    Optimize {
        #[arg(long)]
        proprietary: Option<PathBuf>,
        #[arg(long)]
        attribute: Option<Attribute>,
        /// Principle set JSON from extract-principles.
        #[arg(long)]
        principles: PathBuf,
        /// Target file or directory.
        #[arg(long)]
        target: Option<PathBuf>,
        #[arg(long)]
        backend: Option<BackendKind>,
        /// Cloud base URL, or `scripted`.
        #[arg(long)]
        cloud_endpoint: Option<String>,
        /// Print the audited prompt and verdict; send nothing.
        #[arg(long)]
        dry_run: bool,
    },
    /// Summarize optimization records.
    Evaluate {
        /// Record JSONL; defaults to `<out>/optimizations/<attribute>.jsonl`.
        #[arg(long)]
        records: Option<PathBuf>,
        #[arg(long)]
        attribute: Option<Attribute>,
    },
    /// Run the extract, optimize and summarize loop over a grid of K.
    SweepK {
        #[command(flatten)]
        corpora: Corpora,
        #[arg(long)]
        targets: Option<PathBuf>,
        #[arg(long)]
        attribute: Option<Attribute>,
        #[arg(long, value_delimiter = ',')]
        ks: Option<Vec<usize>>,
        #[arg(long, value_delimiter = ',')]
        seeds: Option<Vec<u64>>,
        /// Use built-in scripted endpoints regardless of the config.
        #[arg(long)]
        scripted: bool,
        #[arg(long)]
        pairs: Option<PathBuf>,
    },
    /// Render markdown and CSV reports from everything under `<out>`.
    Report {
        #[arg(long, default_value_t = 3)]
        case_studies: usize,
    },
    /// Sample pairs for manual review.
    Inspect {
        #[arg(long)]
        pairs: Option<PathBuf>,
        #[arg(long, default_value_t = 10)]
        n: usize,
        #[command(flatten)]
        corpora: Corpora,
    },
}

/// A failed command and the exit code it maps to.
#[derive(Debug)]
pub enum Failure {
    /// Exit 1.
    Domain(anyhow::Error),
    /// Exit 2.
    Usage(anyhow::Error),
}

impl From<anyhow::Error> for Failure {
    fn from(e: anyhow::Error) -> Self {
        Failure::Domain(e)
    }
}

pub fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure::Usage(e.into())
}

pub type CmdResult = Result<(), Failure>;

fn resolve(cli: &Cli) -> Result<RunConfig, Failure> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p).map_err(usage)?,
        None => RunConfig::default(),
    };
    if let Some(o) = &cli.out {
        cfg.paths.out = Some(o.clone());
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if cli.verbatim_paper_prompts {
        cfg.experiment.prompt_style = rtlsafe_core::principles::PromptStyle::Verbatim;
    }
    if cli.allow_remote_local {
        cfg.endpoints.local.endpoint.allow_remote_local = true;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> CmdResult {
    let mut cfg = resolve(&cli)?;
    commands::apply_overrides(&mut cfg, &cli.command);
    cfg.validate().map_err(usage)?;
    let ctx = runtime::Ctx::new(cfg).map_err(usage)?;
    commands::dispatch(&ctx, cli.command)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Domain(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
        Err(Failure::Usage(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
