//! The `sicf` command line: score, fuse, select and evaluate pseudolabels, one file-backed
//! step at a time.

pub mod commands;
pub mod config;
pub mod error;
pub mod manifest;
pub mod report;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use sicf_core::uncertainty::{BnnKind, PhiMethod};

use crate::commands::ValidateKind;
use crate::config::{Overrides, RunConfig};
use crate::error::CliResult;

#[derive(Debug, Parser)]
#[command(
    name = "sicf",
    version,
    about = "Pseudolabel quality scoring and selection"
)]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalArgs,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Args)]
pub struct GlobalArgs {
    /// Run configuration (TOML). Relative paths inside it are resolved against its directory.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory; also where later steps look for earlier artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub ratio: Option<f64>,
    #[arg(long, global = true)]
    pub alpha: Option<f64>,
    #[arg(long, global = true)]
    pub beta: Option<f64>,
    #[arg(long, global = true)]
    pub gamma: Option<f64>,
    /// Uncertainty reduction: mean, bnn or m_bnn.
    #[arg(long, global = true)]
    pub phi: Option<PhiMethod>,
    /// BNN quantity: predictive, aleatoric or epistemic.
    #[arg(long, global = true)]
    pub bnn_kind: Option<BnnKind>,
}

impl GlobalArgs {
    pub fn overrides(&self) -> Overrides {
        Overrides {
            out_dir: self.out.clone(),
            threads: self.threads,
            seed: self.seed,
            ratio: self.ratio,
            alpha: self.alpha,
            beta: self.beta,
            gamma: self.gamma,
            phi: self.phi,
            bnn_kind: self.bnn_kind,
        }
    }
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Score every dialogue's candidate set: scores.jsonl.
    Score,
    /// Fuse scores into ranks with the configured coefficients: ranks.jsonl.
    Fuse,
    /// Select the best-ranked ratio of dialogues: selection.jsonl.
    Select,
    /// Elimination curves of the fused ranking against the pseudo oracle: elim_report.json/.csv.
    EvalElim,
    /// Render elimination results as improved-ratio tables: ssds_report.jsonl/.csv.
    Report,
    /// Rank every coefficient triple of the search grid: grid.jsonl.
    GridSearch,
    /// Record every provider lookup of a scoring run as embeddings/tags/nli files.
    ExportProviders,
    /// Check a file against its schema.
    Validate {
        /// corpus, candidates, embeddings, tags, nli, scores, ranks, selection, matrices,
        /// elim-report, grid, ssds-report or manifest.
        kind: ValidateKind,
        path: PathBuf,
    },
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Score => "score",
            Command::Fuse => "fuse",
            Command::Select => "select",
            Command::EvalElim => "eval-elim",
            Command::Report => "report",
            Command::GridSearch => "grid-search",
            Command::ExportProviders => "export-providers",
            Command::Validate { .. } => "validate",
        }
    }
}

/// Runs one command and returns the line to print on success.
pub fn run(cli: &Cli) -> CliResult<String> {
    if let Command::Validate { kind, path } = &cli.command {
        return commands::validate(*kind, path);
    }
    let config = RunConfig::load(cli.global.config.as_deref(), &cli.global.overrides())?;
    match cli.command {
        Command::Score => commands::score(&config),
        Command::Fuse => commands::fuse(&config),
        Command::Select => commands::select(&config),
        Command::EvalElim => commands::eval_elim(&config),
        Command::Report => commands::report(&config),
        Command::GridSearch => commands::grid_search(&config),
        Command::ExportProviders => commands::export_providers(&config),
        Command::Validate { .. } => unreachable!("handled above"),
    }
}
