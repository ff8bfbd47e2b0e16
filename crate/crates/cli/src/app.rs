use std::path::PathBuf;

use clap::{Parser, Subcommand};
use dprecourse_core::PublishMethod;

use crate::config::PipelineConfig;
use crate::error::{CliError, Result};
use crate::pipeline::{self, Layout, QueryInput};

#[derive(Debug, Parser)]
#[command(name = "dprecourse", version, about = "Differentially private graph-based recourse")]
pub struct Cli {
    /// Pipeline config (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides the config's seed.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Overrides the config's output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Scale/encode the raw CSVs, split, and sample.
    Prepare,
    /// Train the DP logistic regression.
    TrainModel,
    /// Publish DP points from the graph sample.
    PublishPoints,
    /// Build the recourse graph over the published points.
    BuildGraph,
    /// Answer one recourse query.
    Query {
        /// Raw feature values, e.g. `age=41,education-num=10,...`.
        #[arg(long, conflicts_with = "row")]
        instance: Option<String>,
        /// Row of the prepared query set.
        #[arg(long)]
        row: Option<usize>,
        /// Number of alternative paths.
        #[arg(long)]
        k: Option<usize>,
        /// Print JSON instead of a table.
        #[arg(long)]
        json: bool,
    },
    /// Run all unfavorable test queries and score them.
    Evaluate,
    /// Compose the privacy ledger and summarize the run.
    Report,
    /// Every stage in order.
    All,
    /// Evaluate the clustering publisher against record perturbation.
    Compare,
}

/// Loads the config and applies command-line overrides.
pub fn resolve_config(cli: &Cli) -> Result<PipelineConfig> {
    let path = cli
        .config
        .as_ref()
        .ok_or_else(|| CliError::Config("--config is required".into()))?;
    let mut cfg = PipelineConfig::load(path)?;
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    Ok(cfg)
}

/// Runs a command and returns what it prints on success.
pub fn run(cli: &Cli) -> Result<String> {
    let mut cfg = resolve_config(cli)?;
    if let Command::Query { k: Some(k), .. } = &cli.command {
        cfg.recourse.k = *k;
    }
    let layout = Layout::new(cfg.out.clone());
    pipeline::begin(&cfg, &layout)?;
    Ok(match &cli.command {
        Command::Prepare => pretty(&pipeline::prepare(&cfg, &layout)?),
        Command::TrainModel => pretty(&pipeline::train_model(&cfg, &layout)?),
        Command::PublishPoints => pretty(&pipeline::publish_points(&cfg, &layout)?),
        Command::BuildGraph => pretty(&pipeline::build_graph_stage(&cfg, &layout)?),
        Command::Query {
            instance, row, json: as_json, ..
        } => {
            let input = match (instance, row) {
                (Some(text), _) => QueryInput::Instance(text.clone()),
                (None, Some(i)) => QueryInput::Row(*i),
                (None, None) => {
                    return Err(CliError::Config("query needs --instance or --row".into()))
                }
            };
            let reports = pipeline::query(&cfg, &layout, &input)?;
            if *as_json {
                pretty(&reports)
            } else {
                reports
                    .iter()
                    .enumerate()
                    .map(|(i, r)| format!("path {}\n{}", i + 1, pipeline::render_path(r)))
                    .collect::<Vec<_>>()
                    .join("\n")
            }
        }
        Command::Evaluate => pretty(&pipeline::evaluate(&cfg, &layout)?),
        Command::Report => pipeline::render_report(&pipeline::report(&cfg, &layout)?),
        Command::All => pipeline::render_report(&pipeline::run_all(&cfg, &layout)?),
        Command::Compare => pipeline::render_comparison(&pipeline::compare(
            &cfg,
            &layout,
            &[PublishMethod::DpCluster, PublishMethod::RecordPerturbation],
        )?),
    })
}

fn pretty<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("summaries serialize")
}
