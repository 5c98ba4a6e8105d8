//! `pqkmeans`: train a PQ codebook, encode vectors, cluster the codes,
//! evaluate the result against the original vectors and benchmark sweeps.

mod bench;
mod cluster;
mod encode;
mod eval;
mod input;
mod synth;
mod train;

use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Debug, Parser)]
#[command(
    name = "pqkmeans",
    version,
    about = "Clustering in the product-quantized domain"
)]
struct Cli {
    /// Worker threads; 0 uses every available core.
    #[arg(long, global = true, default_value_t = 0)]
    threads: usize,

    /// Base seed; every stage derives its own stream from it.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a Gaussian-mixture dataset with ground-truth labels.
    Synth(synth::Args),
    /// Learn a PQ codebook from training vectors.
    TrainCodebook(train::Args),
    /// Encode vectors into PQ codes (or binary codes with --bits).
    Encode(encode::Args),
    /// Cluster codes or vectors and write results, labels, centers and a trace.
    Cluster(cluster::Args),
    /// Score a labeling against the original vectors.
    Eval(eval::Args),
    /// Run a method x parameter grid and emit one CSV row per run.
    Bench(bench::Args),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pqkmeans,
    Kmeans,
    Bkmeans,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pqkmeans => "pqkmeans",
            Method::Kmeans => "kmeans",
            Method::Bkmeans => "bkmeans",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Update {
    Sparse,
    Naive,
}

impl From<Update> for pqkmeans::UpdateMethod {
    fn from(u: Update) -> Self {
        match u {
            Update::Sparse => pqkmeans::UpdateMethod::SparseVoting,
            Update::Naive => pqkmeans::UpdateMethod::Naive,
        }
    }
}

/// Settings shared by every subcommand, echoed into structured outputs.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct Global {
    pub seed: u64,
    pub threads: usize,
}

impl Global {
    /// Wraps a subcommand's arguments into the config object stored in results.
    pub fn config<T: Serialize>(&self, command: &str, args: &T) -> Result<serde_json::Value> {
        Ok(serde_json::json!({
            "command": command,
            "seed": self.seed,
            "threads": self.threads,
            "args": serde_json::to_value(args)?,
        }))
    }
}

fn run(cli: Cli) -> Result<()> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .context("building the worker thread pool")?;
    let global = Global {
        seed: cli.seed,
        threads: pool.current_num_threads(),
    };
    pool.install(|| match &cli.command {
        Command::Synth(args) => synth::run(args, &global),
        Command::TrainCodebook(args) => train::run(args, &global),
        Command::Encode(args) => encode::run(args, &global),
        Command::Cluster(args) => cluster::run(args, &global),
        Command::Eval(args) => eval::run(args),
        Command::Bench(args) => bench::run(args, &global),
    })
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::FAILURE
        }
    }
}
