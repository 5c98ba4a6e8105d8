use std::path::PathBuf;

use anyhow::{Context, Result};
use pqkmeans::io::{generate_synthetic, write_fvecs, write_labels};
use pqkmeans::seed::{derive_seed, stream};
use serde::Serialize;

use crate::Global;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Number of points.
    #[arg(long)]
    n: usize,
    /// Dimensionality.
    #[arg(long)]
    dim: usize,
    /// Number of mixture components.
    #[arg(long)]
    clusters: usize,
    /// Standard deviation of every component.
    #[arg(long)]
    spread: f32,
    /// Output `.fvecs` file.
    #[arg(long)]
    out: PathBuf,
    /// Output file for the ground-truth labels (raw little-endian u32).
    #[arg(long)]
    labels: Option<PathBuf>,
}

pub fn run(args: &Args, global: &Global) -> Result<()> {
    let (data, truth) = generate_synthetic(
        args.n,
        args.dim,
        args.clusters,
        args.spread,
        derive_seed(global.seed, stream::SYNTH),
    )
    .context("generating synthetic data")?;
    write_fvecs(&args.out, &data).with_context(|| format!("writing {}", args.out.display()))?;
    if let Some(path) = &args.labels {
        write_labels(path, &truth).with_context(|| format!("writing {}", path.display()))?;
    }
    println!(
        "wrote {} points of dimension {} from {} components to {}",
        data.len(),
        data.dim(),
        args.clusters,
        args.out.display()
    );
    Ok(())
}
