use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pqkmeans::io::read_labels;
use pqkmeans::{original_space_error, rand_index};
use serde::Serialize;

use crate::input;

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Original vectors (`.fvecs` or `.bvecs`).
    #[arg(long)]
    data: PathBuf,
    /// Labels to score (raw little-endian u32).
    #[arg(long)]
    labels: PathBuf,
    /// Reference labeling; adds the Rand index to the report.
    #[arg(long)]
    reference: Option<PathBuf>,
    /// Write the JSON report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Serialize)]
struct Report {
    data: String,
    labels: String,
    n: usize,
    clusters: usize,
    original_space_error: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    reference: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    rand_index: Option<f64>,
}

fn load_labels(path: &Path, n: usize, data: &Path) -> Result<Vec<u32>> {
    let labels = read_labels(path).with_context(|| format!("reading labels {}", path.display()))?;
    if labels.len() != n {
        bail!(
            "{} holds {} labels but {} holds {n} vectors",
            path.display(),
            labels.len(),
            data.display()
        );
    }
    Ok(labels)
}

pub fn run(args: &Args) -> Result<()> {
    let data = input::read_vectors(&args.data, None)?;
    let labels = load_labels(&args.labels, data.len(), &args.data)?;
    let error = original_space_error(&data, &labels).with_context(|| {
        format!(
            "scoring {} on {}",
            args.labels.display(),
            args.data.display()
        )
    })?;
    let rand = match &args.reference {
        Some(path) => {
            let reference = load_labels(path, data.len(), &args.data)?;
            Some(rand_index(&labels, &reference)?)
        }
        None => None,
    };
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let report = Report {
        data: args.data.display().to_string(),
        labels: args.labels.display().to_string(),
        n: data.len(),
        clusters: distinct.len(),
        original_space_error: error,
        reference: args.reference.as_ref().map(|p| p.display().to_string()),
        rand_index: rand,
    };
    input::write_json(args.out.as_deref(), &serde_json::to_value(&report)?)
}
