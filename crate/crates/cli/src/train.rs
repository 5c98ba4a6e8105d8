use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use pqkmeans::io::write_codebook;
use pqkmeans::seed::{derive_seed, stream};
use pqkmeans::{decode, encode_all, train_codebook, Codebook, Dataset};
use serde::Serialize;

use crate::{input, Global};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Training vectors (`.fvecs` or `.bvecs`).
    #[arg(long)]
    input: PathBuf,
    /// Number of subspaces.
    #[arg(long)]
    m: usize,
    /// Codewords per subspace.
    #[arg(long, default_value_t = 256)]
    l: usize,
    /// Lloyd iterations per subspace.
    #[arg(long, default_value_t = 20)]
    iterations: usize,
    /// Train on at most this many leading vectors.
    #[arg(long)]
    train_size: Option<usize>,
    /// Output PQCB file.
    #[arg(long)]
    out: PathBuf,
}

/// Mean squared reconstruction error of `data` under `codebook`.
pub fn quantization_error(codebook: &Codebook, data: &Dataset) -> Result<f64> {
    let codes = encode_all(codebook, data)?;
    let mut total = 0.0f64;
    for (row, code) in data.rows().zip(codes.iter()) {
        let approx = decode(codebook, code)?;
        total += row
            .iter()
            .zip(&approx)
            .map(|(&a, &b)| (a as f64 - b as f64).powi(2))
            .sum::<f64>();
    }
    Ok(total / data.len() as f64)
}

/// Checks a PQ layout up front so the diagnostic names the input file.
pub fn check_layout(input: &std::path::Path, dim: usize, m: usize, l: usize) -> Result<()> {
    if m == 0 || !dim.is_multiple_of(m) {
        bail!(
            "{}: dimension D={dim} is not divisible by M={m}",
            input.display()
        );
    }
    if !(2..=pqkmeans::pq::MAX_CODEWORDS).contains(&l) {
        bail!("L={l} must lie in 2..={}", pqkmeans::pq::MAX_CODEWORDS);
    }
    Ok(())
}

pub fn train(
    input: &std::path::Path,
    data: &Dataset,
    m: usize,
    l: usize,
    iterations: usize,
    seed: u64,
) -> Result<Codebook> {
    check_layout(input, data.dim(), m, l)?;
    train_codebook(data, m, l, iterations, derive_seed(seed, stream::CODEBOOK))
        .with_context(|| format!("training a codebook on {}", input.display()))
}

pub fn run(args: &Args, global: &Global) -> Result<()> {
    let data = input::read_vectors(&args.input, args.train_size)?;
    let codebook = train(
        &args.input,
        &data,
        args.m,
        args.l,
        args.iterations,
        global.seed,
    )?;
    write_codebook(&args.out, &codebook)
        .with_context(|| format!("writing {}", args.out.display()))?;
    let cost = quantization_error(&codebook, &data)?;
    println!(
        "codebook D={} M={} L={} trained on {} vectors, mean squared quantization error {cost:.6}, written to {}",
        codebook.dim(),
        codebook.num_subspaces(),
        codebook.num_codewords(),
        data.len(),
        args.out.display()
    );
    Ok(())
}
