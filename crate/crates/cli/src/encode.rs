use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::ArgGroup;
use pqkmeans::io::{read_codebook, write_binary_codes, CodeWriter};
use pqkmeans::seed::{derive_seed, stream};
use pqkmeans::{encode_all, Binarizer, BinaryCodes};
use serde::Serialize;

use crate::{input, Global};

#[derive(Debug, clap::Args, Serialize)]
#[group(skip)]
#[command(group(ArgGroup::new("target").required(true).args(["codebook", "bits"])))]
pub struct Args {
    /// Vectors to encode (`.fvecs` or `.bvecs`).
    #[arg(long)]
    input: PathBuf,
    /// PQCB codebook; output is a PQKC code file.
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Binarize with a random rotation to this many bits instead; output is a
    /// PQKB file. Must be a multiple of 8.
    #[arg(long)]
    bits: Option<usize>,
    /// Output file.
    #[arg(long)]
    out: PathBuf,
    /// Vectors held in memory at once.
    #[arg(long, default_value_t = 65_536)]
    chunk: usize,
}

pub fn run(args: &Args, global: &Global) -> Result<()> {
    if args.chunk == 0 {
        bail!("--chunk must be positive");
    }
    let n = match (&args.codebook, args.bits) {
        (Some(cb), _) => encode_pq(args, cb)?,
        (None, Some(bits)) => encode_binary(args, bits, global.seed)?,
        (None, None) => unreachable!("clap requires --codebook or --bits"),
    };
    println!(
        "encoded {n} vectors from {} into {}",
        args.input.display(),
        args.out.display()
    );
    Ok(())
}

fn encode_pq(args: &Args, codebook_path: &PathBuf) -> Result<usize> {
    let codebook = read_codebook(codebook_path)
        .with_context(|| format!("reading codebook {}", codebook_path.display()))?;
    let mut reader = input::open_vectors(&args.input)?;
    let mut writer = CodeWriter::create(
        &args.out,
        codebook.num_subspaces(),
        codebook.num_codewords(),
    )
    .with_context(|| format!("creating {}", args.out.display()))?;
    let mut n = 0;
    while let Some(chunk) = reader
        .next_chunk(args.chunk)
        .with_context(|| format!("reading {}", args.input.display()))?
    {
        let codes = encode_all(&codebook, &chunk).with_context(|| {
            format!(
                "encoding {} (vector {} onward) with codebook {}",
                args.input.display(),
                n,
                codebook_path.display()
            )
        })?;
        writer
            .write(&codes)
            .with_context(|| format!("writing {}", args.out.display()))?;
        n += chunk.len();
    }
    writer
        .finish()
        .with_context(|| format!("finishing {}", args.out.display()))?;
    Ok(n)
}

fn encode_binary(args: &Args, bits: usize, seed: u64) -> Result<usize> {
    if bits == 0 || !bits.is_multiple_of(8) {
        bail!("--bits {bits} must be a positive multiple of 8");
    }
    let mut reader = input::open_vectors(&args.input)?;
    let mut binarizer: Option<Binarizer> = None;
    let mut codes = BinaryCodes::new(bits)?;
    while let Some(chunk) = reader
        .next_chunk(args.chunk)
        .with_context(|| format!("reading {}", args.input.display()))?
    {
        if binarizer.is_none() {
            let b = Binarizer::random(chunk.dim(), bits, derive_seed(seed, stream::BINARIZER))
                .with_context(|| {
                    format!(
                        "building a {bits}-bit binarizer for {}",
                        args.input.display()
                    )
                })?;
            binarizer = Some(b);
        }
        let part = binarizer.as_ref().unwrap().binarize_all(&chunk)?;
        for i in 0..part.len() {
            codes.push(part.code(i))?;
        }
    }
    write_binary_codes(&args.out, &codes)
        .with_context(|| format!("writing {}", args.out.display()))?;
    Ok(codes.len())
}
