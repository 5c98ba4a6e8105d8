use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use pqkmeans::clustering::{IterationRecord, MemoryEstimate};
use pqkmeans::io::{
    read_binary_codes, read_codebook, read_codes, write_binary_codes, write_codes, write_fvecs,
    write_labels, write_results, write_trace_csv, ResultsDocument, RESULTS_FORMAT, RESULTS_VERSION,
};
use pqkmeans::seed::{derive_seed, stream};
use pqkmeans::{bkmeans_fit, build_distance_tables, estimate_memory, kmeans_fit, PqKMeans};
use serde::Serialize;

use crate::{input, Global, Method, Update};

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    #[arg(long, value_enum, default_value_t = Method::Pqkmeans)]
    method: Method,
    /// PQKC codes (pqkmeans), `.fvecs`/`.bvecs` vectors (kmeans) or PQKB
    /// binary codes (bkmeans).
    #[arg(long)]
    input: PathBuf,
    /// PQCB codebook the codes were encoded with (pqkmeans only).
    #[arg(long)]
    codebook: Option<PathBuf>,
    /// Number of clusters.
    #[arg(long)]
    k: usize,
    #[arg(long, default_value_t = pqkmeans::clustering::DEFAULT_MAX_ITERATIONS)]
    max_iters: usize,
    /// Center update rule (pqkmeans only).
    #[arg(long, value_enum, default_value_t = Update::Sparse)]
    update: Update,
    /// Output prefix: writes PREFIX.json, PREFIX.labels, PREFIX.trace.csv and
    /// PREFIX.centers.{pqkc,fvecs,pqkb}.
    #[arg(long)]
    out: PathBuf,
}

/// Everything a method run produces, independent of the code format.
struct Outcome {
    n: usize,
    labels: Vec<u32>,
    trace: Vec<IterationRecord>,
    iterations_run: usize,
    converged: bool,
    strategy: Option<String>,
    update: Option<String>,
    memory: MemoryEstimate,
    centers_file: PathBuf,
}

impl Args {
    fn validate(&self) -> Result<()> {
        if self.k == 0 {
            bail!("--k must be positive");
        }
        if self.max_iters == 0 {
            bail!("--max-iters must be positive");
        }
        match (self.method, &self.codebook) {
            (Method::Pqkmeans, None) => bail!("--method pqkmeans requires --codebook"),
            (Method::Kmeans | Method::Bkmeans, Some(_)) => {
                bail!("--codebook only applies to --method pqkmeans")
            }
            _ => Ok(()),
        }
    }
}

pub fn run(args: &Args, global: &Global) -> Result<()> {
    args.validate()?;
    let config = global.config("cluster", args)?;
    let seed = derive_seed(global.seed, stream::INIT);
    let outcome = match args.method {
        Method::Pqkmeans => run_pq(args, seed)?,
        Method::Kmeans => run_kmeans(args, seed)?,
        Method::Bkmeans => run_binary(args, seed)?,
    };

    let labels_file = input::sidecar(&args.out, ".labels");
    write_labels(&labels_file, &outcome.labels)
        .with_context(|| format!("writing {}", labels_file.display()))?;
    let trace_file = input::sidecar(&args.out, ".trace.csv");
    write_trace(&trace_file, &outcome.trace)?;

    let doc = ResultsDocument {
        format: RESULTS_FORMAT.into(),
        version: RESULTS_VERSION,
        method: args.method.name().into(),
        config,
        n: outcome.n,
        k: args.k,
        iterations_run: outcome.iterations_run,
        converged: outcome.converged,
        final_objective: outcome.trace.last().map_or(f64::NAN, |r| r.objective),
        strategy: outcome.strategy,
        update: outcome.update,
        memory: Some(outcome.memory),
        trace: outcome.trace,
        centers_file: outcome.centers_file.display().to_string(),
        labels_file: labels_file.display().to_string(),
    };
    let results_file = input::sidecar(&args.out, ".json");
    write_results(&results_file, &doc)
        .with_context(|| format!("writing {}", results_file.display()))?;
    println!(
        "{} N={} K={}: {} iterations ({}), final objective {}, results in {}",
        doc.method,
        doc.n,
        doc.k,
        doc.iterations_run,
        if doc.converged {
            "converged"
        } else {
            "iteration limit"
        },
        doc.final_objective,
        results_file.display()
    );
    Ok(())
}

fn write_trace(path: &Path, trace: &[IterationRecord]) -> Result<()> {
    let mut w =
        BufWriter::new(File::create(path).with_context(|| format!("creating {}", path.display()))?);
    write_trace_csv(&mut w, trace).with_context(|| format!("writing {}", path.display()))?;
    w.flush()?;
    Ok(())
}

fn run_pq(args: &Args, seed: u64) -> Result<Outcome> {
    let codebook_path = args.codebook.as_ref().expect("validated");
    let codebook = read_codebook(codebook_path)
        .with_context(|| format!("reading codebook {}", codebook_path.display()))?;
    let codes = read_codes(&args.input)
        .with_context(|| format!("reading codes {}", args.input.display()))?;
    let (m, l) = (codebook.num_subspaces(), codebook.num_codewords());
    if codes.num_subspaces() != m || codes.num_codewords() != l {
        bail!(
            "codebook {} (M={m}, L={l}) is incompatible with codes {} (M={}, L={})",
            codebook_path.display(),
            args.input.display(),
            codes.num_subspaces(),
            codes.num_codewords()
        );
    }
    let tables = build_distance_tables(&codebook);
    let result = PqKMeans::new(args.k)
        .max_iterations(args.max_iters)
        .seed(seed)
        .update(args.update.into())
        .fit(&codes, &tables)
        .with_context(|| format!("clustering {}", args.input.display()))?;
    let centers_file = input::sidecar(&args.out, ".centers.pqkc");
    write_codes(&centers_file, &result.centers)
        .with_context(|| format!("writing {}", centers_file.display()))?;
    let update: pqkmeans::UpdateMethod = args.update.into();
    Ok(Outcome {
        n: codes.len(),
        labels: result.labels,
        iterations_run: result.iterations_run,
        converged: result.converged,
        trace: result.trace,
        strategy: Some(result.strategy),
        update: Some(update.name().into()),
        memory: estimate_memory(codes.len() as u64, args.k as u64, m as u64, l as u64),
        centers_file,
    })
}

fn run_kmeans(args: &Args, seed: u64) -> Result<Outcome> {
    let data = input::read_vectors(&args.input, None)?;
    let result = kmeans_fit(&data, args.k, args.max_iters, seed)
        .with_context(|| format!("clustering {}", args.input.display()))?;
    let centers_file = input::sidecar(&args.out, ".centers.fvecs");
    write_fvecs(&centers_file, &result.centers)
        .with_context(|| format!("writing {}", centers_file.display()))?;
    Ok(Outcome {
        n: data.len(),
        labels: result.labels,
        iterations_run: result.iterations_run,
        converged: result.converged,
        trace: result.trace,
        strategy: None,
        update: None,
        memory: MemoryEstimate::raw(data.len() as u64, args.k as u64, data.dim() as u64),
        centers_file,
    })
}

fn run_binary(args: &Args, seed: u64) -> Result<Outcome> {
    let codes = read_binary_codes(&args.input)
        .with_context(|| format!("reading binary codes {}", args.input.display()))?;
    let result = bkmeans_fit(&codes, args.k, args.max_iters, seed)
        .with_context(|| format!("clustering {}", args.input.display()))?;
    let centers_file = input::sidecar(&args.out, ".centers.pqkb");
    write_binary_codes(&centers_file, &result.centers)
        .with_context(|| format!("writing {}", centers_file.display()))?;
    Ok(Outcome {
        n: codes.len(),
        labels: result.labels,
        iterations_run: result.iterations_run,
        converged: result.converged,
        trace: result.trace,
        strategy: None,
        update: None,
        memory: MemoryEstimate::binary(codes.len() as u64, args.k as u64, codes.bits() as u64),
        centers_file,
    })
}
