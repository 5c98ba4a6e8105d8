use std::fmt::Write as _;
use std::path::PathBuf;
use std::time::Instant;

use anyhow::{bail, Context, Result};
use pqkmeans::clustering::MemoryEstimate;
use pqkmeans::pq::bits_per_index;
use pqkmeans::seed::{derive_seed, stream};
use pqkmeans::{
    bkmeans_fit, build_distance_tables, encode_all, estimate_memory, kmeans_fit,
    original_space_error, Binarizer, CodeSet, Dataset, DistanceTables, IterationRecord, PqKMeans,
};
use serde::Serialize;

use crate::{input, train, Global, Method, Update};

pub const BENCH_CSV_HEADER: &str =
    "method,update,n,d,k,m,l,bits,threads,seed,iterations,converged,\
error,assign_ms,update_ms,total_ms,mean_nnz,memory_bytes";

#[derive(Debug, clap::Args, Serialize)]
pub struct Args {
    /// Vectors to cluster (`.fvecs` or `.bvecs`); errors are measured on them.
    #[arg(long)]
    input: PathBuf,
    /// Methods to run at every grid point.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "pqkmeans")]
    methods: Vec<Method>,
    /// Cluster counts to sweep.
    #[arg(long, value_delimiter = ',', required = true)]
    ks: Vec<usize>,
    /// Subspace counts to sweep. Binary k-means uses the same bit budget,
    /// M * log2(L).
    #[arg(long, value_delimiter = ',', default_value = "4")]
    ms: Vec<usize>,
    /// Codewords per subspace.
    #[arg(long, default_value_t = 256)]
    l: usize,
    /// Center update rules to compare for pqkmeans.
    #[arg(long, value_enum, value_delimiter = ',', default_value = "sparse")]
    updates: Vec<Update>,
    #[arg(long, default_value_t = pqkmeans::clustering::DEFAULT_MAX_ITERATIONS)]
    max_iters: usize,
    /// Leading vectors used to train each codebook.
    #[arg(long, default_value_t = 10_000)]
    train_size: usize,
    /// Lloyd iterations per subspace during codebook training.
    #[arg(long, default_value_t = 20)]
    codebook_iters: usize,
    /// Write the CSV here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Default)]
struct Row {
    method: &'static str,
    update: &'static str,
    k: usize,
    m: Option<usize>,
    l: Option<usize>,
    bits: usize,
    iterations: usize,
    converged: bool,
    error: f64,
    assign_ms: f64,
    update_ms: f64,
    total_ms: f64,
    mean_nnz: Option<f64>,
    memory_bytes: u64,
}

/// Per-M artifacts shared by every K.
struct Encoded {
    m: usize,
    codes: CodeSet,
    tables: DistanceTables,
}

fn opt<T: ToString>(v: Option<T>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn timing(trace: &[IterationRecord]) -> (f64, f64) {
    (
        trace.iter().map(|r| r.assign_ms).sum(),
        trace.iter().map(|r| r.update_ms).sum(),
    )
}

impl Args {
    fn validate(&self) -> Result<()> {
        if self.ks.contains(&0) {
            bail!("--ks entries must be positive");
        }
        if self.ms.contains(&0) {
            bail!("--ms entries must be positive");
        }
        if self.methods.is_empty() || self.updates.is_empty() {
            bail!("--methods and --updates must not be empty");
        }
        if self.max_iters == 0 {
            bail!("--max-iters must be positive");
        }
        Ok(())
    }

    fn needs_codes(&self) -> bool {
        self.methods.iter().any(|&m| m != Method::Kmeans)
    }
}

pub fn run(args: &Args, global: &Global) -> Result<()> {
    args.validate()?;
    let data = input::read_vectors(&args.input, None)?;
    if args.methods.contains(&Method::Bkmeans) {
        for &m in &args.ms {
            let bits = m * bits_per_index(args.l);
            if bits > data.dim() {
                bail!(
                    "bkmeans at M={m}: {bits} bits exceed the dimension D={} of {}",
                    data.dim(),
                    args.input.display()
                );
            }
        }
    }
    let mut encoded = Vec::new();
    if args.needs_codes() {
        let train_rows: Vec<usize> = (0..data.len().min(args.train_size)).collect();
        let sample = data.select(&train_rows);
        for &m in &args.ms {
            let codebook = train::train(
                &args.input,
                &sample,
                m,
                args.l,
                args.codebook_iters,
                global.seed,
            )
            .with_context(|| format!("benchmark grid point M={m}"))?;
            let codes = encode_all(&codebook, &data)?;
            encoded.push(Encoded {
                m,
                codes,
                tables: build_distance_tables(&codebook),
            });
        }
    }

    let mut csv = String::new();
    writeln!(csv, "{BENCH_CSV_HEADER}")?;
    let seed = derive_seed(global.seed, stream::INIT);
    for &k in &args.ks {
        for &method in &args.methods {
            let rows = match method {
                Method::Kmeans => vec![run_kmeans(&data, k, args.max_iters, seed)?],
                Method::Pqkmeans => {
                    let mut rows = Vec::new();
                    for enc in &encoded {
                        for &update in &args.updates {
                            rows.push(run_pq(&data, enc, args.l, k, update, args.max_iters, seed)?);
                        }
                    }
                    rows
                }
                Method::Bkmeans => {
                    let mut rows = Vec::new();
                    for enc in &encoded {
                        let bits = enc.m * bits_per_index(args.l);
                        rows.push(run_binary(
                            &data,
                            bits,
                            k,
                            args.max_iters,
                            seed,
                            global.seed,
                        )?);
                    }
                    rows
                }
            };
            for row in rows {
                write_row(&mut csv, &row, &data, global)?;
            }
        }
    }
    match &args.out {
        Some(path) => {
            std::fs::write(path, csv).with_context(|| format!("writing {}", path.display()))
        }
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn write_row(csv: &mut String, r: &Row, data: &Dataset, global: &Global) -> Result<()> {
    writeln!(
        csv,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{:.3},{:.3},{:.3},{},{}",
        r.method,
        r.update,
        data.len(),
        data.dim(),
        r.k,
        opt(r.m),
        opt(r.l),
        r.bits,
        global.threads,
        global.seed,
        r.iterations,
        r.converged,
        r.error,
        r.assign_ms,
        r.update_ms,
        r.total_ms,
        opt(r.mean_nnz),
        r.memory_bytes
    )?;
    Ok(())
}

fn run_pq(
    data: &Dataset,
    enc: &Encoded,
    l: usize,
    k: usize,
    update: Update,
    max_iters: usize,
    seed: u64,
) -> Result<Row> {
    let method: pqkmeans::UpdateMethod = update.into();
    let start = Instant::now();
    let result = PqKMeans::new(k)
        .max_iterations(max_iters)
        .seed(seed)
        .update(method)
        .fit(&enc.codes, &enc.tables)
        .with_context(|| format!("pqkmeans run K={k} M={} update={}", enc.m, method.name()))?;
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let (assign_ms, update_ms) = timing(&result.trace);
    Ok(Row {
        method: "pqkmeans",
        update: method.name(),
        k,
        m: Some(enc.m),
        l: Some(l),
        bits: enc.m * bits_per_index(l),
        iterations: result.iterations_run,
        converged: result.converged,
        error: original_space_error(data, &result.labels)?,
        assign_ms,
        update_ms,
        total_ms,
        mean_nnz: result.mean_nnz(),
        memory_bytes: estimate_memory(data.len() as u64, k as u64, enc.m as u64, l as u64).total,
    })
}

fn run_kmeans(data: &Dataset, k: usize, max_iters: usize, seed: u64) -> Result<Row> {
    let start = Instant::now();
    let result =
        kmeans_fit(data, k, max_iters, seed).with_context(|| format!("kmeans run K={k}"))?;
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let (assign_ms, update_ms) = timing(&result.trace);
    Ok(Row {
        method: "kmeans",
        k,
        bits: 32 * data.dim(),
        iterations: result.iterations_run,
        converged: result.converged,
        error: original_space_error(data, &result.labels)?,
        assign_ms,
        update_ms,
        total_ms,
        memory_bytes: MemoryEstimate::raw(data.len() as u64, k as u64, data.dim() as u64).total,
        ..Row::default()
    })
}

fn run_binary(
    data: &Dataset,
    bits: usize,
    k: usize,
    max_iters: usize,
    seed: u64,
    base_seed: u64,
) -> Result<Row> {
    let binarizer = Binarizer::random(data.dim(), bits, derive_seed(base_seed, stream::BINARIZER))
        .with_context(|| format!("bkmeans run K={k}: building a {bits}-bit binarizer"))?;
    let codes = binarizer.binarize_all(data)?;
    let start = Instant::now();
    let result = bkmeans_fit(&codes, k, max_iters, seed)
        .with_context(|| format!("bkmeans run K={k} B={bits}"))?;
    let total_ms = start.elapsed().as_secs_f64() * 1e3;
    let (assign_ms, update_ms) = timing(&result.trace);
    Ok(Row {
        method: "bkmeans",
        k,
        bits,
        iterations: result.iterations_run,
        converged: result.converged,
        error: original_space_error(data, &result.labels)?,
        assign_ms,
        update_ms,
        total_ms,
        memory_bytes: MemoryEstimate::binary(data.len() as u64, k as u64, bits as u64).total,
        ..Row::default()
    })
}
