use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::clustering::{IterationRecord, MemoryEstimate};
use crate::error::{Error, Result};

pub const RESULTS_FORMAT: &str = "pqkmeans-results";
pub const RESULTS_VERSION: u32 = 1;
pub const TRACE_CSV_HEADER: &str =
    "iteration,objective,objective_sq,assign_ms,update_ms,repaired,mean_nnz";

/// Summary of one clustering run. Centers and labels live in sidecar files
/// referenced by path.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultsDocument {
    pub format: String,
    pub version: u32,
    pub method: String,
    /// The full run configuration, echoed verbatim.
    pub config: serde_json::Value,
    pub n: usize,
    pub k: usize,
    pub iterations_run: usize,
    pub converged: bool,
    pub final_objective: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub strategy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub update: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub memory: Option<MemoryEstimate>,
    pub trace: Vec<IterationRecord>,
    pub centers_file: String,
    pub labels_file: String,
}

pub fn write_results(path: impl AsRef<Path>, doc: &ResultsDocument) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, doc)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_results(path: impl AsRef<Path>) -> Result<ResultsDocument> {
    let doc: ResultsDocument = serde_json::from_reader(BufReader::new(File::open(path)?))?;
    if doc.format != RESULTS_FORMAT {
        return Err(Error::InvalidArgument(format!(
            "not a results document: {:?}",
            doc.format
        )));
    }
    if doc.version != RESULTS_VERSION {
        return Err(Error::UnsupportedVersion(doc.version));
    }
    Ok(doc)
}

/// One CSV row per iteration under [`TRACE_CSV_HEADER`].
pub fn write_trace_csv<W: Write>(mut w: W, trace: &[IterationRecord]) -> Result<()> {
    writeln!(w, "{TRACE_CSV_HEADER}")?;
    for r in trace {
        let nnz = r.mean_nnz.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            w,
            "{},{},{},{:.3},{:.3},{},{}",
            r.iteration, r.objective, r.objective_sq, r.assign_ms, r.update_ms, r.repaired, nnz
        )?;
    }
    Ok(())
}
