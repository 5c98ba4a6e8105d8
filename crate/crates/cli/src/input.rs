use std::path::{Path, PathBuf};

use anyhow::{anyhow, Context, Result};
use pqkmeans::io::{VecsFormat, VecsReader};
use pqkmeans::Dataset;

/// Vector files are recognized by their `.fvecs` / `.bvecs` extension.
pub fn vecs_format(path: &Path) -> Result<VecsFormat> {
    VecsFormat::from_path(path).ok_or_else(|| {
        anyhow!(
            "{}: unknown vector format (expected a .fvecs or .bvecs extension)",
            path.display()
        )
    })
}

pub fn open_vectors(path: &Path) -> Result<VecsReader<std::io::BufReader<std::fs::File>>> {
    VecsReader::open(path, vecs_format(path)?)
        .with_context(|| format!("opening {}", path.display()))
}

/// Reads up to `limit` leading vectors, or all of them.
pub fn read_vectors(path: &Path, limit: Option<usize>) -> Result<Dataset> {
    let mut reader = open_vectors(path)?;
    let data = match limit {
        Some(max) => reader.next_chunk(max),
        None => reader.read_all().map(Some),
    }
    .with_context(|| format!("reading {}", path.display()))?;
    data.ok_or_else(|| anyhow!("{}: file contains no vectors", path.display()))
}

/// `prefix` with `suffix` appended to its file name.
pub fn sidecar(prefix: &Path, suffix: &str) -> PathBuf {
    let mut name = prefix.as_os_str().to_owned();
    name.push(suffix);
    PathBuf::from(name)
}

pub fn write_json(path: Option<&Path>, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    match path {
        Some(p) => {
            std::fs::write(p, text + "\n").with_context(|| format!("writing {}", p.display()))
        }
        None => {
            println!("{text}");
            Ok(())
        }
    }
}
