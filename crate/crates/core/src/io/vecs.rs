use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use super::read_full;
use crate::dataset::Dataset;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VecsFormat {
    /// `f32` components.
    Fvecs,
    /// `u8` components, widened to `f32` on read.
    Bvecs,
}

impl VecsFormat {
    fn component_size(self) -> usize {
        match self {
            VecsFormat::Fvecs => 4,
            VecsFormat::Bvecs => 1,
        }
    }

    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()? {
            "fvecs" => Some(VecsFormat::Fvecs),
            "bvecs" => Some(VecsFormat::Bvecs),
            _ => None,
        }
    }
}

/// Streaming record reader. Working memory is one record plus whatever
/// chunk the caller asks for.
pub struct VecsReader<R> {
    inner: R,
    format: VecsFormat,
    dim: Option<usize>,
    index: usize,
    buf: Vec<u8>,
}

impl VecsReader<BufReader<File>> {
    pub fn open(path: impl AsRef<Path>, format: VecsFormat) -> Result<Self> {
        Ok(Self::new(BufReader::new(File::open(path)?), format))
    }
}

impl<R: Read> VecsReader<R> {
    pub fn new(inner: R, format: VecsFormat) -> Self {
        Self {
            inner,
            format,
            dim: None,
            index: 0,
            buf: Vec::new(),
        }
    }

    /// Dimension of the records seen so far, if any.
    pub fn dim(&self) -> Option<usize> {
        self.dim
    }

    /// Reads the next record into `out`; `Ok(false)` at a clean end of file.
    pub fn read_record(&mut self, out: &mut Vec<f32>) -> Result<bool> {
        let index = self.index;
        let malformed = |reason: String| Error::MalformedRecord { index, reason };
        let mut header = [0u8; 4];
        match read_full(&mut self.inner, &mut header)? {
            0 => return Ok(false),
            4 => {}
            k => {
                return Err(malformed(format!(
                    "truncated dimension header ({k} of 4 bytes)"
                )))
            }
        }
        let d = i32::from_le_bytes(header);
        if d <= 0 {
            return Err(malformed(format!("non-positive dimension {d}")));
        }
        let d = d as usize;
        if let Some(expected) = self.dim {
            if d != expected {
                return Err(malformed(format!("dimension {d} differs from {expected}")));
            }
        }
        let size = d * self.format.component_size();
        self.buf.resize(size, 0);
        let got = read_full(&mut self.inner, &mut self.buf)?;
        if got != size {
            return Err(malformed(format!(
                "truncated payload ({got} of {size} bytes)"
            )));
        }
        out.clear();
        match self.format {
            VecsFormat::Fvecs => out.extend(
                self.buf
                    .chunks_exact(4)
                    .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]])),
            ),
            VecsFormat::Bvecs => out.extend(self.buf.iter().map(|&b| b as f32)),
        }
        self.dim = Some(d);
        self.index += 1;
        Ok(true)
    }

    /// Up to `max` records; `None` once the input is exhausted.
    pub fn next_chunk(&mut self, max: usize) -> Result<Option<Dataset>> {
        let mut row = Vec::new();
        let mut chunk: Option<Dataset> = None;
        while chunk.as_ref().map_or(0, Dataset::len) < max {
            if !self.read_record(&mut row)? {
                break;
            }
            chunk
                .get_or_insert_with(|| Dataset::with_capacity(row.len(), max.min(1 << 16)))
                .push(&row)?;
        }
        Ok(chunk)
    }

    /// Reads every remaining record.
    pub fn read_all(mut self) -> Result<Dataset> {
        let mut row = Vec::new();
        let mut out: Option<Dataset> = None;
        while self.read_record(&mut row)? {
            out.get_or_insert_with(|| Dataset::with_capacity(row.len(), 0))
                .push(&row)?;
        }
        out.ok_or_else(|| Error::MalformedRecord {
            index: 0,
            reason: "file contains no records".into(),
        })
    }
}

impl<R: Read> Iterator for VecsReader<R> {
    type Item = Result<Vec<f32>>;

    fn next(&mut self) -> Option<Self::Item> {
        let mut row = Vec::new();
        match self.read_record(&mut row) {
            Ok(true) => Some(Ok(row)),
            Ok(false) => None,
            Err(e) => Some(Err(e)),
        }
    }
}

pub fn read_fvecs(path: impl AsRef<Path>) -> Result<Dataset> {
    VecsReader::open(path, VecsFormat::Fvecs)?.read_all()
}

pub fn read_bvecs(path: impl AsRef<Path>) -> Result<Dataset> {
    VecsReader::open(path, VecsFormat::Bvecs)?.read_all()
}

fn write_header<W: Write>(w: &mut W, dim: usize) -> Result<()> {
    let d = i32::try_from(dim)
        .map_err(|_| Error::InvalidArgument(format!("dimension {dim} too large")))?;
    w.write_all(&d.to_le_bytes())?;
    Ok(())
}

pub fn write_fvecs(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for row in data.rows() {
        write_header(&mut w, data.dim())?;
        for v in row {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Components must be integers in `[0, 255]`.
pub fn write_bvecs(path: impl AsRef<Path>, data: &Dataset) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    let mut bytes = Vec::with_capacity(data.dim());
    for (i, row) in data.rows().enumerate() {
        bytes.clear();
        for &v in row {
            if !(0.0..=255.0).contains(&v) || v.fract() != 0.0 {
                return Err(Error::MalformedRecord {
                    index: i,
                    reason: format!("component {v} is not a byte value"),
                });
            }
            bytes.push(v as u8);
        }
        write_header(&mut w, data.dim())?;
        w.write_all(&bytes)?;
    }
    w.flush()?;
    Ok(())
}
