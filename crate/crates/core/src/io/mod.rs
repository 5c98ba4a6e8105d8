//! On-disk formats.
//!
//! * `.fvecs` / `.bvecs`: per record, a little-endian `i32` dimension then
//!   that many `f32` (fvecs) or `u8` (bvecs) components.
//! * PQKC code files, PQCB codebooks and PQKB binary-code files: a 4-byte
//!   magic, a small little-endian header, then a flat payload.
//! * Label arrays: raw little-endian `u32`, no header.
//! * Results documents: versioned JSON.

mod codes;
mod results;
mod synth;
mod vecs;

pub use codes::{
    read_binary_codes, read_codebook, read_codes, read_labels, write_binary_codes, write_codebook,
    write_codes, write_labels, CodeReader, CodeWriter, BINARY_MAGIC, CODEBOOK_MAGIC, CODE_MAGIC,
    FORMAT_VERSION,
};
pub use results::{
    read_results, write_results, write_trace_csv, ResultsDocument, RESULTS_FORMAT, RESULTS_VERSION,
    TRACE_CSV_HEADER,
};
pub use synth::{generate_synthetic, HYPERCUBE_HALF_SIDE};
pub use vecs::{read_bvecs, read_fvecs, write_bvecs, write_fvecs, VecsFormat, VecsReader};

use std::io::{self, Read};

pub(crate) fn read_array<const N: usize, R: Read>(r: &mut R) -> io::Result<[u8; N]> {
    let mut buf = [0u8; N];
    r.read_exact(&mut buf)?;
    Ok(buf)
}

pub(crate) fn read_u32<R: Read>(r: &mut R) -> io::Result<u32> {
    read_array::<4, _>(r).map(u32::from_le_bytes)
}

pub(crate) fn read_u64<R: Read>(r: &mut R) -> io::Result<u64> {
    read_array::<8, _>(r).map(u64::from_le_bytes)
}

/// Reads until `buf` is full or EOF; returns the number of bytes read.
pub(crate) fn read_full<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<usize> {
    let mut filled = 0;
    while filled < buf.len() {
        match r.read(&mut buf[filled..]) {
            Ok(0) => break,
            Ok(n) => filled += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) => return Err(e),
        }
    }
    Ok(filled)
}
