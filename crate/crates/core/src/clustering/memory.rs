use serde::{Deserialize, Serialize};

use crate::pq::bits_per_index;

/// Theoretical runtime memory of one clustering run, in bytes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MemoryEstimate {
    /// Input codes plus `K` centers.
    pub codes_and_centers: u64,
    /// Distance tables at 4 bytes per entry (zero for non-PQ methods).
    pub tables: u64,
    /// One 32-bit label per point.
    pub assignment: u64,
    pub total: u64,
}

impl MemoryEstimate {
    fn new(codes_and_centers: u64, tables: u64, assignment: u64) -> Self {
        Self {
            codes_and_centers,
            tables,
            assignment,
            total: codes_and_centers + tables + assignment,
        }
    }

    /// Memory for `bits`-bit codes with no distance tables (binary k-means).
    pub fn binary(n: u64, k: u64, bits: u64) -> Self {
        Self::new((bits * (n + k)).div_ceil(8), 0, 4 * n)
    }

    /// Memory for raw `d`-dimensional float vectors (exact k-means).
    pub fn raw(n: u64, k: u64, d: u64) -> Self {
        Self::new(4 * d * (n + k), 0, 4 * n)
    }

    /// Codes and centers in decimal megabytes.
    pub fn codes_megabytes(&self) -> f64 {
        self.codes_and_centers as f64 / 1e6
    }
}

/// Memory for PQ codes with `m` subspaces of `l` codewords: `B/8 (N + K)`
/// bytes of codes with `B = M log2 L`, `4 L^2 M` bytes of tables, and `4N`
/// bytes of labels.
pub fn estimate_memory(n: u64, k: u64, m: u64, l: u64) -> MemoryEstimate {
    let bits = m * bits_per_index(l as usize) as u64;
    MemoryEstimate::new((bits * (n + k)).div_ceil(8), 4 * l * l * m, 4 * n)
}
