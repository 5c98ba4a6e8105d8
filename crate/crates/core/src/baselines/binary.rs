//! Binary codes and k-means under the Hamming distance.
//!
//! Codes come from the signs of a random orthonormal projection. Centers are
//! updated by a per-bit majority vote, which minimizes the summed Hamming
//! distance to the members.

use std::time::Instant;

use rand::seq::index::sample;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::clustering::repair::repair_empty;
use crate::clustering::{check_iterations, check_k, is_converged, millis, IterationRecord};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed;

/// `N` codes of `bits` bits, each packed into 64-bit words, least
/// significant bit first.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BinaryCodes {
    bits: usize,
    words: usize,
    data: Vec<u64>,
}

impl BinaryCodes {
    pub fn new(bits: usize) -> Result<Self> {
        if bits == 0 {
            return Err(Error::InvalidArgument(
                "code length must be positive".into(),
            ));
        }
        Ok(Self {
            bits,
            words: bits.div_ceil(64),
            data: Vec::new(),
        })
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn words_per_code(&self) -> usize {
        self.words
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.words
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn code(&self, i: usize) -> &[u64] {
        &self.data[i * self.words..(i + 1) * self.words]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, u64> {
        self.data.chunks_exact(self.words)
    }

    /// Appends a code; bits at or above `bits` must be zero.
    pub fn push(&mut self, code: &[u64]) -> Result<()> {
        if code.len() != self.words {
            return Err(Error::ShapeMismatch(format!(
                "code has {} words, expected {}",
                code.len(),
                self.words
            )));
        }
        let tail = self.bits % 64;
        if tail != 0 && code[self.words - 1] >> tail != 0 {
            return Err(Error::InvalidArgument(format!(
                "code has bits set beyond bit {}",
                self.bits
            )));
        }
        self.data.extend_from_slice(code);
        Ok(())
    }

    pub fn bit(&self, i: usize, b: usize) -> bool {
        self.code(i)[b / 64] >> (b % 64) & 1 == 1
    }

    /// Code `i` as `ceil(bits / 8)` little-endian bytes.
    pub fn code_bytes(&self, i: usize) -> Vec<u8> {
        let nbytes = self.bits.div_ceil(8);
        self.code(i)
            .iter()
            .flat_map(|w| w.to_le_bytes())
            .take(nbytes)
            .collect()
    }

    pub fn push_bytes(&mut self, bytes: &[u8]) -> Result<()> {
        if bytes.len() != self.bits.div_ceil(8) {
            return Err(Error::LengthMismatch {
                expected: self.bits.div_ceil(8),
                found: bytes.len(),
            });
        }
        let mut code = vec![0u64; self.words];
        for (j, &b) in bytes.iter().enumerate() {
            code[j / 8] |= (b as u64) << (8 * (j % 8));
        }
        self.push(&code)
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut out = Self {
            bits: self.bits,
            words: self.words,
            data: Vec::with_capacity(indices.len() * self.words),
        };
        for &i in indices {
            out.data.extend_from_slice(self.code(i));
        }
        out
    }

    fn code_mut(&mut self, i: usize) -> &mut [u64] {
        &mut self.data[i * self.words..(i + 1) * self.words]
    }
}

#[inline]
pub fn hamming(a: &[u64], b: &[u64]) -> u32 {
    a.iter().zip(b).map(|(x, y)| (x ^ y).count_ones()).sum()
}

/// Projection onto `bits` orthonormal directions followed by a sign test.
#[derive(Debug, Clone, PartialEq)]
pub struct Binarizer {
    dim: usize,
    bits: usize,
    /// `bits` columns of length `dim`, stored column after column.
    columns: Vec<f64>,
}

impl Binarizer {
    /// Orthonormalized Gaussian matrix. Requires `bits <= dim`.
    pub fn random(dim: usize, bits: usize, seed: u64) -> Result<Self> {
        if bits == 0 || bits > dim {
            return Err(Error::InvalidArgument(format!(
                "cannot draw {bits} orthonormal directions in dimension {dim}"
            )));
        }
        let mut rng = seed::rng(seed);
        loop {
            let raw: Vec<f64> = (0..dim * bits)
                .map(|_| StandardNormal.sample(&mut rng))
                .collect();
            if let Some(columns) = gram_schmidt(raw, dim, bits) {
                return Ok(Self { dim, bits, columns });
            }
        }
    }

    /// Wraps caller columns after checking orthonormality to within 1e-6.
    pub fn from_columns(dim: usize, bits: usize, columns: Vec<f64>) -> Result<Self> {
        if columns.len() != dim * bits {
            return Err(Error::LengthMismatch {
                expected: dim * bits,
                found: columns.len(),
            });
        }
        let b = Self { dim, bits, columns };
        if b.orthonormality_error() > 1e-6 {
            return Err(Error::InvalidArgument("columns are not orthonormal".into()));
        }
        Ok(b)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn column(&self, b: usize) -> &[f64] {
        &self.columns[b * self.dim..(b + 1) * self.dim]
    }

    /// Largest deviation of the Gram matrix from the identity.
    pub fn orthonormality_error(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.bits {
            for j in 0..self.bits {
                let dot: f64 = self
                    .column(i)
                    .iter()
                    .zip(self.column(j))
                    .map(|(a, b)| a * b)
                    .sum();
                let want = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((dot - want).abs());
            }
        }
        worst
    }

    fn encode_into(&self, v: &[f32], out: &mut [u64]) {
        out.fill(0);
        for b in 0..self.bits {
            let proj: f64 = self
                .column(b)
                .iter()
                .zip(v)
                .map(|(&c, &x)| c * x as f64)
                .sum();
            if proj >= 0.0 {
                out[b / 64] |= 1 << (b % 64);
            }
        }
    }

    pub fn binarize_all(&self, vectors: &Dataset) -> Result<BinaryCodes> {
        if vectors.dim() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: vectors.dim(),
            });
        }
        let mut codes = BinaryCodes::new(self.bits)?;
        codes.data = vec![0; vectors.len() * codes.words];
        let w = codes.words;
        codes
            .data
            .par_chunks_mut(w)
            .zip(vectors.as_slice().par_chunks(self.dim))
            .for_each(|(out, v)| self.encode_into(v, out));
        Ok(codes)
    }
}

/// Modified Gram-Schmidt; `None` if a column is (numerically) dependent.
fn gram_schmidt(mut cols: Vec<f64>, dim: usize, bits: usize) -> Option<Vec<f64>> {
    for i in 0..bits {
        for j in 0..i {
            let (done, rest) = cols.split_at_mut(i * dim);
            let q = &done[j * dim..(j + 1) * dim];
            let v = &mut rest[..dim];
            let dot: f64 = q.iter().zip(v.iter()).map(|(a, b)| a * b).sum();
            for (x, &qq) in v.iter_mut().zip(q) {
                *x -= dot * qq;
            }
        }
        let v = &mut cols[i * dim..(i + 1) * dim];
        let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-9 {
            return None;
        }
        v.iter_mut().for_each(|x| *x /= norm);
    }
    Some(cols)
}

/// Bit `b` is set iff the `b`-th projected coordinate is `>= 0`.
pub fn binarize(binarizer: &Binarizer, vector: &[f32]) -> Result<Vec<u64>> {
    if vector.len() != binarizer.dim {
        return Err(Error::DimensionMismatch {
            expected: binarizer.dim,
            found: vector.len(),
        });
    }
    let mut out = vec![0u64; binarizer.bits.div_ceil(64)];
    binarizer.encode_into(vector, &mut out);
    Ok(out)
}

/// Per-bit majority over `members` of `codes`; an even split gives 0.
fn majority(codes: &BinaryCodes, members: &[u32], counts: &mut [u32], out: &mut [u64]) {
    counts.fill(0);
    for &n in members {
        for (w, &word) in codes.code(n as usize).iter().enumerate() {
            let mut x = word;
            while x != 0 {
                let t = x.trailing_zeros() as usize;
                counts[w * 64 + t] += 1;
                x &= x - 1;
            }
        }
    }
    out.fill(0);
    for (b, &c) in counts.iter().enumerate().take(codes.bits) {
        if 2 * c as usize > members.len() {
            out[b / 64] |= 1 << (b % 64);
        }
    }
}

/// Majority-vote center of a non-empty set of codes.
pub fn majority_center(members: &BinaryCodes) -> Result<Vec<u64>> {
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let idx: Vec<u32> = (0..members.len() as u32).collect();
    let mut counts = vec![0u32; members.words * 64];
    let mut out = vec![0u64; members.words];
    majority(members, &idx, &mut counts, &mut out);
    Ok(out)
}

#[derive(Debug, Clone, PartialEq)]
pub struct BinaryClustering {
    pub centers: BinaryCodes,
    pub labels: Vec<u32>,
    /// `objective` and `objective_sq` both hold the mean Hamming distance,
    /// which is the squared Euclidean distance between bit vectors.
    pub trace: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl BinaryClustering {
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// k-means over binary codes: Hamming-nearest assignment, majority update.
pub fn bkmeans_fit(
    codes: &BinaryCodes,
    k: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<BinaryClustering> {
    check_k(k, codes.len())?;
    check_iterations(max_iterations)?;
    let mut rng = seed::rng(seed);
    let mut centers = codes.select(&sample(&mut rng, codes.len(), k).into_vec());
    let w = codes.words;

    let mut labels = Vec::new();
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    for iteration in 1..=max_iterations {
        let start = Instant::now();
        let (mut lab, mut dists): (Vec<u32>, Vec<f64>) = codes
            .data
            .par_chunks(w)
            .map(|c| {
                let mut best = (0u32, u32::MAX);
                for (kk, center) in centers.iter().enumerate() {
                    let d = hamming(c, center);
                    if d < best.1 {
                        best = (kk as u32, d);
                    }
                }
                (best.0, best.1 as f64)
            })
            .collect::<Vec<_>>()
            .into_iter()
            .unzip();
        let moves = repair_empty(&mut lab, &mut dists, k);
        for &(c, n) in &moves {
            centers.code_mut(c).copy_from_slice(codes.code(n));
        }
        let assign_ms = millis(start);

        let start = Instant::now();
        let mut offsets = vec![0usize; k + 1];
        for &c in &lab {
            offsets[c as usize + 1] += 1;
        }
        for c in 0..k {
            offsets[c + 1] += offsets[c];
        }
        let mut fill = offsets.clone();
        let mut order = vec![0u32; lab.len()];
        for (n, &c) in lab.iter().enumerate() {
            order[fill[c as usize]] = n as u32;
            fill[c as usize] += 1;
        }
        centers.data.par_chunks_mut(w).enumerate().for_each_init(
            || vec![0u32; w * 64],
            |counts, (c, out)| {
                let members = &order[offsets[c]..offsets[c + 1]];
                if !members.is_empty() {
                    majority(codes, members, counts, out);
                }
            },
        );
        let update_ms = millis(start);

        let total: u64 = codes
            .iter()
            .zip(&lab)
            .map(|(c, &kk)| hamming(c, centers.code(kk as usize)) as u64)
            .sum();
        let objective = total as f64 / codes.len() as f64;
        labels = lab;
        let previous = trace.last().map(|r| r.objective_sq);
        trace.push(IterationRecord {
            iteration,
            objective,
            objective_sq: objective,
            assign_ms,
            update_ms,
            repaired: moves.len(),
            mean_nnz: None,
        });
        if is_converged(previous, objective) {
            converged = true;
            break;
        }
    }
    Ok(BinaryClustering {
        centers,
        labels,
        iterations_run: trace.len(),
        trace,
        converged,
    })
}
