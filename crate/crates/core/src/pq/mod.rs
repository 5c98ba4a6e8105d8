//! Product quantization: codebooks, codes, and symmetric distance tables.
//!
//! A `D`-dimensional vector is split into `M` sub-vectors of `D / M`
//! dimensions; each is replaced by the index of its nearest codeword among
//! the `L` codewords of that subspace. Indices are 0-based and stored one
//! byte each, so `L <= 256`.

mod train;

use rayon::prelude::*;

use crate::dataset::{squared_l2, Dataset};
use crate::error::{Error, Result};

pub use train::train_codebook;

/// Largest codebook size that still packs one subindex per byte.
pub const MAX_CODEWORDS: usize = 256;

/// `M` subspaces of `L` codewords each, laid out subspace-major,
/// codeword-major, dimension-minor.
#[derive(Debug, Clone, PartialEq)]
pub struct Codebook {
    dim: usize,
    m: usize,
    l: usize,
    codewords: Vec<f32>,
}

impl Codebook {
    pub fn new(dim: usize, m: usize, l: usize, codewords: Vec<f32>) -> Result<Self> {
        check_layout(dim, m, l)?;
        if codewords.len() != dim * l {
            return Err(Error::LengthMismatch {
                expected: dim * l,
                found: codewords.len(),
            });
        }
        if codewords.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("codewords must be finite".into()));
        }
        Ok(Self {
            dim,
            m,
            l,
            codewords,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_subspaces(&self) -> usize {
        self.m
    }

    pub fn num_codewords(&self) -> usize {
        self.l
    }

    pub fn sub_dim(&self) -> usize {
        self.dim / self.m
    }

    pub fn codeword(&self, subspace: usize, index: usize) -> &[f32] {
        let ds = self.sub_dim();
        let start = (subspace * self.l + index) * ds;
        &self.codewords[start..start + ds]
    }

    /// All `L` codewords of one subspace, concatenated.
    pub fn subspace(&self, subspace: usize) -> &[f32] {
        let stride = self.l * self.sub_dim();
        &self.codewords[subspace * stride..(subspace + 1) * stride]
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.codewords
    }

    /// Bits needed to store one code.
    pub fn code_bits(&self) -> usize {
        self.m * bits_per_index(self.l)
    }

    pub(crate) fn check_vector(&self, v: &[f32]) -> Result<()> {
        if v.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: v.len(),
            });
        }
        Ok(())
    }

    /// Empty code set shaped for this codebook.
    pub fn empty_codes(&self) -> CodeSet {
        CodeSet {
            m: self.m,
            l: self.l,
            data: Vec::new(),
        }
    }
}

pub(crate) fn check_layout(dim: usize, m: usize, l: usize) -> Result<()> {
    if dim == 0 || m == 0 {
        return Err(Error::InvalidArgument(format!(
            "dimension ({dim}) and subspace count ({m}) must be positive"
        )));
    }
    if !dim.is_multiple_of(m) {
        return Err(Error::IndivisibleDimension { dim, m });
    }
    if !(2..=MAX_CODEWORDS).contains(&l) {
        return Err(Error::InvalidArgument(format!(
            "L={l} outside [2, {MAX_CODEWORDS}]"
        )));
    }
    Ok(())
}

/// Bits needed to store one subindex in `0..l`.
pub fn bits_per_index(l: usize) -> usize {
    (usize::BITS - (l.max(2) - 1).leading_zeros()) as usize
}

/// `N` PQ codes of `M` subindices each, stored contiguously.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodeSet {
    m: usize,
    l: usize,
    data: Vec<u8>,
}

impl CodeSet {
    pub fn new(m: usize, l: usize, data: Vec<u8>) -> Result<Self> {
        if m == 0 || !(1..=MAX_CODEWORDS).contains(&l) {
            return Err(Error::InvalidArgument(format!(
                "invalid code shape M={m}, L={l}"
            )));
        }
        if !data.len().is_multiple_of(m) {
            return Err(Error::ShapeMismatch(format!(
                "{} bytes do not form codes of length {m}",
                data.len()
            )));
        }
        if let Some(pos) = data.iter().position(|&b| b as usize >= l) {
            return Err(Error::InvalidCode {
                subspace: pos % m,
                index: data[pos] as usize,
                l,
            });
        }
        Ok(Self { m, l, data })
    }

    pub fn with_capacity(m: usize, l: usize, n: usize) -> Self {
        assert!(m > 0 && (1..=MAX_CODEWORDS).contains(&l));
        Self {
            m,
            l,
            data: Vec::with_capacity(m * n),
        }
    }

    pub fn from_codes<C: AsRef<[u8]>>(m: usize, l: usize, codes: &[C]) -> Result<Self> {
        let mut out = Self::with_capacity(m, l, codes.len());
        for c in codes {
            out.push(c.as_ref())?;
        }
        Ok(out)
    }

    pub fn push(&mut self, code: &[u8]) -> Result<()> {
        validate_code(code, self.m, self.l)?;
        self.data.extend_from_slice(code);
        Ok(())
    }

    pub fn extend(&mut self, other: &CodeSet) -> Result<()> {
        if other.m != self.m || other.l != self.l {
            return Err(Error::ShapeMismatch(format!(
                "cannot append codes of shape (M={}, L={}) to (M={}, L={})",
                other.m, other.l, self.m, self.l
            )));
        }
        self.data.extend_from_slice(&other.data);
        Ok(())
    }

    pub fn num_subspaces(&self) -> usize {
        self.m
    }

    pub fn num_codewords(&self) -> usize {
        self.l
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn code(&self, i: usize) -> &[u8] {
        &self.data[i * self.m..(i + 1) * self.m]
    }

    pub(crate) fn code_mut(&mut self, i: usize) -> &mut [u8] {
        &mut self.data[i * self.m..(i + 1) * self.m]
    }

    pub fn iter(&self) -> std::slice::ChunksExact<'_, u8> {
        self.data.chunks_exact(self.m)
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.data
    }

    pub fn into_bytes(self) -> Vec<u8> {
        self.data
    }

    pub fn select(&self, indices: &[usize]) -> Self {
        let mut data = Vec::with_capacity(indices.len() * self.m);
        for &i in indices {
            data.extend_from_slice(self.code(i));
        }
        Self {
            m: self.m,
            l: self.l,
            data,
        }
    }

    pub(crate) fn check_tables(&self, tables: &DistanceTables) -> Result<()> {
        if self.m != tables.m || self.l != tables.l {
            return Err(Error::ShapeMismatch(format!(
                "codes (M={}, L={}) do not match tables (M={}, L={})",
                self.m, self.l, tables.m, tables.l
            )));
        }
        Ok(())
    }
}

fn validate_code(code: &[u8], m: usize, l: usize) -> Result<()> {
    if code.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "code has {} subindices, expected {m}",
            code.len()
        )));
    }
    if let Some((s, &b)) = code.iter().enumerate().find(|(_, &b)| b as usize >= l) {
        return Err(Error::InvalidCode {
            subspace: s,
            index: b as usize,
            l,
        });
    }
    Ok(())
}

/// Per-subspace `L x L` matrices of squared distances between codewords.
///
/// Entries are kept in double precision so that summing `M` lookups agrees
/// with the squared Euclidean distance between decoded vectors to within
/// accumulation error.
#[derive(Debug, Clone, PartialEq)]
pub struct DistanceTables {
    m: usize,
    l: usize,
    data: Vec<f64>,
}

impl DistanceTables {
    /// Wraps precomputed tables after checking symmetry, a zero diagonal,
    /// and finite non-negative entries.
    pub fn from_raw(m: usize, l: usize, data: Vec<f64>) -> Result<Self> {
        if m == 0 || !(1..=MAX_CODEWORDS).contains(&l) {
            return Err(Error::InvalidArgument(format!(
                "invalid table shape M={m}, L={l}"
            )));
        }
        if data.len() != m * l * l {
            return Err(Error::LengthMismatch {
                expected: m * l * l,
                found: data.len(),
            });
        }
        for (s, t) in data.chunks_exact(l * l).enumerate() {
            for i in 0..l {
                if t[i * l + i] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "table {s} has nonzero diagonal at {i}"
                    )));
                }
                for j in 0..l {
                    let v = t[i * l + j];
                    if !v.is_finite() || v < 0.0 || v != t[j * l + i] {
                        return Err(Error::InvalidArgument(format!(
                            "table {s} entry ({i}, {j}) is negative, non-finite or asymmetric"
                        )));
                    }
                }
            }
        }
        Ok(Self { m, l, data })
    }

    pub fn num_subspaces(&self) -> usize {
        self.m
    }

    pub fn num_codewords(&self) -> usize {
        self.l
    }

    /// Row-major `L x L` table of subspace `subspace`.
    pub fn table(&self, subspace: usize) -> &[f64] {
        let s = self.l * self.l;
        &self.data[subspace * s..(subspace + 1) * s]
    }

    pub fn get(&self, subspace: usize, i: usize, j: usize) -> f64 {
        self.data[(subspace * self.l + i) * self.l + j]
    }

    /// Squared symmetric distance without shape checks.
    #[inline]
    pub(crate) fn sd_sq(&self, a: &[u8], b: &[u8]) -> f64 {
        let ll = self.l * self.l;
        let mut acc = 0.0;
        for (s, (&x, &y)) in a.iter().zip(b).enumerate() {
            acc += self.data[s * ll + x as usize * self.l + y as usize];
        }
        acc
    }

    pub(crate) fn check_code(&self, code: &[u8]) -> Result<()> {
        validate_code(code, self.m, self.l)
    }
}

/// Index of the nearest codeword for each subspace; ties go to the lower index.
pub fn encode(codebook: &Codebook, vector: &[f32]) -> Result<Vec<u8>> {
    codebook.check_vector(vector)?;
    let mut code = vec![0u8; codebook.m];
    encode_into(codebook, vector, &mut code);
    Ok(code)
}

fn encode_into(codebook: &Codebook, vector: &[f32], out: &mut [u8]) {
    let ds = codebook.sub_dim();
    for (s, (sub, slot)) in vector.chunks_exact(ds).zip(out.iter_mut()).enumerate() {
        let words = codebook.subspace(s);
        let mut best = f64::INFINITY;
        let mut best_idx = 0;
        for (idx, word) in words.chunks_exact(ds).enumerate() {
            let d = squared_l2(sub, word);
            if d < best {
                best = d;
                best_idx = idx;
            }
        }
        *slot = best_idx as u8;
    }
}

/// Encodes every row of `vectors`. Parallel across rows; the output does
/// not depend on the thread count.
pub fn encode_all(codebook: &Codebook, vectors: &Dataset) -> Result<CodeSet> {
    if vectors.dim() != codebook.dim {
        return Err(Error::DimensionMismatch {
            expected: codebook.dim,
            found: vectors.dim(),
        });
    }
    let m = codebook.m;
    let mut data = vec![0u8; vectors.len() * m];
    data.par_chunks_mut(m)
        .zip(vectors.as_slice().par_chunks(codebook.dim))
        .for_each(|(out, v)| encode_into(codebook, v, out));
    Ok(CodeSet {
        m,
        l: codebook.l,
        data,
    })
}

/// Concatenates the codewords selected by `code`.
pub fn decode(codebook: &Codebook, code: &[u8]) -> Result<Vec<f32>> {
    validate_code(code, codebook.m, codebook.l)?;
    let mut out = Vec::with_capacity(codebook.dim);
    for (s, &idx) in code.iter().enumerate() {
        out.extend_from_slice(codebook.codeword(s, idx as usize));
    }
    Ok(out)
}

pub fn build_distance_tables(codebook: &Codebook) -> DistanceTables {
    let (m, l) = (codebook.m, codebook.l);
    let mut data = vec![0.0f64; m * l * l];
    data.par_chunks_mut(l * l)
        .enumerate()
        .for_each(|(s, table)| {
            for i in 0..l {
                let wi = codebook.codeword(s, i);
                for j in (i + 1)..l {
                    let d = squared_l2(wi, codebook.codeword(s, j));
                    table[i * l + j] = d;
                    table[j * l + i] = d;
                }
            }
        });
    DistanceTables { m, l, data }
}

/// Sum over subspaces of the table entry for the pair of subindices.
pub fn symmetric_distance_sq(tables: &DistanceTables, a: &[u8], b: &[u8]) -> Result<f64> {
    tables.check_code(a)?;
    tables.check_code(b)?;
    Ok(tables.sd_sq(a, b))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seed;
    use proptest::prelude::*;
    use rand::Rng;

    fn random_codebook(dim: usize, m: usize, l: usize, seed: u64) -> Codebook {
        let mut rng = seed::rng(seed);
        let words = (0..dim * l)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        Codebook::new(dim, m, l, words).unwrap()
    }

    #[test]
    fn layout_validation() {
        assert!(matches!(
            Codebook::new(5, 2, 4, vec![0.0; 20]),
            Err(Error::IndivisibleDimension { dim: 5, m: 2 })
        ));
        assert!(Codebook::new(4, 2, 1, vec![0.0; 4]).is_err());
        assert!(Codebook::new(4, 2, 257, vec![0.0; 4 * 257]).is_err());
        assert!(Codebook::new(4, 2, 2, vec![0.0; 7]).is_err());
        assert_eq!(bits_per_index(256), 8);
        assert_eq!(bits_per_index(16), 4);
        assert_eq!(bits_per_index(2), 1);
        assert_eq!(bits_per_index(5), 3);
    }

    #[test]
    fn encode_lattice_vector_exact() {
        let cb = random_codebook(6, 3, 8, 1);
        let want = [3u8, 0, 7];
        let x = decode(&cb, &want).unwrap();
        assert_eq!(encode(&cb, &x).unwrap(), want);
        assert_eq!(decode(&cb, &encode(&cb, &x).unwrap()).unwrap(), x);
    }

    #[test]
    fn encode_tie_goes_to_lower_index() {
        // Codewords at -1 and +1; the origin is equidistant.
        let cb = Codebook::new(1, 1, 2, vec![1.0, -1.0]).unwrap();
        assert_eq!(encode(&cb, &[0.0]).unwrap(), vec![0]);
        let cb = Codebook::new(1, 1, 3, vec![5.0, -1.0, 1.0]).unwrap();
        assert_eq!(encode(&cb, &[0.0]).unwrap(), vec![1]);
    }

    #[test]
    fn encode_matches_brute_force() {
        let cb = random_codebook(8, 4, 16, 2);
        let mut rng = seed::rng(3);
        for _ in 0..200 {
            let x: Vec<f32> = (0..8).map(|_| rng.random_range(-1.5f32..1.5)).collect();
            let code = encode(&cb, &x).unwrap();
            for s in 0..4 {
                let sub = &x[s * 2..s * 2 + 2];
                let dists: Vec<f64> = (0..16)
                    .map(|i| {
                        let w = cb.codeword(s, i);
                        (0..2).map(|d| ((sub[d] - w[d]) as f64).powi(2)).sum()
                    })
                    .collect();
                let min = dists.iter().cloned().fold(f64::INFINITY, f64::min);
                let first = dists.iter().position(|&d| d == min).unwrap();
                assert_eq!(code[s] as usize, first);
            }
        }
    }

    #[test]
    fn encode_rejects_wrong_dimension() {
        let cb = random_codebook(4, 2, 4, 0);
        assert!(matches!(
            encode(&cb, &[0.0; 3]),
            Err(Error::DimensionMismatch {
                expected: 4,
                found: 3
            })
        ));
        let ds = Dataset::new(2, vec![0.0; 4]).unwrap();
        assert!(encode_all(&cb, &ds).is_err());
    }

    #[test]
    fn decode_rejects_out_of_range() {
        let cb = random_codebook(4, 2, 4, 0);
        assert!(matches!(
            decode(&cb, &[0, 4]),
            Err(Error::InvalidCode {
                subspace: 1,
                index: 4,
                l: 4
            })
        ));
        assert!(decode(&cb, &[0]).is_err());
    }

    #[test]
    fn scalar_quantization_error_is_nearest_codeword_distance() {
        // M = D: every dimension has its own scalar codebook.
        let cb = random_codebook(5, 5, 8, 9);
        let mut rng = seed::rng(10);
        for _ in 0..100 {
            let x: Vec<f32> = (0..5).map(|_| rng.random_range(-2.0f32..2.0)).collect();
            let y = decode(&cb, &encode(&cb, &x).unwrap()).unwrap();
            for d in 0..5 {
                let nearest = (0..8)
                    .map(|i| (x[d] - cb.codeword(d, i)[0]).abs())
                    .fold(f32::INFINITY, f32::min);
                assert_eq!((x[d] - y[d]).abs(), nearest);
            }
        }
    }

    #[test]
    fn one_dimensional_table_by_hand() {
        let cb = Codebook::new(1, 1, 2, vec![0.0, 3.0]).unwrap();
        let t = build_distance_tables(&cb);
        assert_eq!(t.table(0), &[0.0, 9.0, 9.0, 0.0]);
    }

    #[test]
    fn duplicate_codewords_have_zero_distance() {
        let cb = Codebook::new(2, 1, 3, vec![1.0, 2.0, 5.0, 5.0, 1.0, 2.0]).unwrap();
        let t = build_distance_tables(&cb);
        assert_eq!(t.get(0, 0, 2), 0.0);
        assert_eq!(t.get(0, 2, 0), 0.0);
        assert!(t.get(0, 0, 1) > 0.0);
    }

    #[test]
    fn tables_match_pairwise_recomputation() {
        let cb = random_codebook(12, 3, 32, 4);
        let t = build_distance_tables(&cb);
        for s in 0..3 {
            for i in 0..32 {
                for j in 0..32 {
                    let (a, b) = (cb.codeword(s, i), cb.codeword(s, j));
                    let mut want = 0.0f64;
                    for d in 0..4 {
                        want += (a[d] as f64 - b[d] as f64).powi(2);
                    }
                    assert!((t.get(s, i, j) - want).abs() <= 1e-12);
                }
            }
        }
        // Tables built here must pass the raw constructor's checks.
        DistanceTables::from_raw(3, 32, t.data.clone()).unwrap();
    }

    #[test]
    fn two_term_symmetric_distance() {
        let mut data = vec![0.0; 2 * 16];
        data[4 + 2] = 9.0;
        data[2 * 4 + 1] = 9.0;
        data[16 + 3] = 4.0;
        data[16 + 3 * 4] = 4.0;
        let t = DistanceTables::from_raw(2, 4, data).unwrap();
        assert_eq!(symmetric_distance_sq(&t, &[1, 0], &[2, 3]).unwrap(), 13.0);
        assert_eq!(symmetric_distance_sq(&t, &[1, 0], &[1, 0]).unwrap(), 0.0);
        assert!(symmetric_distance_sq(&t, &[1], &[2, 3]).is_err());
    }

    #[test]
    fn raw_tables_are_validated() {
        assert!(DistanceTables::from_raw(1, 2, vec![0.0, 1.0, 2.0, 0.0]).is_err());
        assert!(DistanceTables::from_raw(1, 2, vec![1.0, 1.0, 1.0, 0.0]).is_err());
        assert!(DistanceTables::from_raw(1, 2, vec![0.0, -1.0, -1.0, 0.0]).is_err());
        assert!(DistanceTables::from_raw(1, 2, vec![0.0, 1.0, 1.0]).is_err());
    }

    #[test]
    fn encode_all_matches_sequential_across_pools() {
        let cb = random_codebook(16, 4, 64, 5);
        let mut rng = seed::rng(6);
        let data: Vec<f32> = (0..16 * 500)
            .map(|_| rng.random_range(-1.0f32..1.0))
            .collect();
        let ds = Dataset::new(16, data).unwrap();
        let seq: Vec<u8> = ds.rows().flat_map(|r| encode(&cb, r).unwrap()).collect();
        for threads in [1, 4] {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap();
            let codes = pool.install(|| encode_all(&cb, &ds).unwrap());
            assert_eq!(codes.as_bytes(), &seq[..]);
        }
    }

    proptest! {
        #[test]
        fn tables_symmetric_zero_diagonal(seed in 0u64..1000, m in 1usize..4, l in 2usize..20) {
            let cb = random_codebook(m * 3, m, l, seed);
            let t = build_distance_tables(&cb);
            for s in 0..m {
                for i in 0..l {
                    prop_assert_eq!(t.get(s, i, i), 0.0);
                    for j in 0..l {
                        prop_assert!(t.get(s, i, j) >= 0.0);
                        prop_assert_eq!(t.get(s, i, j), t.get(s, j, i));
                    }
                }
            }
        }

        #[test]
        fn symmetric_distance_is_symmetric_and_matches_decode(
            seed in 0u64..1000,
            a in proptest::collection::vec(0u8..16, 4),
            b in proptest::collection::vec(0u8..16, 4),
        ) {
            let cb = random_codebook(8, 4, 16, seed);
            let t = build_distance_tables(&cb);
            let ab = symmetric_distance_sq(&t, &a, &b).unwrap();
            prop_assert_eq!(ab, symmetric_distance_sq(&t, &b, &a).unwrap());
            let want = squared_l2(&decode(&cb, &a).unwrap(), &decode(&cb, &b).unwrap());
            prop_assert!((ab - want).abs() <= 1e-9 * want.max(f64::MIN_POSITIVE));
        }

        #[test]
        fn reconstruction_is_idempotent(seed in 0u64..1000, x in proptest::collection::vec(-3.0f32..3.0, 6)) {
            let cb = random_codebook(6, 2, 8, seed);
            let once = decode(&cb, &encode(&cb, &x).unwrap()).unwrap();
            let twice = decode(&cb, &encode(&cb, &once).unwrap()).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
