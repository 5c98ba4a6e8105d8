//! Center update in the code domain.
//!
//! The new center of a cluster picks, independently per subspace, the
//! codeword that minimizes the summed squared distance to the members'
//! codewords. The naive route scans every member for every candidate;
//! sparse voting first histograms the members' subindices and then only
//! reads the table rows of the histogram's nonzero bins.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pq::{CodeSet, DistanceTables};

/// Multiplicity of each subindex within one cluster and subspace.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FrequencyHistogram {
    pub counts: Vec<u32>,
    /// Ascending positions of the nonzero bins.
    pub support: Vec<usize>,
}

impl FrequencyHistogram {
    /// Number of nonzero bins.
    pub fn nnz(&self) -> usize {
        self.support.len()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(|&c| c as u64).sum()
    }
}

pub fn build_histogram(values: &[u8], l: usize) -> Result<FrequencyHistogram> {
    let mut counts = vec![0u32; l];
    let mut support = Vec::new();
    for &v in values {
        let v = v as usize;
        if v >= l {
            return Err(Error::OutOfRange { value: v, limit: l });
        }
        if counts[v] == 0 {
            support.push(v);
        }
        counts[v] += 1;
    }
    support.sort_unstable();
    Ok(FrequencyHistogram { counts, support })
}

#[inline]
fn argmin(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] {
            best = i;
        }
    }
    best
}

/// `argmin_l sum_j counts[j] * table[j][l]` over the listed nonzero bins.
fn vote(table: &[f64], l: usize, counts: &[u32], support: &[usize], votes: &mut [f64]) -> usize {
    votes.fill(0.0);
    for &j in support {
        let h = counts[j] as f64;
        // Row j equals column j since the table is symmetric.
        for (v, &a) in votes.iter_mut().zip(&table[j * l..(j + 1) * l]) {
            *v += h * a;
        }
    }
    argmin(votes)
}

/// `argmin_l sum_n table[x_n][l]` by direct accumulation.
fn scan<I: Iterator<Item = usize>>(
    table: &[f64],
    l: usize,
    subindices: I,
    votes: &mut [f64],
) -> usize {
    votes.fill(0.0);
    for x in subindices {
        for (v, &a) in votes.iter_mut().zip(&table[x * l..(x + 1) * l]) {
            *v += a;
        }
    }
    argmin(votes)
}

/// Brute-force center over all `L` candidates per subspace.
pub fn update_center_naive(members: &CodeSet, tables: &DistanceTables) -> Result<Vec<u8>> {
    members.check_tables(tables)?;
    if members.is_empty() {
        return Err(Error::EmptyCluster);
    }
    let l = tables.num_codewords();
    let mut votes = vec![0.0; l];
    Ok((0..tables.num_subspaces())
        .map(|s| {
            let idx = members.iter().map(|c| c[s] as usize);
            scan(tables.table(s), l, idx, &mut votes) as u8
        })
        .collect())
}

/// Center from one histogram per subspace; agrees with
/// [`update_center_naive`] on the members the histograms were built from.
pub fn update_center_sparse(
    histograms: &[FrequencyHistogram],
    tables: &DistanceTables,
) -> Result<Vec<u8>> {
    let (m, l) = (tables.num_subspaces(), tables.num_codewords());
    if histograms.len() != m {
        return Err(Error::ShapeMismatch(format!(
            "{} histograms for {m} subspaces",
            histograms.len()
        )));
    }
    let mut votes = vec![0.0; l];
    histograms
        .iter()
        .enumerate()
        .map(|(s, h)| {
            if h.counts.len() != l {
                return Err(Error::ShapeMismatch(format!(
                    "histogram {s} has {} bins, tables have L={l}",
                    h.counts.len()
                )));
            }
            if h.support.is_empty() {
                return Err(Error::EmptyCluster);
            }
            Ok(vote(tables.table(s), l, &h.counts, &h.support, &mut votes) as u8)
        })
        .collect()
}

/// How the update step computes each center.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum UpdateMethod {
    Naive,
    #[default]
    SparseVoting,
}

impl UpdateMethod {
    pub fn name(self) -> &'static str {
        match self {
            UpdateMethod::Naive => "naive",
            UpdateMethod::SparseVoting => "sparse",
        }
    }
}

pub(crate) struct UpdateStats {
    /// Mean nonzero bins over all (cluster, subspace) pairs with members.
    pub mean_nnz: Option<f64>,
}

struct Scratch {
    counts: Vec<u32>,
    touched: Vec<usize>,
    votes: Vec<f64>,
}

/// Recomputes every non-empty cluster's center from `labels`.
pub(crate) fn update_centers(
    codes: &CodeSet,
    labels: &[u32],
    tables: &DistanceTables,
    method: UpdateMethod,
    centers: &mut CodeSet,
) -> UpdateStats {
    let (m, l, k) = (codes.num_subspaces(), codes.num_codewords(), centers.len());

    // Member lists by counting sort; members stay in index order.
    let mut offsets = vec![0usize; k + 1];
    for &c in labels {
        offsets[c as usize + 1] += 1;
    }
    for c in 0..k {
        offsets[c + 1] += offsets[c];
    }
    let mut fill = offsets.clone();
    let mut order = vec![0u32; labels.len()];
    for (n, &c) in labels.iter().enumerate() {
        order[fill[c as usize]] = n as u32;
        fill[c as usize] += 1;
    }

    let bytes = codes.as_bytes();
    let results: Vec<Option<(Vec<u8>, usize)>> = (0..k)
        .into_par_iter()
        .map_init(
            || Scratch {
                counts: vec![0; l],
                touched: Vec::with_capacity(l),
                votes: vec![0.0; l],
            },
            |sc, c| {
                let members = &order[offsets[c]..offsets[c + 1]];
                if members.is_empty() {
                    return None;
                }
                let mut center = vec![0u8; m];
                let mut nnz = 0;
                for (s, slot) in center.iter_mut().enumerate() {
                    let table = tables.table(s);
                    let sub = members.iter().map(|&n| bytes[n as usize * m + s] as usize);
                    *slot = match method {
                        UpdateMethod::Naive => scan(table, l, sub, &mut sc.votes) as u8,
                        UpdateMethod::SparseVoting => {
                            for j in sub {
                                if sc.counts[j] == 0 {
                                    sc.touched.push(j);
                                }
                                sc.counts[j] += 1;
                            }
                            sc.touched.sort_unstable();
                            debug_assert_eq!(
                                sc.touched
                                    .iter()
                                    .map(|&j| sc.counts[j] as usize)
                                    .sum::<usize>(),
                                members.len()
                            );
                            let best = vote(table, l, &sc.counts, &sc.touched, &mut sc.votes);
                            nnz += sc.touched.len();
                            for &j in &sc.touched {
                                sc.counts[j] = 0;
                            }
                            sc.touched.clear();
                            best as u8
                        }
                    };
                }
                Some((center, nnz))
            },
        )
        .collect();

    let mut nnz_sum = 0usize;
    let mut pairs = 0usize;
    for (c, r) in results.into_iter().enumerate() {
        if let Some((center, nnz)) = r {
            centers.code_mut(c).copy_from_slice(&center);
            nnz_sum += nnz;
            pairs += m;
        }
    }
    UpdateStats {
        mean_nnz: (method == UpdateMethod::SparseVoting && pairs > 0)
            .then(|| nnz_sum as f64 / pairs as f64),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pq::{build_distance_tables, Codebook};
    use crate::seed;
    use rand::Rng;

    fn line_tables(points: &[f32]) -> DistanceTables {
        let cb = Codebook::new(1, 1, points.len(), points.to_vec()).unwrap();
        build_distance_tables(&cb)
    }

    /// Exhaustive candidate scan written independently of the module code.
    fn oracle(members: &[Vec<u8>], tables: &DistanceTables) -> Vec<u8> {
        let (m, l) = (tables.num_subspaces(), tables.num_codewords());
        (0..m)
            .map(|s| {
                let mut best = (f64::INFINITY, 0usize);
                for cand in 0..l {
                    let cost: f64 = members
                        .iter()
                        .map(|c| tables.get(s, c[s] as usize, cand))
                        .sum();
                    if cost < best.0 {
                        best = (cost, cand);
                    }
                }
                best.1 as u8
            })
            .collect()
    }

    #[test]
    fn histogram_by_hand() {
        let h = build_histogram(&[2, 2, 3], 4).unwrap();
        assert_eq!(h.counts, vec![0, 0, 2, 1]);
        assert_eq!(h.support, vec![2, 3]);
        assert_eq!(h.nnz(), 2);
        assert_eq!(h.total(), 3);
    }

    #[test]
    fn empty_histogram() {
        let h = build_histogram(&[], 5).unwrap();
        assert_eq!(h.counts, vec![0; 5]);
        assert!(h.support.is_empty());
    }

    #[test]
    fn histogram_rejects_out_of_range() {
        assert!(matches!(
            build_histogram(&[1, 4], 4),
            Err(Error::OutOfRange { value: 4, limit: 4 })
        ));
    }

    #[test]
    fn histogram_matches_tally() {
        let mut rng = seed::rng(5);
        let values: Vec<u8> = (0..100_000).map(|_| rng.random_range(0..200u8)).collect();
        let h = build_histogram(&values, 256).unwrap();
        let mut tally = [0u32; 256];
        for &v in &values {
            tally[v as usize] += 1;
        }
        assert_eq!(h.counts, tally.to_vec());
        let nonzero: Vec<usize> = (0..256).filter(|&i| tally[i] > 0).collect();
        assert_eq!(h.support, nonzero);
        assert_eq!(h.total(), 100_000);
    }

    #[test]
    fn naive_single_member_and_identical_members() {
        let t = line_tables(&[0.0, 1.0, 3.0, 7.0]);
        let one = CodeSet::from_codes(1, 4, &[[2u8]]).unwrap();
        assert_eq!(update_center_naive(&one, &t).unwrap(), vec![2]);
        let same = CodeSet::from_codes(1, 4, &[[3u8], [3], [3]]).unwrap();
        assert_eq!(update_center_naive(&same, &t).unwrap(), vec![3]);
    }

    #[test]
    fn line_example_both_routes() {
        // Members {1, 1, 2} with codewords 0, 1, 2, 10 on a line.
        let t = line_tables(&[0.0, 1.0, 2.0, 10.0]);
        let members = CodeSet::from_codes(1, 4, &[[1u8], [1], [2]]).unwrap();
        assert_eq!(update_center_naive(&members, &t).unwrap(), vec![1]);
        let h = build_histogram(&[1, 1, 2], 4).unwrap();
        assert_eq!(h.counts, vec![0, 2, 1, 0]);
        assert_eq!(update_center_sparse(&[h], &t).unwrap(), vec![1]);
    }

    #[test]
    fn sparse_single_bin_returns_that_bin() {
        let t = line_tables(&[0.0, 1.0, 3.0, 7.0, 8.0]);
        for j in 0..5u8 {
            let h = build_histogram(&[j; 6], 5).unwrap();
            assert_eq!(update_center_sparse(&[h], &t).unwrap(), vec![j]);
        }
    }

    #[test]
    fn errors() {
        let t = line_tables(&[0.0, 1.0]);
        assert!(matches!(
            update_center_naive(&CodeSet::with_capacity(1, 2, 0), &t),
            Err(Error::EmptyCluster)
        ));
        let empty = build_histogram(&[], 2).unwrap();
        assert!(matches!(
            update_center_sparse(&[empty], &t),
            Err(Error::EmptyCluster)
        ));
        let wrong = build_histogram(&[0], 3).unwrap();
        assert!(update_center_sparse(&[wrong], &t).is_err());
        assert!(update_center_sparse(&[], &t).is_err());
    }

    #[test]
    fn routes_agree_with_oracle_on_random_clusters() {
        let mut rng = seed::rng(77);
        for case in 0..300 {
            let m = [1, 2, 4][case % 3];
            let l = [4, 16, 64][rng.random_range(0..3)];
            let words: Vec<f32> = (0..m * 2 * l)
                .map(|_| rng.random_range(-1.0f32..1.0))
                .collect();
            let t = build_distance_tables(&Codebook::new(m * 2, m, l, words).unwrap());
            let nk = rng.random_range(1..200);
            let members: Vec<Vec<u8>> = (0..nk)
                .map(|_| (0..m).map(|_| rng.random_range(0..l) as u8).collect())
                .collect();
            let set = CodeSet::from_codes(m, l, &members).unwrap();
            let naive = update_center_naive(&set, &t).unwrap();
            let hists: Vec<_> = (0..m)
                .map(|s| {
                    build_histogram(&members.iter().map(|c| c[s]).collect::<Vec<_>>(), l).unwrap()
                })
                .collect();
            let sparse = update_center_sparse(&hists, &t).unwrap();
            assert_eq!(naive, oracle(&members, &t));
            assert_eq!(sparse, naive);
        }
    }

    #[test]
    fn batched_update_matches_per_cluster_calls() {
        let mut rng = seed::rng(8);
        let (m, l, k) = (3, 16, 6);
        let words: Vec<f32> = (0..m * l).map(|_| rng.random_range(-1.0f32..1.0)).collect();
        let t = build_distance_tables(&Codebook::new(m, m, l, words).unwrap());
        let codes: Vec<Vec<u8>> = (0..400)
            .map(|_| (0..m).map(|_| rng.random_range(0..l) as u8).collect())
            .collect();
        let codes = CodeSet::from_codes(m, l, &codes).unwrap();
        let labels: Vec<u32> = (0..400).map(|_| rng.random_range(0..k as u32)).collect();
        for method in [UpdateMethod::Naive, UpdateMethod::SparseVoting] {
            let mut centers = codes.select(&[0; 6]);
            let stats = update_centers(&codes, &labels, &t, method, &mut centers);
            for c in 0..k {
                let idx: Vec<usize> = (0..400).filter(|&n| labels[n] == c as u32).collect();
                let want = update_center_naive(&codes.select(&idx), &t).unwrap();
                assert_eq!(centers.code(c), &want[..]);
            }
            match method {
                UpdateMethod::Naive => assert!(stats.mean_nnz.is_none()),
                UpdateMethod::SparseVoting => {
                    let h0 = stats.mean_nnz.unwrap();
                    assert!(h0 >= 1.0 && h0 <= l as f64);
                }
            }
        }
    }
}
