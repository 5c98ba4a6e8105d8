use std::collections::HashMap;

use crate::dataset::Dataset;
use crate::error::{Error, Result};

/// Per-cluster means of `vectors` in double precision, plus member counts.
pub(crate) fn cluster_means(vectors: &Dataset, labels: &[u32], k: usize) -> (Vec<f64>, Vec<usize>) {
    let d = vectors.dim();
    let mut sums = vec![0.0f64; k * d];
    let mut counts = vec![0usize; k];
    for (row, &c) in vectors.rows().zip(labels) {
        let c = c as usize;
        counts[c] += 1;
        for (s, &x) in sums[c * d..(c + 1) * d].iter_mut().zip(row) {
            *s += x as f64;
        }
    }
    for (c, &count) in counts.iter().enumerate() {
        if count > 0 {
            for s in &mut sums[c * d..(c + 1) * d] {
                *s /= count as f64;
            }
        }
    }
    (sums, counts)
}

pub(crate) fn sq_dist_to(row: &[f32], center: &[f64]) -> f64 {
    row.iter()
        .zip(center)
        .map(|(&x, &c)| {
            let diff = x as f64 - c;
            diff * diff
        })
        .sum()
}

/// Squared distance of each vector to its cluster's center.
pub(crate) fn distances_to_centers(vectors: &Dataset, labels: &[u32], centers: &[f64]) -> Vec<f64> {
    let d = vectors.dim();
    vectors
        .rows()
        .zip(labels)
        .map(|(row, &c)| sq_dist_to(row, &centers[c as usize * d..(c as usize + 1) * d]))
        .collect()
}

/// Mean Euclidean distance of each original vector to the mean of the
/// original vectors sharing its label. The number of clusters is taken from
/// the largest label; labels with no members are ignored.
pub fn original_space_error(vectors: &Dataset, labels: &[u32]) -> Result<f64> {
    if labels.len() != vectors.len() {
        return Err(Error::LengthMismatch {
            expected: vectors.len(),
            found: labels.len(),
        });
    }
    if labels.is_empty() {
        return Err(Error::InvalidArgument("no vectors".into()));
    }
    let k = *labels.iter().max().unwrap() as usize + 1;
    let (means, _) = cluster_means(vectors, labels, k);
    Ok(crate::clustering::objectives(&distances_to_centers(vectors, labels, &means)).0)
}

/// Fraction of unordered point pairs on which two partitions agree.
///
/// Counted through the contingency table rather than by enumerating pairs.
pub fn rand_index(a: &[u32], b: &[u32]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::LengthMismatch {
            expected: a.len(),
            found: b.len(),
        });
    }
    let n = a.len() as u128;
    if n < 2 {
        return Ok(1.0);
    }
    let pairs = |c: u128| c * c.saturating_sub(1) / 2;
    let mut joint: HashMap<(u32, u32), u128> = HashMap::new();
    let mut rows: HashMap<u32, u128> = HashMap::new();
    let mut cols: HashMap<u32, u128> = HashMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let together_both: u128 = joint.values().map(|&c| pairs(c)).sum();
    let together_a: u128 = rows.values().map(|&c| pairs(c)).sum();
    let together_b: u128 = cols.values().map(|&c| pairs(c)).sum();
    let total = pairs(n);
    // Agreeing pairs: together in both, plus apart in both.
    let agree = total + 2 * together_both - together_a - together_b;
    Ok(agree as f64 / total as f64)
}
