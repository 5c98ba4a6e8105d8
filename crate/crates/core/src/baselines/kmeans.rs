use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;

use super::metrics::{cluster_means, distances_to_centers, sq_dist_to};
use crate::clustering::repair::repair_empty;
use crate::clustering::{
    check_iterations, check_k, is_converged, millis, objectives, IterationRecord,
};
use crate::dataset::Dataset;
use crate::error::Result;
use crate::seed;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub centers: Dataset,
    pub labels: Vec<u32>,
    pub trace: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub converged: bool,
}

impl KMeansResult {
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }
}

/// Lloyd's algorithm on raw vectors.
///
/// Centers start at `k` distinct random rows. Means are accumulated in double
/// precision and the per-iteration objective is the mean Euclidean distance
/// to those means, which is exactly [`super::original_space_error`] of the
/// labels.
pub fn kmeans_fit(
    vectors: &Dataset,
    k: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<KMeansResult> {
    check_k(k, vectors.len())?;
    check_iterations(max_iterations)?;
    let d = vectors.dim();
    let mut rng = seed::rng(seed);
    let mut centers: Vec<f64> = Vec::with_capacity(k * d);
    for i in sample(&mut rng, vectors.len(), k) {
        centers.extend(vectors.row(i).iter().map(|&x| x as f64));
    }

    let mut labels = Vec::new();
    let mut trace: Vec<IterationRecord> = Vec::new();
    let mut converged = false;
    for iteration in 1..=max_iterations {
        let start = Instant::now();
        let (mut lab, mut dists): (Vec<u32>, Vec<f64>) = vectors
            .as_slice()
            .par_chunks(d)
            .map(|row| nearest(row, &centers, d))
            .collect::<Vec<_>>()
            .into_iter()
            .unzip();
        let moves = repair_empty(&mut lab, &mut dists, k);
        let assign_ms = millis(start);

        let start = Instant::now();
        let (means, _) = cluster_means(vectors, &lab, k);
        centers = means;
        let update_ms = millis(start);

        let (objective, objective_sq) = objectives(&distances_to_centers(vectors, &lab, &centers));
        labels = lab;
        let previous = trace.last().map(|r| r.objective_sq);
        trace.push(IterationRecord {
            iteration,
            objective,
            objective_sq,
            assign_ms,
            update_ms,
            repaired: moves.len(),
            mean_nnz: None,
        });
        if is_converged(previous, objective_sq) {
            converged = true;
            break;
        }
    }
    let centers = Dataset::new(d, centers.iter().map(|&c| c as f32).collect())?;
    Ok(KMeansResult {
        centers,
        labels,
        iterations_run: trace.len(),
        trace,
        converged,
    })
}

fn nearest(row: &[f32], centers: &[f64], d: usize) -> (u32, f64) {
    let mut best = (0u32, f64::INFINITY);
    for (k, c) in centers.chunks_exact(d).enumerate() {
        let dist = sq_dist_to(row, c);
        if dist < best.1 {
            best = (k as u32, dist);
        }
    }
    best
}
