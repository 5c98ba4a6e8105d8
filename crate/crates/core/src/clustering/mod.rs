//! k-means over PQ codes.
//!
//! Both centers and inputs are PQ codes. Each iteration labels every code
//! with its nearest center under the symmetric distance, then moves each
//! center to the code minimizing the summed squared distance to its members.
//! Nothing is decoded.

mod assign;
mod memory;
pub(crate) mod repair;
mod update;

use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pq::{CodeSet, DistanceTables};
use crate::seed::{self, derive_seed};

pub use assign::{
    assign, select_assignment_strategy, AssignStrategy, LinearScan, StrategyRegistry,
    SELECTION_QUERIES,
};
pub use memory::{estimate_memory, MemoryEstimate};
pub use update::{
    build_histogram, update_center_naive, update_center_sparse, FrequencyHistogram, UpdateMethod,
};

/// Default iteration cap.
pub const DEFAULT_MAX_ITERATIONS: usize = 20;

/// One row of the per-iteration trace, shared by every clustering method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    /// Mean (non-squared) distance of each point to its center.
    pub objective: f64,
    /// Mean squared distance; the quantity both steps never increase.
    pub objective_sq: f64,
    pub assign_ms: f64,
    pub update_ms: f64,
    /// Empty clusters refilled after this iteration's assignment.
    pub repaired: usize,
    /// Mean nonzero histogram bins per (cluster, subspace), sparse voting only.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub mean_nnz: Option<f64>,
}

pub(crate) fn check_k(k: usize, n: usize) -> Result<()> {
    if k == 0 || k > n {
        return Err(Error::InvalidK { k, n });
    }
    Ok(())
}

pub(crate) fn check_iterations(max_iterations: usize) -> Result<()> {
    if max_iterations == 0 {
        return Err(Error::InvalidArgument(
            "max_iterations must be at least 1".into(),
        ));
    }
    Ok(())
}

/// Stop once the objective reaches zero or repeats exactly.
pub(crate) fn is_converged(previous: Option<f64>, current: f64) -> bool {
    current == 0.0 || previous == Some(current)
}

/// Mean distance and mean squared distance from per-point squared distances.
/// Summed sequentially so the result does not depend on the thread count.
pub(crate) fn objectives(dists_sq: &[f64]) -> (f64, f64) {
    let n = dists_sq.len() as f64;
    let (mut sum, mut sum_sq) = (0.0, 0.0);
    for &d in dists_sq {
        sum += d.sqrt();
        sum_sq += d;
    }
    (sum / n, sum_sq / n)
}

pub(crate) fn millis(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Output of [`PqKMeans::fit`].
#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub centers: CodeSet,
    pub labels: Vec<u32>,
    pub trace: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub converged: bool,
    /// Name of the assignment strategy that won selection.
    pub strategy: String,
}

impl ClusteringResult {
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.objective)
    }

    pub fn total_assign_ms(&self) -> f64 {
        self.trace.iter().map(|r| r.assign_ms).sum()
    }

    pub fn total_update_ms(&self) -> f64 {
        self.trace.iter().map(|r| r.update_ms).sum()
    }

    /// Mean of the per-iteration `mean_nnz` values, if recorded.
    pub fn mean_nnz(&self) -> Option<f64> {
        let vals: Vec<f64> = self.trace.iter().filter_map(|r| r.mean_nnz).collect();
        (!vals.is_empty()).then(|| vals.iter().sum::<f64>() / vals.len() as f64)
    }
}

/// `k` distinct input codes chosen uniformly at random.
pub fn init_centers(codes: &CodeSet, k: usize, seed: u64) -> Result<CodeSet> {
    check_k(k, codes.len())?;
    let mut rng = seed::rng(seed);
    Ok(codes.select(&sample(&mut rng, codes.len(), k).into_vec()))
}

/// Mean symmetric distance from each code to its assigned center.
pub fn pq_cost(
    codes: &CodeSet,
    centers: &CodeSet,
    labels: &[u32],
    tables: &DistanceTables,
) -> Result<f64> {
    codes.check_tables(tables)?;
    centers.check_tables(tables)?;
    if labels.len() != codes.len() {
        return Err(Error::LengthMismatch {
            expected: codes.len(),
            found: labels.len(),
        });
    }
    if codes.is_empty() {
        return Err(Error::InvalidArgument("no codes".into()));
    }
    if let Some(&bad) = labels.iter().find(|&&k| k as usize >= centers.len()) {
        return Err(Error::OutOfRange {
            value: bad as usize,
            limit: centers.len(),
        });
    }
    Ok(objectives(&point_distances(codes, centers, labels, tables)).0)
}

fn point_distances(
    codes: &CodeSet,
    centers: &CodeSet,
    labels: &[u32],
    tables: &DistanceTables,
) -> Vec<f64> {
    codes
        .as_bytes()
        .par_chunks(codes.num_subspaces())
        .zip(labels.par_iter())
        .map(|(c, &k)| tables.sd_sq(c, centers.code(k as usize)))
        .collect()
}

/// Configuration for a PQk-means run.
#[derive(Debug, Clone)]
pub struct PqKMeans {
    pub k: usize,
    pub max_iterations: usize,
    pub seed: u64,
    pub update: UpdateMethod,
    pub strategies: StrategyRegistry,
}

impl PqKMeans {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            max_iterations: DEFAULT_MAX_ITERATIONS,
            seed: 0,
            update: UpdateMethod::default(),
            strategies: StrategyRegistry::default(),
        }
    }

    pub fn max_iterations(mut self, n: usize) -> Self {
        self.max_iterations = n;
        self
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn update(mut self, method: UpdateMethod) -> Self {
        self.update = method;
        self
    }

    pub fn strategies(mut self, registry: StrategyRegistry) -> Self {
        self.strategies = registry;
        self
    }

    /// Initializes centers from `seed` and runs to convergence.
    pub fn fit(&self, codes: &CodeSet, tables: &DistanceTables) -> Result<ClusteringResult> {
        codes.check_tables(tables)?;
        let centers = init_centers(codes, self.k, self.seed)?;
        self.fit_from(codes, tables, centers)
    }

    /// Runs from caller-provided initial centers.
    pub fn fit_from(
        &self,
        codes: &CodeSet,
        tables: &DistanceTables,
        mut centers: CodeSet,
    ) -> Result<ClusteringResult> {
        codes.check_tables(tables)?;
        centers.check_tables(tables)?;
        check_k(self.k, codes.len())?;
        check_iterations(self.max_iterations)?;
        if centers.len() != self.k {
            return Err(Error::LengthMismatch {
                expected: self.k,
                found: centers.len(),
            });
        }
        let chosen = select_assignment_strategy(
            &self.strategies,
            codes,
            &centers,
            tables,
            derive_seed(self.seed, seed::stream::STRATEGY),
        )?;
        let strategy = self.strategies.get(chosen).clone();

        let mut labels = Vec::new();
        let mut trace: Vec<IterationRecord> = Vec::new();
        let mut converged = false;
        for iteration in 1..=self.max_iterations {
            let start = Instant::now();
            let (mut lab, mut dists): (Vec<u32>, Vec<f64>) = strategy
                .assign_all(codes, &centers, tables)
                .into_iter()
                .unzip();
            let moves = repair::repair_empty(&mut lab, &mut dists, self.k);
            for &(c, n) in &moves {
                centers.code_mut(c).copy_from_slice(codes.code(n));
            }
            let assign_ms = millis(start);

            let start = Instant::now();
            let stats = update::update_centers(codes, &lab, tables, self.update, &mut centers);
            let update_ms = millis(start);

            let (objective, objective_sq) =
                objectives(&point_distances(codes, &centers, &lab, tables));
            labels = lab;
            let previous = trace.last().map(|r| r.objective_sq);
            trace.push(IterationRecord {
                iteration,
                objective,
                objective_sq,
                assign_ms,
                update_ms,
                repaired: moves.len(),
                mean_nnz: stats.mean_nnz,
            });
            if is_converged(previous, objective_sq) {
                converged = true;
                break;
            }
        }
        Ok(ClusteringResult {
            centers,
            labels,
            iterations_run: trace.len(),
            trace,
            converged,
            strategy: strategy.name().to_owned(),
        })
    }
}

/// PQk-means with default settings: sparse voting, linear-scan assignment.
pub fn fit(
    codes: &CodeSet,
    tables: &DistanceTables,
    k: usize,
    max_iterations: usize,
    seed: u64,
) -> Result<ClusteringResult> {
    PqKMeans::new(k)
        .max_iterations(max_iterations)
        .seed(seed)
        .fit(codes, tables)
}
