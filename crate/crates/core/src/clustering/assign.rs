//! Assignment step and the pluggable nearest-center search.

use std::sync::Arc;
use std::time::Instant;

use rand::seq::index::sample;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::pq::{CodeSet, DistanceTables};
use crate::seed;

/// Finds the nearest center of each code by squared symmetric distance.
///
/// Implementations must return the lowest center index among ties so that
/// every strategy yields the same labels.
pub trait AssignStrategy: Send + Sync {
    fn name(&self) -> &str;

    /// `(center index, squared distance)` of the nearest center.
    fn nearest(&self, code: &[u8], centers: &CodeSet, tables: &DistanceTables) -> (u32, f64);

    /// Labels every code. Strategies that index the centers once per step
    /// override this; the default runs [`AssignStrategy::nearest`] in parallel.
    fn assign_all(
        &self,
        codes: &CodeSet,
        centers: &CodeSet,
        tables: &DistanceTables,
    ) -> Vec<(u32, f64)> {
        codes
            .as_bytes()
            .par_chunks(codes.num_subspaces())
            .map(|c| self.nearest(c, centers, tables))
            .collect()
    }
}

/// Compares each code against every center.
#[derive(Debug, Default, Clone, Copy)]
pub struct LinearScan;

impl AssignStrategy for LinearScan {
    fn name(&self) -> &str {
        "linear-scan"
    }

    fn nearest(&self, code: &[u8], centers: &CodeSet, tables: &DistanceTables) -> (u32, f64) {
        let mut best = (0u32, f64::INFINITY);
        for (k, center) in centers.iter().enumerate() {
            let d = tables.sd_sq(code, center);
            if d < best.1 {
                best = (k as u32, d);
            }
        }
        best
    }
}

/// Strategies eligible for the timing bake-off before clustering starts.
#[derive(Clone)]
pub struct StrategyRegistry {
    strategies: Vec<Arc<dyn AssignStrategy>>,
}

impl Default for StrategyRegistry {
    fn default() -> Self {
        Self {
            strategies: vec![Arc::new(LinearScan)],
        }
    }
}

impl std::fmt::Debug for StrategyRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_list()
            .entries(self.strategies.iter().map(|s| s.name()))
            .finish()
    }
}

impl StrategyRegistry {
    pub fn empty() -> Self {
        Self {
            strategies: Vec::new(),
        }
    }

    pub fn register(&mut self, strategy: Arc<dyn AssignStrategy>) -> &mut Self {
        self.strategies.push(strategy);
        self
    }

    pub fn len(&self) -> usize {
        self.strategies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.strategies.is_empty()
    }

    pub fn get(&self, i: usize) -> &Arc<dyn AssignStrategy> {
        &self.strategies[i]
    }

    pub fn names(&self) -> Vec<String> {
        self.strategies
            .iter()
            .map(|s| s.name().to_owned())
            .collect()
    }
}

/// Number of sampled queries each strategy answers during selection.
pub const SELECTION_QUERIES: usize = 10;

/// Times every registered strategy on the same sampled queries and returns
/// the index of the fastest. A single registered strategy wins unconditionally.
pub fn select_assignment_strategy(
    registry: &StrategyRegistry,
    codes: &CodeSet,
    centers: &CodeSet,
    tables: &DistanceTables,
    seed: u64,
) -> Result<usize> {
    if registry.is_empty() {
        return Err(Error::InvalidArgument(
            "no assignment strategy registered".into(),
        ));
    }
    if codes.is_empty() {
        return Err(Error::InvalidArgument(
            "strategy selection needs a non-empty sample".into(),
        ));
    }
    codes.check_tables(tables)?;
    centers.check_tables(tables)?;
    if registry.len() == 1 {
        return Ok(0);
    }
    let mut rng = seed::rng(seed);
    let queries = sample(&mut rng, codes.len(), SELECTION_QUERIES.min(codes.len())).into_vec();
    let mut best = (0, f64::INFINITY);
    for (i, strategy) in registry.strategies.iter().enumerate() {
        let start = Instant::now();
        for &q in &queries {
            std::hint::black_box(strategy.nearest(codes.code(q), centers, tables));
        }
        let elapsed = start.elapsed().as_secs_f64();
        if elapsed < best.1 {
            best = (i, elapsed);
        }
    }
    Ok(best.0)
}

/// Nearest-center labels by linear scan.
pub fn assign(codes: &CodeSet, centers: &CodeSet, tables: &DistanceTables) -> Result<Vec<u32>> {
    codes.check_tables(tables)?;
    centers.check_tables(tables)?;
    if centers.is_empty() {
        return Err(Error::InvalidArgument("no centers".into()));
    }
    Ok(LinearScan
        .assign_all(codes, centers, tables)
        .into_iter()
        .map(|(k, _)| k)
        .collect())
}
