use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::seed::{self, derive_seed};

/// Cluster means are drawn uniformly from `[-HYPERCUBE_HALF_SIDE, HYPERCUBE_HALF_SIDE]^d`.
pub const HYPERCUBE_HALF_SIDE: f32 = 1.0;

/// Isotropic Gaussian mixture with `clusters` components and standard
/// deviation `spread`. Point `i` belongs to component `i % clusters`; the
/// returned labels are those memberships.
pub fn generate_synthetic(
    n: usize,
    d: usize,
    clusters: usize,
    spread: f32,
    seed: u64,
) -> Result<(Dataset, Vec<u32>)> {
    if n == 0 || d == 0 || clusters == 0 {
        return Err(Error::InvalidArgument(format!(
            "n ({n}), d ({d}) and clusters ({clusters}) must be positive"
        )));
    }
    if !(spread.is_finite() && spread >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "spread {spread} must be finite and non-negative"
        )));
    }
    let mut rng = seed::rng(derive_seed(seed, 0));
    let means: Vec<f32> = (0..clusters * d)
        .map(|_| rng.random_range(-HYPERCUBE_HALF_SIDE..=HYPERCUBE_HALF_SIDE))
        .collect();
    let noise = Normal::new(0.0f32, spread).map_err(|e| Error::InvalidArgument(e.to_string()))?;
    let mut rng = seed::rng(derive_seed(seed, 1));
    let mut data = Vec::with_capacity(n * d);
    let mut labels = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % clusters;
        labels.push(c as u32);
        for &mu in &means[c * d..(c + 1) * d] {
            data.push(mu + noise.sample(&mut rng));
        }
    }
    Ok((Dataset::new(d, data)?, labels))
}
