use crate::baselines::kmeans_fit;
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::pq::{check_layout, Codebook};
use crate::seed::derive_seed;

/// Learns `l` codewords per subspace by Lloyd's k-means on the sub-vectors.
///
/// Each subspace runs with its own seed derived from `seed`, starts from `l`
/// distinct training rows, and stops after `iterations` rounds or at a fixed
/// point. Empty codewords are moved onto the farthest sub-vector.
pub fn train_codebook(
    train: &Dataset,
    m: usize,
    l: usize,
    iterations: usize,
    seed: u64,
) -> Result<Codebook> {
    let dim = train.dim();
    check_layout(dim, m, l)?;
    if train.len() < l {
        return Err(Error::InsufficientData {
            needed: l,
            got: train.len(),
        });
    }
    if iterations == 0 {
        return Err(Error::InvalidArgument("iterations must be positive".into()));
    }
    let ds = dim / m;
    let mut codewords = Vec::with_capacity(dim * l);
    for s in 0..m {
        let mut sub = Dataset::with_capacity(ds, train.len());
        for row in train.rows() {
            sub.push(&row[s * ds..(s + 1) * ds])?;
        }
        let fitted = kmeans_fit(&sub, l, iterations, derive_seed(seed, s as u64))?;
        codewords.extend_from_slice(fitted.centers.as_slice());
    }
    Codebook::new(dim, m, l, codewords)
}
