//! Reference methods: exact k-means on raw vectors, k-means on binary codes,
//! and the metrics used to compare clusterings across methods.

mod binary;
mod kmeans;
mod metrics;

pub use binary::{
    binarize, bkmeans_fit, hamming, majority_center, Binarizer, BinaryClustering, BinaryCodes,
};
pub use kmeans::{kmeans_fit, KMeansResult};
pub use metrics::{original_space_error, rand_index};
