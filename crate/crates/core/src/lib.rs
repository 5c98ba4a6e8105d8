//! Clustering of product-quantized codes.
//!
//! Vectors are compressed into short PQ codes ([`pq`]) and clustered without
//! ever being decompressed ([`clustering`]): assignment uses the symmetric
//! distance over per-subspace lookup tables and centers are updated by sparse
//! voting over subindex histograms. Exact k-means and binary k-means live in
//! [`baselines`] for comparison, and [`io`] covers the on-disk formats.

pub mod baselines;
pub mod clustering;
mod dataset;
mod error;
pub mod io;
pub mod pq;
pub mod seed;

pub use dataset::Dataset;
pub use error::{Error, Result};

pub use baselines::{
    binarize, bkmeans_fit, hamming, kmeans_fit, majority_center, original_space_error, rand_index,
    Binarizer, BinaryClustering, BinaryCodes, KMeansResult,
};
pub use clustering::{
    assign, build_histogram, estimate_memory, fit, init_centers, pq_cost,
    select_assignment_strategy, update_center_naive, update_center_sparse, AssignStrategy,
    ClusteringResult, FrequencyHistogram, IterationRecord, LinearScan, MemoryEstimate, PqKMeans,
    StrategyRegistry, UpdateMethod,
};
pub use pq::{
    build_distance_tables, decode, encode, encode_all, symmetric_distance_sq, train_codebook,
    CodeSet, Codebook, DistanceTables,
};
