//! Evaluation of learned metrics: k-NN error, k-means clustering quality, embeddings and
//! dynamic regret.

pub mod batch;
pub mod embedding;
pub mod kmeans;
pub mod knn;
pub mod nmi;
pub mod regret;

pub use batch::{best_fixed_metric, BatchFit, BatchOptions};
pub use embedding::{embedding_from_metric, EmbeddingMap};
pub use kmeans::{kmeans, kmeans_single, kmeans_with_restarts, KMeansResult};
pub use knn::{knn_error, knn_error_with_metric};
pub use nmi::{exceedance_probability, nmi};
pub use regret::{dyadic_sweep, dynamic_regret, log_log_slope, RegretLedger};
