//! Reconstruction error, post-imputation classification and rank aggregation.

pub mod benchmark;
mod knn;
pub mod metrics;
mod ranks;

pub use knn::knn_classify;
pub use metrics::{accuracy, confusion_matrix, mae, macro_f1, r2_score, rmse};
pub use ranks::{average_ranks, rank_with_ties};
pub use benchmark::{
    rmse_at_removed, run_benchmark, BenchmarkConfig, BenchmarkOptions, BenchmarkReport, DatasetSpec, RankRow, Record,
};
