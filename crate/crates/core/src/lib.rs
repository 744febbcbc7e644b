//! Label-guided imputation of labeled time series.
//!
//! A random forest trained on the (initially imputed) series supplies RF-GAP
//! proximities; missing entries are then re-estimated as proximity-weighted
//! averages (or votes) over training series observed at the same time point.
//! The crate also ships the classical baselines, MCAR/MAR/MNAR corruption,
//! and an evaluation harness for reconstruction error and post-imputation
//! classification accuracy.

pub mod data;
pub mod error;
pub mod eval;
pub mod forest;
pub mod impute;
pub mod io;
pub mod missingness;
pub mod rng;
pub mod synthetic;
pub mod transforms;

pub use data::{Dims, FeatureKind, FeatureSchema, MissingMask, TimeSeriesDataset};
pub use error::{Error, Result};
