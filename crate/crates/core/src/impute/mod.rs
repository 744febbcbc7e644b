//! Imputers: the GAP iterative imputer and the classical baselines behind
//! one registry.

mod baseline;
mod dtw;
mod entry;
mod gap;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use baseline::{
    constant_impute, knn_impute, linear_interpolate, locf, mean_impute, median_impute, mode_impute, nocb,
    rolling_impute, spline_interpolate, ColumnStat, FallbackCounts, KnnMetric, KnnOptions,
};
pub use dtw::dtw_distance;
pub use entry::{impute_categorical_entry, impute_continuous_entry};
pub use gap::{
    gap_impute_fit, gap_impute_test, initial_impute, GapConfig, ImputationPipeline, InitStrategy, InternalMetric,
    IterationDiagnostics,
};

use crate::data::TimeSeriesDataset;
use crate::error::{Error, Result};
use crate::transforms::TransformKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Mean,
    Median,
    Mode,
    Constant,
    Locf,
    Nocb,
    Linear,
    Spline,
    Rolling,
    Knn,
    KnnDtw,
    GapRaw,
    GapSummary,
    GapKernels,
}

impl Method {
    pub const ALL: [Method; 14] = [
        Method::Mean,
        Method::Median,
        Method::Mode,
        Method::Constant,
        Method::Locf,
        Method::Nocb,
        Method::Linear,
        Method::Spline,
        Method::Rolling,
        Method::Knn,
        Method::KnnDtw,
        Method::GapRaw,
        Method::GapSummary,
        Method::GapKernels,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Method::Mean => "mean",
            Method::Median => "median",
            Method::Mode => "mode",
            Method::Constant => "constant",
            Method::Locf => "locf",
            Method::Nocb => "nocb",
            Method::Linear => "linear",
            Method::Spline => "spline",
            Method::Rolling => "rolling",
            Method::Knn => "knn",
            Method::KnnDtw => "knn_dtw",
            Method::GapRaw => "gap_raw",
            Method::GapSummary => "gap_summary",
            Method::GapKernels => "gap_kernels",
        }
    }

    /// Comma-separated registry, used in error messages.
    pub fn registry() -> String {
        Method::ALL.iter().map(|m| m.name()).collect::<Vec<_>>().join(", ")
    }

    pub fn gap_transform(self) -> Option<TransformKind> {
        match self {
            Method::GapRaw => Some(TransformKind::Raw),
            Method::GapSummary => Some(TransformKind::Summary),
            Method::GapKernels => Some(TransformKind::Kernels),
            _ => None,
        }
    }

    pub fn is_gap(self) -> bool {
        self.gap_transform().is_some()
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .copied()
            .find(|m| m.name() == s)
            .ok_or_else(|| Error::UnknownMethod {
                name: s.to_string(),
                registry: Method::registry(),
            })
    }
}

/// Method-specific options. Each method reads only its own fields.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ImputerConfig {
    /// `constant`
    pub constant: f64,
    /// `rolling`: centered window width.
    pub window: usize,
    /// `knn`, `knn_dtw`
    pub knn_k: usize,
    /// `knn_dtw`: Sakoe-Chiba half-width.
    pub dtw_band: Option<usize>,
    /// `gap_*`; the transform is set by the method name.
    pub gap: GapConfig,
}

impl Default for ImputerConfig {
    fn default() -> Self {
        ImputerConfig {
            constant: 0.0,
            window: 3,
            knn_k: 5,
            dtw_band: None,
            gap: GapConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Imputer {
    pub method: Method,
    pub config: ImputerConfig,
}

/// A fitted imputer. Baselines carry no state and are applied to the new
/// data directly; GAP carries its trained pipeline.
#[derive(Debug, Clone, PartialEq)]
pub enum FittedImputer {
    Baseline { method: Method, config: ImputerConfig },
    Gap(Box<ImputationPipeline>),
}

impl Imputer {
    pub fn new(method: Method) -> Self {
        Imputer {
            method,
            config: ImputerConfig::default(),
        }
    }

    pub fn with_config(method: Method, config: ImputerConfig) -> Self {
        Imputer { method, config }
    }

    fn knn_options(&self) -> KnnOptions {
        KnnOptions {
            k: self.config.knn_k,
            metric: if self.method == Method::KnnDtw {
                KnnMetric::Dtw
            } else {
                KnnMetric::Euclidean
            },
            band: self.config.dtw_band,
        }
    }

    fn gap_config(&self) -> Option<GapConfig> {
        self.method.gap_transform().map(|kind| self.config.gap.clone().with_transform(kind))
    }

    /// Imputes without retaining fitted state. Labels are read only by GAP.
    pub fn impute(&self, ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        match self.method {
            Method::Mean => mean_impute(ds),
            Method::Median => median_impute(ds),
            Method::Mode => mode_impute(ds),
            Method::Constant => constant_impute(ds, self.config.constant),
            Method::Locf => locf(ds),
            Method::Nocb => nocb(ds),
            Method::Linear => linear_interpolate(ds),
            Method::Spline => spline_interpolate(ds),
            Method::Rolling => rolling_impute(ds, self.config.window),
            Method::Knn | Method::KnnDtw => knn_impute(ds, &self.knn_options()),
            Method::GapRaw | Method::GapSummary | Method::GapKernels => {
                let cfg = self.gap_config().expect("gap method");
                gap_impute_fit(ds, &cfg).map(|(out, _)| out)
            }
        }
    }

    /// Imputes a labeled training set and returns the state needed to impute
    /// new data.
    pub fn fit(&self, train: &TimeSeriesDataset) -> Result<(TimeSeriesDataset, FittedImputer)> {
        match self.gap_config() {
            Some(cfg) => {
                let (out, pipeline) = gap_impute_fit(train, &cfg)?;
                Ok((out, FittedImputer::Gap(Box::new(pipeline))))
            }
            None => Ok((
                self.impute(train)?,
                FittedImputer::Baseline {
                    method: self.method,
                    config: self.config.clone(),
                },
            )),
        }
    }
}

impl FittedImputer {
    /// Imputes new data. Labels of `ds` are never read.
    pub fn transform(&self, ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        match self {
            FittedImputer::Baseline { method, config } => {
                Imputer::with_config(*method, config.clone()).impute(ds)
            }
            FittedImputer::Gap(pipeline) => gap_impute_test(pipeline, ds),
        }
    }

    pub fn pipeline(&self) -> Option<&ImputationPipeline> {
        match self {
            FittedImputer::Gap(p) => Some(p),
            FittedImputer::Baseline { .. } => None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn registry_round_trips_names() {
        for m in Method::ALL {
            assert_eq!(m.name().parse::<Method>().unwrap(), m);
            let json = serde_json::to_string(&m).unwrap();
            assert_eq!(json, format!("\"{}\"", m.name()));
        }
    }

    #[test]
    fn unknown_method_lists_registry() {
        let err = "gap".parse::<Method>().unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("gap_raw") && msg.contains("knn_dtw"), "{msg}");
    }

    #[test]
    fn baseline_transform_ignores_labels() {
        let ds = TimeSeriesDataset::univariate(&[vec![1.0, f64::NAN, 3.0], vec![2.0, 4.0, 6.0]], vec![0, 1]).unwrap();
        let (_, fitted) = Imputer::new(Method::Linear).fit(&ds).unwrap();
        let relabeled = ds.with_labels(vec![1, 0]).unwrap();
        let a = fitted.transform(&ds).unwrap();
        let b = fitted.transform(&relabeled).unwrap();
        assert_eq!(a.to_nan_values(), b.to_nan_values());
        assert_eq!(a.get(0, 0, 1), Some(2.0));
    }
}
