//! Iterative imputation driven by RF-GAP proximities.
//!
//! Training path ([`gap_impute_fit`]):
//!
//! 1. fill gaps with a simple initial imputation (optionally per label);
//! 2. for each iteration, fit the transform and forest on the current
//!    array, compute out-of-bag GAP proximities, and re-estimate *every*
//!    entry (missing and observed) from donors observed at the same time
//!    point; observed entries double as pseudo-missing validation targets;
//! 3. keep the iteration whose re-estimated observed entries score best;
//! 4. return the original observed values plus that iteration's estimates
//!    at the missing positions.
//!
//! Test path ([`gap_impute_test`]): initialize from training statistics
//! (never by label), compute test-to-train proximities with the selected
//! forest once, and impute each missing test entry from training donors.

use log::{debug, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::baseline::{knn_fill, timewise_fill, ColumnFill, ColumnStat, FallbackCounts, KnnOptions};
use super::entry::{impute_categorical_entry, impute_continuous_entry};
use crate::data::{Dims, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::eval::metrics::{accuracy, mae, macro_f1, r2_score, rmse};
use crate::forest::{fit_forest, gap_proximities, gap_proximities_test, Forest, ForestParams, ProximityMatrix};
use crate::rng::{derive_seed, tag};
use crate::transforms::{Transform, TransformKind, DEFAULT_KERNEL_COUNT};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitStrategy {
    #[default]
    TimewiseMean,
    TimewiseMedian,
    Knn,
}

/// Score used to pick the best iteration. `Auto` is R² for continuous and
/// macro-F1 for categorical features. `Rmse`/`Mae` (negated, so larger is
/// better) apply to continuous features and `Accuracy` to categorical ones;
/// the other kind keeps its `Auto` metric.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InternalMetric {
    #[default]
    Auto,
    Rmse,
    Mae,
    Accuracy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GapConfig {
    pub init: InitStrategy,
    /// Condition the initial imputation on the training label.
    pub by_label: bool,
    /// Neighbours for the kNN initialization.
    pub init_k: usize,
    pub transform: TransformKind,
    pub kernel_count: usize,
    pub forest: ForestParams,
    pub max_iters: usize,
    pub metric: InternalMetric,
    /// Rescale weights over donors observed at `t` (otherwise the literal sum).
    pub renormalize: bool,
    /// Carry re-estimated observed entries into the next iteration's model.
    pub update_observed: bool,
    pub seed: u64,
}

impl Default for GapConfig {
    fn default() -> Self {
        GapConfig {
            init: InitStrategy::TimewiseMean,
            by_label: true,
            init_k: 5,
            transform: TransformKind::Raw,
            kernel_count: DEFAULT_KERNEL_COUNT,
            forest: ForestParams::default(),
            max_iters: 5,
            metric: InternalMetric::Auto,
            renormalize: true,
            update_observed: true,
            seed: 0,
        }
    }
}

impl GapConfig {
    pub fn with_transform(mut self, transform: TransformKind) -> Self {
        self.transform = transform;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationDiagnostics {
    /// 1-based.
    pub iteration: usize,
    pub feature_scores: Vec<f64>,
    /// Mean of `feature_scores`.
    pub aggregate: f64,
    /// Rows whose proximities were undefined and replaced by uniform same-label weights.
    pub substituted_rows: usize,
    /// Entries that had no weighted donor and took a time-wise fallback.
    pub entry_fallbacks: usize,
}

/// Everything needed to impute new data the way the training set was imputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImputationPipeline {
    pub config: GapConfig,
    /// Training data as given (mask marks the original gaps).
    pub train: TimeSeriesDataset,
    /// Final imputed training values (observed entries restored).
    pub imputed_train: Vec<f64>,
    pub transform: Transform,
    /// Forest of the selected iteration.
    pub forest: Forest,
    /// 1-based index of the selected iteration.
    pub best_iteration: usize,
    pub diagnostics: Vec<IterationDiagnostics>,
    pub init_fallbacks: FallbackCounts,
}

impl ImputationPipeline {
    pub fn imputed_train_dataset(&self) -> Result<TimeSeriesDataset> {
        self.train.with_complete_values(self.imputed_train.clone())
    }

    pub fn best_diagnostics(&self) -> &IterationDiagnostics {
        &self.diagnostics[self.best_iteration - 1]
    }
}

/// Initial imputation of a labeled dataset.
pub fn initial_impute(
    dataset: &TimeSeriesDataset,
    strategy: InitStrategy,
    by_label: bool,
    knn_k: usize,
) -> Result<TimeSeriesDataset> {
    let (out, counts) = initial_fill(dataset, dataset, strategy, by_label, knn_k, true)?;
    if counts.total() > 0 {
        warn!("initial_impute: {} entries used fallback statistics", counts.total());
    }
    Ok(out)
}

fn initial_fill(
    donors: &TimeSeriesDataset,
    target: &TimeSeriesDataset,
    strategy: InitStrategy,
    by_label: bool,
    knn_k: usize,
    same_dataset: bool,
) -> Result<(TimeSeriesDataset, FallbackCounts)> {
    match strategy {
        InitStrategy::TimewiseMean => timewise_fill(donors, target, ColumnStat::Mean, by_label),
        InitStrategy::TimewiseMedian => timewise_fill(donors, target, ColumnStat::Median, by_label),
        InitStrategy::Knn => {
            let opts = KnnOptions {
                k: knn_k,
                ..Default::default()
            };
            knn_fill(donors, target, &opts, same_dataset, by_label)
        }
    }
}

fn validate(dataset: &TimeSeriesDataset, config: &GapConfig) -> Result<()> {
    if config.max_iters == 0 {
        return Err(Error::invalid("max_iters must be at least 1"));
    }
    if dataset.n_instances() < 2 {
        return Err(Error::invalid("GAP imputation needs at least two training instances"));
    }
    let Dims { n, p, .. } = dataset.dims();
    for i in 0..n {
        for j in 0..p {
            if dataset.mask().observed_count(i, j) == 0 {
                return Err(Error::invalid(format!(
                    "instance {i}, feature {j} has no observed values"
                )));
            }
        }
    }
    Ok(())
}

/// Uniform weights over other training instances with the same label
/// (all other instances when the label is unique).
fn same_label_uniform(i: usize, labels: &[usize]) -> Vec<(usize, f64)> {
    let mut members: Vec<usize> = (0..labels.len())
        .filter(|&k| k != i && labels[k] == labels[i])
        .collect();
    if members.is_empty() {
        members = (0..labels.len()).filter(|&k| k != i).collect();
    }
    let w = 1.0 / members.len() as f64;
    members.into_iter().map(|k| (k, w)).collect()
}

fn feature_score(
    metric: InternalMetric,
    categorical: bool,
    n_classes: usize,
    truth: &[f64],
    estimates: &[f64],
) -> Result<f64> {
    if truth.is_empty() {
        return Ok(0.0);
    }
    if categorical {
        let t: Vec<usize> = truth.iter().map(|&v| v as usize).collect();
        let e: Vec<usize> = estimates.iter().map(|&v| v as usize).collect();
        return match metric {
            InternalMetric::Accuracy => accuracy(&t, &e),
            _ => macro_f1(&t, &e, n_classes),
        };
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let constant = truth.iter().all(|&v| v == mean);
    match metric {
        InternalMetric::Rmse => rmse(truth, estimates).map(|v| -v),
        InternalMetric::Mae => mae(truth, estimates).map(|v| -v),
        _ if constant => Ok(0.0),
        _ => r2_score(truth, estimates),
    }
}

struct Pass {
    values: Vec<f64>,
    fallbacks: usize,
}

/// Re-estimates every entry of every row in `rows` from `prox`.
/// Donors are the observed entries of `donors`.
fn estimate_pass(
    donors: &TimeSeriesDataset,
    target: &TimeSeriesDataset,
    prox: &ProximityMatrix,
    renormalize: bool,
    include_observed: bool,
    fallback: &ColumnFill<'_>,
    target_labels: Option<&[usize]>,
) -> Pass {
    let Dims { n, p, t } = target.dims();
    let schema = donors.schema();
    let rows: Vec<(Vec<(usize, f64)>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let weights = prox.row(i).unwrap_or(&[]);
            let mut out = Vec::new();
            let mut fallbacks = 0usize;
            let mut counts = FallbackCounts::default();
            for j in 0..p {
                let categorical = schema.is_categorical(j);
                for tt in 0..t {
                    if !include_observed && !target.is_missing(i, j, tt) {
                        continue;
                    }
                    let est = if categorical {
                        impute_categorical_entry(
                            weights,
                            |k| donors.get(k, j, tt).map(|v| v as usize),
                            schema.n_categories(j),
                        )
                        .map(|c| c as f64)
                    } else {
                        impute_continuous_entry(weights, |k| donors.get(k, j, tt), renormalize)
                    };
                    let v = est.unwrap_or_else(|| {
                        fallbacks += 1;
                        let label = target_labels.map(|l| l[i]);
                        fallback.value(target, i, j, tt, label, &mut counts)
                    });
                    out.push((target.dims().index(i, j, tt), v));
                }
            }
            (out, fallbacks)
        })
        .collect();
    let mut values = target.to_nan_values();
    let mut fallbacks = 0;
    for (entries, f) in rows {
        fallbacks += f;
        for (idx, v) in entries {
            values[idx] = v;
        }
    }
    Pass { values, fallbacks }
}

/// Fits the iterative GAP imputer on a labeled training set.
pub fn gap_impute_fit(
    dataset: &TimeSeriesDataset,
    config: &GapConfig,
) -> Result<(TimeSeriesDataset, ImputationPipeline)> {
    validate(dataset, config)?;
    let Dims { n, p, t } = dataset.dims();
    let labels = dataset.labels();
    let n_classes = dataset.class_count().max(labels.iter().max().map_or(1, |m| m + 1));
    let schema = dataset.schema();

    let (init, init_fallbacks) =
        initial_fill(dataset, dataset, config.init, config.by_label, config.init_k, true)?;
    let mut current = init.complete_values()?.to_vec();
    let fallback = ColumnFill::new(dataset, ColumnStat::Mean, true);
    let transform_seed = derive_seed(config.seed, tag("transform"));

    let mut diagnostics = Vec::with_capacity(config.max_iters);
    let mut best: Option<(f64, usize, Vec<f64>, Forest, Transform)> = None;
    for iteration in 1..=config.max_iters {
        let current_ds = dataset.with_complete_values(current.clone())?;
        let transform = Transform::fit(config.transform, &current_ds, config.kernel_count, transform_seed)?;
        let features = transform.apply(&current_ds)?;
        let params = ForestParams {
            seed: derive_seed(config.seed, iteration as u64),
            ..config.forest.clone()
        };
        let forest = fit_forest(features.view(), labels, n_classes, &params)?;
        let mut prox = gap_proximities(&forest);
        let undefined = prox.undefined_rows();
        for &i in &undefined {
            prox.set_row(i, same_label_uniform(i, labels));
        }
        if !undefined.is_empty() {
            warn!(
                "gap_impute_fit: iteration {iteration}: {} rows had no out-of-bag tree; using same-label uniform weights",
                undefined.len()
            );
        }
        let pass = estimate_pass(dataset, dataset, &prox, config.renormalize, true, &fallback, Some(labels));

        let mut feature_scores = Vec::with_capacity(p);
        for j in 0..p {
            let mut truth = Vec::new();
            let mut est = Vec::new();
            for i in 0..n {
                for tt in 0..t {
                    if let Some(v) = dataset.get(i, j, tt) {
                        truth.push(v);
                        est.push(pass.values[dataset.dims().index(i, j, tt)]);
                    }
                }
            }
            feature_scores.push(feature_score(
                config.metric,
                schema.is_categorical(j),
                schema.n_categories(j),
                &truth,
                &est,
            )?);
        }
        let aggregate = feature_scores.iter().sum::<f64>() / p as f64;
        debug!("gap_impute_fit: iteration {iteration} internal score {aggregate}");
        diagnostics.push(IterationDiagnostics {
            iteration,
            feature_scores,
            aggregate,
            substituted_rows: undefined.len(),
            entry_fallbacks: pass.fallbacks,
        });

        let next = if config.update_observed {
            pass.values
        } else {
            restore_observed(dataset, pass.values)
        };
        if best.as_ref().is_none_or(|b| aggregate > b.0) {
            best = Some((aggregate, iteration, next.clone(), forest, transform));
        }
        current = next;
    }

    let (_, best_iteration, best_values, forest, transform) = best.expect("max_iters >= 1");
    let imputed_train = restore_observed(dataset, best_values);
    let output = dataset.with_complete_values(imputed_train.clone())?;
    let pipeline = ImputationPipeline {
        config: config.clone(),
        train: dataset.clone(),
        imputed_train,
        transform,
        forest,
        best_iteration,
        diagnostics,
        init_fallbacks,
    };
    Ok((output, pipeline))
}

fn restore_observed(dataset: &TimeSeriesDataset, mut values: Vec<f64>) -> Vec<f64> {
    let Dims { n, p, t } = dataset.dims();
    for i in 0..n {
        for j in 0..p {
            for tt in 0..t {
                if let Some(v) = dataset.get(i, j, tt) {
                    values[dataset.dims().index(i, j, tt)] = v;
                }
            }
        }
    }
    values
}

/// Imputes a test set with a fitted pipeline. Test labels are never read.
pub fn gap_impute_test(pipeline: &ImputationPipeline, test: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    let train = &pipeline.train;
    let (dt, dr) = (test.dims(), train.dims());
    if (dt.p, dt.t) != (dr.p, dr.t) {
        return Err(Error::DimensionMismatch {
            expected: format!("(p, T) = ({}, {})", dr.p, dr.t),
            found: format!("({}, {})", dt.p, dt.t),
        });
    }
    if test.schema() != train.schema() {
        return Err(Error::invalid("test schema differs from training schema"));
    }
    if test.is_complete() {
        return Ok(test.clone());
    }
    let config = &pipeline.config;
    let (init, counts) = initial_fill(train, test, config.init, false, config.init_k, false)?;
    if counts.total() > 0 {
        warn!("gap_impute_test: {} initial entries used fallbacks", counts.total());
    }
    let features = pipeline.transform.apply(&init)?;
    let prox = gap_proximities_test(&pipeline.forest, features.view())?;
    let fallback = ColumnFill::new(train, ColumnStat::Mean, false);
    let pass = estimate_pass(train, test, &prox, config.renormalize, false, &fallback, None);
    if pass.fallbacks > 0 {
        warn!("gap_impute_test: {} entries had no weighted donor", pass.fallbacks);
    }
    test.with_complete_values(pass.values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_config() -> GapConfig {
        GapConfig {
            forest: ForestParams::default().with_trees(40),
            max_iters: 3,
            ..GapConfig::default()
        }
    }

    #[test]
    fn by_label_versus_global_initialization() {
        // t = 0: {4 (A), missing (A), 10 (B)}
        let ds = TimeSeriesDataset::univariate(
            &[vec![4.0, 1.0], vec![f64::NAN, 1.0], vec![10.0, 1.0]],
            vec![0, 0, 1],
        )
        .unwrap();
        let by_label = initial_impute(&ds, InitStrategy::TimewiseMean, true, 5).unwrap();
        assert_eq!(by_label.get(1, 0, 0), Some(4.0));
        let global = initial_impute(&ds, InitStrategy::TimewiseMean, false, 5).unwrap();
        assert_eq!(global.get(1, 0, 0), Some(7.0));
    }

    #[test]
    fn complete_data_is_returned_unchanged() {
        let ds = TimeSeriesDataset::univariate(
            &[vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0], vec![-1.0, 0.0, 1.0], vec![0.0, 0.5, 0.0]],
            vec![0, 0, 1, 1],
        )
        .unwrap();
        let (out, pipeline) = gap_impute_fit(&ds, &small_config()).unwrap();
        assert_eq!(out, ds);
        assert_eq!(pipeline.diagnostics.len(), 3);
        assert_eq!(gap_impute_test(&pipeline, &ds).unwrap(), ds);
    }

    #[test]
    fn best_iteration_is_first_argmax() {
        let ds = TimeSeriesDataset::univariate(
            &[
                vec![1.0, f64::NAN, 1.2, 0.9],
                vec![1.1, 1.0, f64::NAN, 1.0],
                vec![0.9, 1.1, 1.0, 1.0],
                vec![-1.0, -1.1, f64::NAN, -0.9],
                vec![-1.2, f64::NAN, -1.0, -1.0],
                vec![-0.9, -1.0, -1.1, -1.0],
            ],
            vec![0, 0, 0, 1, 1, 1],
        )
        .unwrap();
        let (_, pipeline) = gap_impute_fit(&ds, &small_config()).unwrap();
        let scores: Vec<f64> = pipeline.diagnostics.iter().map(|d| d.aggregate).collect();
        let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let first = scores.iter().position(|&s| s == max).unwrap() + 1;
        assert_eq!(pipeline.best_iteration, first);
        for d in &pipeline.diagnostics {
            let mean = d.feature_scores.iter().sum::<f64>() / d.feature_scores.len() as f64;
            assert_eq!(d.aggregate, mean);
        }
    }

    #[test]
    fn rejects_empty_series_and_zero_iterations() {
        let ds = TimeSeriesDataset::univariate(&[vec![f64::NAN, f64::NAN], vec![1.0, 2.0]], vec![0, 1]).unwrap();
        assert!(gap_impute_fit(&ds, &small_config()).is_err());
        let ok = TimeSeriesDataset::univariate(&[vec![0.0, 1.0], vec![1.0, 2.0]], vec![0, 1]).unwrap();
        let cfg = GapConfig {
            max_iters: 0,
            ..small_config()
        };
        assert!(gap_impute_fit(&ok, &cfg).is_err());
    }

    #[test]
    fn same_label_uniform_rows() {
        let row = same_label_uniform(0, &[0, 1, 0, 0]);
        assert_eq!(row, vec![(2, 0.5), (3, 0.5)]);
        let lonely = same_label_uniform(1, &[0, 1, 0]);
        assert_eq!(lonely, vec![(0, 0.5), (2, 0.5)]);
    }
}
