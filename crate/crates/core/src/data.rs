//! Dataset representation shared by every other module.
//!
//! Values live in a flat `N × p × T` buffer indexed as `(n * p + j) * T + t`.
//! The [`MissingMask`] is authoritative: a masked slot's stored value is
//! never read, which [`TimeSeriesDataset::poison_missing`] lets tests check.

use log::warn;
use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

/// Value written into masked slots by [`TimeSeriesDataset::poison_missing`].
pub const POISON: f64 = -8.675309e307;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    Continuous,
    Categorical,
}

/// Per-feature kind plus the ordered class set of categorical features.
/// Categorical values are stored as class indices (`0.0, 1.0, ...`).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    kinds: Vec<FeatureKind>,
    categories: Vec<Vec<String>>,
}

impl FeatureSchema {
    pub fn continuous(p: usize) -> Self {
        FeatureSchema {
            kinds: vec![FeatureKind::Continuous; p],
            categories: vec![Vec::new(); p],
        }
    }

    pub fn new(kinds: Vec<FeatureKind>, categories: Vec<Vec<String>>) -> Result<Self> {
        if kinds.len() != categories.len() {
            return Err(Error::invalid("schema kinds and categories differ in length"));
        }
        for (j, (kind, cats)) in kinds.iter().zip(&categories).enumerate() {
            let ok = match kind {
                FeatureKind::Continuous => cats.is_empty(),
                FeatureKind::Categorical => !cats.is_empty(),
            };
            if !ok {
                return Err(Error::invalid(format!(
                    "feature {j}: categories must be non-empty exactly for categorical features"
                )));
            }
        }
        Ok(FeatureSchema { kinds, categories })
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn kind(&self, j: usize) -> FeatureKind {
        self.kinds[j]
    }

    pub fn is_categorical(&self, j: usize) -> bool {
        self.kinds[j] == FeatureKind::Categorical
    }

    pub fn categories(&self, j: usize) -> &[String] {
        &self.categories[j]
    }

    pub fn n_categories(&self, j: usize) -> usize {
        self.categories[j].len()
    }
}

/// Shape of a dataset: instances, features (channels), time points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Dims {
    pub n: usize,
    pub p: usize,
    pub t: usize,
}

impl Dims {
    pub fn new(n: usize, p: usize, t: usize) -> Self {
        Dims { n, p, t }
    }

    pub fn size(&self) -> usize {
        self.n * self.p * self.t
    }

    #[inline]
    pub fn index(&self, n: usize, j: usize, t: usize) -> usize {
        (n * self.p + j) * self.t + t
    }
}

/// Boolean `N × p × T` array, `true` = missing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MissingMask {
    dims: Dims,
    bits: Vec<bool>,
}

impl MissingMask {
    pub fn none(dims: Dims) -> Self {
        MissingMask {
            dims,
            bits: vec![false; dims.size()],
        }
    }

    pub fn from_bits(dims: Dims, bits: Vec<bool>) -> Result<Self> {
        if bits.len() != dims.size() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} mask bits", dims.size()),
                found: bits.len().to_string(),
            });
        }
        Ok(MissingMask { dims, bits })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bits(&self) -> &[bool] {
        &self.bits
    }

    #[inline]
    pub fn is_missing(&self, n: usize, j: usize, t: usize) -> bool {
        self.bits[self.dims.index(n, j, t)]
    }

    pub fn set(&mut self, n: usize, j: usize, t: usize, missing: bool) {
        let i = self.dims.index(n, j, t);
        self.bits[i] = missing;
    }

    fn series_bits(&self, n: usize, j: usize) -> &[bool] {
        let start = self.dims.index(n, j, 0);
        &self.bits[start..start + self.dims.t]
    }

    pub fn missing_indices(&self, n: usize, j: usize) -> Vec<usize> {
        (0..self.dims.t)
            .filter(|&t| self.series_bits(n, j)[t])
            .collect()
    }

    pub fn observed_indices(&self, n: usize, j: usize) -> Vec<usize> {
        (0..self.dims.t)
            .filter(|&t| !self.series_bits(n, j)[t])
            .collect()
    }

    pub fn missing_count(&self, n: usize, j: usize) -> usize {
        self.series_bits(n, j).iter().filter(|&&b| b).count()
    }

    pub fn observed_count(&self, n: usize, j: usize) -> usize {
        self.dims.t - self.missing_count(n, j)
    }

    pub fn total_missing(&self) -> usize {
        self.bits.iter().filter(|&&b| b).count()
    }
}

/// Labeled `N × p × T` time series array with a missingness mask.
///
/// Equality ignores whatever is stored at masked slots.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TimeSeriesDataset {
    dims: Dims,
    values: Vec<f64>,
    mask: MissingMask,
    labels: Vec<usize>,
    /// Original label for each class index.
    classes: Vec<String>,
    schema: FeatureSchema,
    ids: Option<Vec<String>>,
}

impl PartialEq for TimeSeriesDataset {
    fn eq(&self, other: &Self) -> bool {
        self.dims == other.dims
            && self.mask == other.mask
            && self.labels == other.labels
            && self.classes == other.classes
            && self.schema == other.schema
            && self.ids == other.ids
            && self
                .values
                .iter()
                .zip(&other.values)
                .zip(&self.mask.bits)
                .all(|((a, b), &m)| m || a == b)
    }
}

impl TimeSeriesDataset {
    pub fn new(
        dims: Dims,
        values: Vec<f64>,
        mask: MissingMask,
        labels: Vec<usize>,
        classes: Vec<String>,
        schema: FeatureSchema,
    ) -> Result<Self> {
        if values.len() != dims.size() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} values for {:?}", dims.size(), dims),
                found: values.len().to_string(),
            });
        }
        if mask.dims != dims {
            return Err(Error::DimensionMismatch {
                expected: format!("mask {:?}", dims),
                found: format!("{:?}", mask.dims),
            });
        }
        if labels.len() != dims.n {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels", dims.n),
                found: labels.len().to_string(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&y| y >= classes.len()) {
            return Err(Error::invalid(format!(
                "label index {bad} outside class set of size {}",
                classes.len()
            )));
        }
        if schema.len() != dims.p {
            return Err(Error::DimensionMismatch {
                expected: format!("schema for {} features", dims.p),
                found: schema.len().to_string(),
            });
        }
        for n in 0..dims.n {
            for j in 0..dims.p {
                for t in 0..dims.t {
                    let i = dims.index(n, j, t);
                    if mask.bits[i] {
                        continue;
                    }
                    let v = values[i];
                    if !v.is_finite() {
                        return Err(Error::invalid(format!(
                            "observed value at ({n}, {j}, {t}) is not finite"
                        )));
                    }
                    if schema.is_categorical(j)
                        && (v.fract() != 0.0 || v < 0.0 || v as usize >= schema.n_categories(j))
                    {
                        return Err(Error::invalid(format!(
                            "categorical value {v} at ({n}, {j}, {t}) is not a class index"
                        )));
                    }
                }
            }
        }
        Ok(TimeSeriesDataset {
            dims,
            values,
            mask,
            labels,
            classes,
            schema,
            ids: None,
        })
    }

    /// Builds a continuous dataset from values where NaN marks a missing entry.
    pub fn from_nan_values(
        dims: Dims,
        values: Vec<f64>,
        labels: Vec<usize>,
        classes: Vec<String>,
    ) -> Result<Self> {
        let bits = values.iter().map(|v| v.is_nan()).collect();
        let mask = MissingMask::from_bits(dims, bits)?;
        Self::new(dims, values, mask, labels, classes, FeatureSchema::continuous(dims.p))
    }

    /// Univariate convenience constructor; class names are `"0".."C-1"`.
    pub fn univariate(series: &[Vec<f64>], labels: Vec<usize>) -> Result<Self> {
        let n = series.len();
        let t = series.first().map_or(0, Vec::len);
        if series.iter().any(|s| s.len() != t) {
            return Err(Error::invalid("series have differing lengths"));
        }
        let c = labels.iter().max().map_or(0, |m| m + 1).max(1);
        let classes = (0..c).map(|k| k.to_string()).collect();
        let values = series.iter().flatten().copied().collect();
        Self::from_nan_values(Dims::new(n, 1, t), values, labels, classes)
    }

    pub fn with_ids(mut self, ids: Vec<String>) -> Result<Self> {
        if ids.len() != self.dims.n {
            return Err(Error::DimensionMismatch {
                expected: format!("{} ids", self.dims.n),
                found: ids.len().to_string(),
            });
        }
        self.ids = Some(ids);
        Ok(self)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn n_instances(&self) -> usize {
        self.dims.n
    }

    pub fn n_features(&self) -> usize {
        self.dims.p
    }

    pub fn series_len(&self) -> usize {
        self.dims.t
    }

    pub fn mask(&self) -> &MissingMask {
        &self.mask
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_count(&self) -> usize {
        self.classes.len()
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn ids(&self) -> Option<&[String]> {
        self.ids.as_deref()
    }

    /// Observed value, or `None` for a masked entry.
    #[inline]
    pub fn get(&self, n: usize, j: usize, t: usize) -> Option<f64> {
        let i = self.dims.index(n, j, t);
        if self.mask.bits[i] {
            None
        } else {
            Some(self.values[i])
        }
    }

    #[inline]
    pub fn is_missing(&self, n: usize, j: usize, t: usize) -> bool {
        self.mask.is_missing(n, j, t)
    }

    pub fn observed_series(&self, n: usize, j: usize) -> Vec<(usize, f64)> {
        (0..self.dims.t)
            .filter_map(|t| self.get(n, j, t).map(|v| (t, v)))
            .collect()
    }

    pub fn is_complete(&self) -> bool {
        self.mask.total_missing() == 0
    }

    pub fn missing_fraction(&self) -> f64 {
        if self.dims.size() == 0 {
            0.0
        } else {
            self.mask.total_missing() as f64 / self.dims.size() as f64
        }
    }

    /// Values with NaN at masked positions.
    pub fn to_nan_values(&self) -> Vec<f64> {
        self.values
            .iter()
            .zip(&self.mask.bits)
            .map(|(&v, &m)| if m { f64::NAN } else { v })
            .collect()
    }

    /// Complete value buffer; fails if any entry is masked.
    pub fn complete_values(&self) -> Result<&[f64]> {
        if !self.is_complete() {
            return Err(Error::MissingEntries("this operation"));
        }
        Ok(&self.values)
    }

    /// Returns a complete copy holding `values` (mask cleared).
    pub fn with_complete_values(&self, values: Vec<f64>) -> Result<Self> {
        self.with_values_and_mask(values, MissingMask::none(self.dims))
    }

    pub fn with_values_and_mask(&self, values: Vec<f64>, mask: MissingMask) -> Result<Self> {
        let mut out = Self::new(
            self.dims,
            values,
            mask,
            self.labels.clone(),
            self.classes.clone(),
            self.schema.clone(),
        )?;
        out.ids = self.ids.clone();
        Ok(out)
    }

    /// Same data with different labels (used to check label isolation).
    pub fn with_labels(&self, labels: Vec<usize>) -> Result<Self> {
        let mut out = Self::new(
            self.dims,
            self.values.clone(),
            self.mask.clone(),
            labels,
            self.classes.clone(),
            self.schema.clone(),
        )?;
        out.ids = self.ids.clone();
        Ok(out)
    }

    pub fn with_classes(mut self, classes: Vec<String>) -> Result<Self> {
        if self.labels.iter().any(|&y| y >= classes.len()) {
            return Err(Error::invalid("class dictionary too small for labels"));
        }
        self.classes = classes;
        Ok(self)
    }

    /// Copy with every masked slot overwritten by [`POISON`].
    pub fn poison_missing(&self) -> Self {
        let mut out = self.clone();
        for (v, &m) in out.values.iter_mut().zip(&out.mask.bits) {
            if m {
                *v = POISON;
            }
        }
        out
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Self> {
        let Dims { p, t, .. } = self.dims;
        let dims = Dims::new(indices.len(), p, t);
        let mut values = Vec::with_capacity(dims.size());
        let mut bits = Vec::with_capacity(dims.size());
        for &n in indices {
            if n >= self.dims.n {
                return Err(Error::invalid(format!("instance index {n} out of range")));
            }
            let start = self.dims.index(n, 0, 0);
            values.extend_from_slice(&self.values[start..start + p * t]);
            bits.extend_from_slice(&self.mask.bits[start..start + p * t]);
        }
        let labels = indices.iter().map(|&n| self.labels[n]).collect();
        let mut out = Self::new(
            dims,
            values,
            MissingMask::from_bits(dims, bits)?,
            labels,
            self.classes.clone(),
            self.schema.clone(),
        )?;
        if let Some(ids) = &self.ids {
            out.ids = Some(indices.iter().map(|&n| ids[n].clone()).collect());
        }
        Ok(out)
    }

    /// Raw buffer access for in-crate code that has already checked the mask.
    pub(crate) fn raw_values(&self) -> &[f64] {
        &self.values
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StandardizeScope {
    /// z-normalize each (instance, feature) series separately.
    #[default]
    PerSeries,
    /// One mean/sd per feature over the whole dataset.
    Dataset,
}

/// Location/scale used by [`standardize`], indexed by `(n, j)` for
/// per-series scope and by `j` for dataset scope.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardizationParams {
    pub scope: StandardizeScope,
    pub p: usize,
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
    /// Set where the observed values had zero variance and `sd` was replaced by 1.
    pub degenerate: Vec<bool>,
}

impl StandardizationParams {
    fn slot(&self, n: usize, j: usize) -> usize {
        match self.scope {
            StandardizeScope::PerSeries => n * self.p + j,
            StandardizeScope::Dataset => j,
        }
    }

    pub fn any_degenerate(&self) -> bool {
        self.degenerate.iter().any(|&d| d)
    }
}

fn mean_sd(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Per-series z-normalization over observed entries (population sd).
pub fn standardize(dataset: &TimeSeriesDataset) -> Result<(TimeSeriesDataset, StandardizationParams)> {
    standardize_with(dataset, StandardizeScope::PerSeries)
}

pub fn standardize_with(
    dataset: &TimeSeriesDataset,
    scope: StandardizeScope,
) -> Result<(TimeSeriesDataset, StandardizationParams)> {
    let Dims { n, p, .. } = dataset.dims;
    for j in (0..p).filter(|&j| !dataset.schema.is_categorical(j)) {
        let any = (0..n).any(|i| dataset.mask.observed_count(i, j) > 0);
        if !any {
            return Err(Error::invalid(format!(
                "continuous feature {j} has no observed values"
            )));
        }
    }
    let slots = match scope {
        StandardizeScope::PerSeries => n * p,
        StandardizeScope::Dataset => p,
    };
    let mut params = StandardizationParams {
        scope,
        p,
        means: vec![0.0; slots],
        sds: vec![1.0; slots],
        degenerate: vec![false; slots],
    };
    let mut fit = |slot: usize, obs: &[f64]| {
        if obs.is_empty() {
            params.degenerate[slot] = true;
            return;
        }
        let (mean, sd) = mean_sd(obs);
        params.means[slot] = mean;
        if sd > 0.0 && sd.is_finite() {
            params.sds[slot] = sd;
        } else {
            params.degenerate[slot] = true;
        }
    };
    match scope {
        StandardizeScope::PerSeries => {
            for i in 0..n {
                for j in 0..p {
                    if dataset.schema.is_categorical(j) {
                        continue;
                    }
                    let obs: Vec<f64> = dataset.observed_series(i, j).into_iter().map(|(_, v)| v).collect();
                    fit(i * p + j, &obs);
                }
            }
        }
        StandardizeScope::Dataset => {
            for j in 0..p {
                if dataset.schema.is_categorical(j) {
                    continue;
                }
                let obs: Vec<f64> = (0..n)
                    .flat_map(|i| dataset.observed_series(i, j))
                    .map(|(_, v)| v)
                    .collect();
                fit(j, &obs);
            }
        }
    }
    if params.any_degenerate() {
        warn!("standardize: zero-variance or empty series scaled by 1");
    }
    let out = apply_standardization(dataset, &params)?;
    Ok((out, params))
}

fn check_params(dataset: &TimeSeriesDataset, params: &StandardizationParams) -> Result<()> {
    let Dims { n, p, .. } = dataset.dims;
    if params.p != p || (params.scope == StandardizeScope::PerSeries && params.means.len() != n * p) {
        return Err(Error::DimensionMismatch {
            expected: format!("standardization params for {:?}", dataset.dims),
            found: format!("{} slots", params.means.len()),
        });
    }
    Ok(())
}

/// Standardizes observed entries with previously fitted parameters, e.g.
/// a test set with dataset-scope parameters of its training set.
pub fn apply_standardization(dataset: &TimeSeriesDataset, params: &StandardizationParams) -> Result<TimeSeriesDataset> {
    check_params(dataset, params)?;
    let Dims { n, p, t } = dataset.dims;
    let mut values = dataset.values.clone();
    for i in 0..n {
        for j in (0..p).filter(|&j| !dataset.schema.is_categorical(j)) {
            let s = params.slot(i, j);
            for tt in 0..t {
                let k = dataset.dims.index(i, j, tt);
                if !dataset.mask.bits[k] {
                    values[k] = (values[k] - params.means[s]) / params.sds[s];
                }
            }
        }
    }
    dataset.with_values_and_mask(values, dataset.mask.clone())
}

/// Undo [`standardize`] on every slot (imputed slots included).
pub fn destandardize(dataset: &TimeSeriesDataset, params: &StandardizationParams) -> Result<TimeSeriesDataset> {
    check_params(dataset, params)?;
    let Dims { n, p, t } = dataset.dims;
    let mut values = dataset.values.clone();
    for i in 0..n {
        for j in (0..p).filter(|&j| !dataset.schema.is_categorical(j)) {
            let s = params.slot(i, j);
            for tt in 0..t {
                let k = dataset.dims.index(i, j, tt);
                if !dataset.mask.bits[k] {
                    values[k] = values[k] * params.sds[s] + params.means[s];
                }
            }
        }
    }
    dataset.with_values_and_mask(values, dataset.mask.clone())
}

/// Index partition produced by [`train_test_split`].
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
    pub warnings: Vec<String>,
}

/// Stratified, seeded index split. Classes with a single instance go to train.
pub fn split_indices(labels: &[usize], test_fraction: f64, seed: u64) -> Result<Split> {
    let n = labels.len();
    if !(test_fraction > 0.0 && test_fraction < 1.0) {
        return Err(Error::invalid(format!(
            "test fraction {test_fraction} outside (0, 1)"
        )));
    }
    if n < 2 {
        return Err(Error::invalid("need at least two instances to split"));
    }
    let c = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); c];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }
    let mut warnings = Vec::new();
    let target = ((n as f64 * test_fraction).round() as usize).clamp(1, n - 1);

    // Largest-remainder allocation, leaving at least one instance of each class in train.
    let caps: Vec<usize> = by_class.iter().map(|m| m.len().saturating_sub(1)).collect();
    let exact: Vec<f64> = by_class.iter().map(|m| m.len() as f64 * test_fraction).collect();
    let mut alloc: Vec<usize> = exact
        .iter()
        .zip(&caps)
        .map(|(&e, &cap)| (e.floor() as usize).min(cap))
        .collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.partial_cmp(&fa).unwrap().then(a.cmp(&b))
    });
    let mut assigned: usize = alloc.iter().sum();
    while assigned < target {
        let Some(&k) = order.iter().find(|&&k| alloc[k] < caps[k]) else {
            break;
        };
        alloc[k] += 1;
        assigned += 1;
        order.retain(|&x| x != k);
        order.push(k);
    }
    for (k, members) in by_class.iter().enumerate() {
        if members.len() == 1 {
            let msg = format!("class {k} has a single instance; assigned to train");
            warn!("{msg}");
            warnings.push(msg);
        }
    }

    let mut rng = rng_for(seed, crate::rng::tag("split"));
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (k, members) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng);
        test.extend_from_slice(&shuffled[..alloc[k]]);
        train.extend_from_slice(&shuffled[alloc[k]..]);
    }
    if test.is_empty() || train.is_empty() {
        return Err(Error::invalid("split would leave an empty part"));
    }
    train.sort_unstable();
    test.sort_unstable();
    Ok(Split {
        train,
        test,
        warnings,
    })
}

pub fn train_test_split(
    dataset: &TimeSeriesDataset,
    test_fraction: f64,
    seed: u64,
) -> Result<(TimeSeriesDataset, TimeSeriesDataset, Split)> {
    let split = split_indices(&dataset.labels, test_fraction, seed)?;
    let train = dataset.subset(&split.train)?;
    let test = dataset.subset(&split.test)?;
    Ok((train, test, split))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uni(series: &[Vec<f64>]) -> TimeSeriesDataset {
        TimeSeriesDataset::univariate(series, vec![0; series.len()]).unwrap()
    }

    #[test]
    fn standardize_two_points() {
        let (z, params) = standardize(&uni(&[vec![1.0, 3.0]])).unwrap();
        assert_eq!(z.get(0, 0, 0), Some(-1.0));
        assert_eq!(z.get(0, 0, 1), Some(1.0));
        assert_eq!(params.means[0], 2.0);
        assert_eq!(params.sds[0], 1.0);
        assert!(!params.degenerate[0]);
    }

    #[test]
    fn standardize_constant_is_flagged() {
        let (z, params) = standardize(&uni(&[vec![5.0, 5.0, 5.0]])).unwrap();
        assert_eq!(z.observed_series(0, 0), vec![(0, 0.0), (1, 0.0), (2, 0.0)]);
        assert!(params.degenerate[0]);
        assert_eq!(params.sds[0], 1.0);
    }

    #[test]
    fn standardize_skips_missing() {
        let ds = uni(&[vec![2.0, f64::NAN, 4.0, 6.0]]);
        let (z, _) = standardize(&ds).unwrap();
        // mean 4, population sd sqrt(8/3)
        let sd = (8.0f64 / 3.0).sqrt();
        assert!((z.get(0, 0, 0).unwrap() - (-2.0 / sd)).abs() < 1e-15);
        assert_eq!(z.get(0, 0, 2), Some(0.0));
        assert!((z.get(0, 0, 3).unwrap() - 2.0 / sd).abs() < 1e-15);
        assert!(z.is_missing(0, 0, 1));
        assert_eq!(z.mask(), ds.mask());
    }

    #[test]
    fn standardize_round_trip() {
        let ds = uni(&[vec![1.5, -2.0, f64::NAN, 7.25], vec![0.1, 0.2, 0.3, f64::NAN]]);
        for scope in [StandardizeScope::PerSeries, StandardizeScope::Dataset] {
            let (z, params) = standardize_with(&ds, scope).unwrap();
            let back = destandardize(&z, &params).unwrap();
            for n in 0..2 {
                for t in 0..4 {
                    match (ds.get(n, 0, t), back.get(n, 0, t)) {
                        (Some(a), Some(b)) => assert!((a - b).abs() <= 1e-9 * a.abs().max(1.0)),
                        (None, None) => {}
                        _ => panic!("mask changed"),
                    }
                }
            }
        }
    }

    #[test]
    fn mask_partitions_series() {
        let ds = uni(&[vec![1.0, f64::NAN, 3.0, f64::NAN]]);
        let m = ds.mask();
        assert_eq!(m.missing_indices(0, 0), vec![1, 3]);
        assert_eq!(m.observed_indices(0, 0), vec![0, 2]);
        assert_eq!(m.missing_count(0, 0) + m.observed_count(0, 0), 4);
    }

    #[test]
    fn split_counts_and_determinism() {
        let labels = vec![0, 0, 0, 0, 0, 1, 1, 1, 1, 1];
        let s = split_indices(&labels, 0.3, 0).unwrap();
        assert_eq!(s.train.len(), 7);
        assert_eq!(s.test.len(), 3);
        let test_ones = s.test.iter().filter(|&&i| labels[i] == 1).count();
        assert!((1..=2).contains(&test_ones));
        assert_eq!(s, split_indices(&labels, 0.3, 0).unwrap());
    }

    #[test]
    fn split_rejects_degenerate_fractions() {
        let labels = vec![0, 1, 0, 1];
        assert!(split_indices(&labels, 0.0, 0).is_err());
        assert!(split_indices(&labels, 1.0, 0).is_err());
    }

    #[test]
    fn singleton_class_goes_to_train() {
        let labels = vec![0, 0, 0, 0, 1];
        let s = split_indices(&labels, 0.4, 3).unwrap();
        assert!(s.train.contains(&4));
        assert_eq!(s.warnings.len(), 1);
    }

    #[test]
    fn rejects_nonfinite_observed_and_bad_labels() {
        let dims = Dims::new(1, 1, 2);
        let r = TimeSeriesDataset::new(
            dims,
            vec![1.0, f64::INFINITY],
            MissingMask::none(dims),
            vec![0],
            vec!["a".into()],
            FeatureSchema::continuous(1),
        );
        assert!(r.is_err());
        let r = TimeSeriesDataset::from_nan_values(dims, vec![1.0, 2.0], vec![2], vec!["a".into(), "b".into()]);
        assert!(r.is_err());
    }
}
