//! Classical imputers.
//!
//! Mean, median, mode and constant fill work time-wise across instances;
//! LOCF, NOCB, interpolation and rolling windows work within one
//! (instance, feature) series; kNN borrows values from similar series.
//! Every function returns a complete copy and leaves observed entries
//! untouched.

use std::cmp::Ordering;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::dtw::dtw_distance;
use crate::data::{Dims, TimeSeriesDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ColumnStat {
    Mean,
    Median,
    Mode,
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

fn median(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let m = values.len();
    if m % 2 == 1 {
        values[m / 2]
    } else {
        (values[m / 2 - 1] + values[m / 2]) / 2.0
    }
}

/// Most frequent value; ties go to the smallest value.
fn mode(values: &mut [f64]) -> f64 {
    values.sort_by(f64::total_cmp);
    let (mut best, mut best_run) = (values[0], 0usize);
    let mut k = 0;
    while k < values.len() {
        let v = values[k];
        let run = values[k..].iter().take_while(|&&x| x == v).count();
        if run > best_run {
            best = v;
            best_run = run;
        }
        k += run;
    }
    best
}

/// Statistic over a non-empty sample. Categorical features always use the mode.
pub(crate) fn stat_of(values: &mut [f64], stat: ColumnStat, categorical: bool) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    Some(match (stat, categorical) {
        (_, true) | (ColumnStat::Mode, _) => mode(values),
        (ColumnStat::Mean, false) => mean(values),
        (ColumnStat::Median, false) => median(values),
    })
}

/// Observed values of `(j, t)` across the instances in `members`.
pub(crate) fn column_values(
    ds: &TimeSeriesDataset,
    j: usize,
    t: usize,
    members: impl Iterator<Item = usize>,
) -> Vec<f64> {
    members.filter_map(|k| ds.get(k, j, t)).collect()
}

/// Time-wise column statistics of a donor dataset with the fallback chain
/// `(label, t)` column → global `t` column → instance statistic → feature
/// statistic.
pub(crate) struct ColumnFill<'a> {
    donors: &'a TimeSeriesDataset,
    stat: ColumnStat,
    /// `[class][j * T + t]`
    by_label: Option<Vec<Vec<Option<f64>>>>,
    /// `[j * T + t]`
    global: Vec<Option<f64>>,
    feature: Vec<f64>,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FallbackCounts {
    pub label_to_global: usize,
    pub global_to_instance: usize,
    pub instance_to_feature: usize,
}

impl FallbackCounts {
    pub fn total(&self) -> usize {
        self.label_to_global + self.global_to_instance + self.instance_to_feature
    }

    pub fn add(&mut self, other: &FallbackCounts) {
        self.label_to_global += other.label_to_global;
        self.global_to_instance += other.global_to_instance;
        self.instance_to_feature += other.instance_to_feature;
    }
}

impl<'a> ColumnFill<'a> {
    pub(crate) fn new(donors: &'a TimeSeriesDataset, stat: ColumnStat, by_label: bool) -> Self {
        let Dims { n, p, t } = donors.dims();
        let schema = donors.schema();
        let column = |members: &[usize]| -> Vec<Option<f64>> {
            (0..p)
                .flat_map(|j| (0..t).map(move |tt| (j, tt)))
                .map(|(j, tt)| {
                    let mut v = column_values(donors, j, tt, members.iter().copied());
                    stat_of(&mut v, stat, schema.is_categorical(j))
                })
                .collect()
        };
        let everyone: Vec<usize> = (0..n).collect();
        let global = column(&everyone);
        let by_label = by_label.then(|| {
            (0..donors.class_count())
                .map(|c| {
                    let members: Vec<usize> = (0..n).filter(|&k| donors.labels()[k] == c).collect();
                    column(&members)
                })
                .collect()
        });
        let feature = (0..p)
            .map(|j| {
                let mut v: Vec<f64> = (0..n)
                    .flat_map(|k| donors.observed_series(k, j))
                    .map(|(_, v)| v)
                    .collect();
                stat_of(&mut v, stat, schema.is_categorical(j)).unwrap_or_else(|| {
                    warn!("feature {j} has no observed values anywhere; filling with 0");
                    0.0
                })
            })
            .collect();
        ColumnFill {
            donors,
            stat,
            by_label,
            global,
            feature,
        }
    }

    /// Fill value for entry `(n, j, t)` of `target`. `label` selects the
    /// label-conditional column when this fill was built `by_label`.
    pub(crate) fn value(
        &self,
        target: &TimeSeriesDataset,
        n: usize,
        j: usize,
        t: usize,
        label: Option<usize>,
        counts: &mut FallbackCounts,
    ) -> f64 {
        let idx = j * self.donors.series_len() + t;
        if let (Some(table), Some(c)) = (&self.by_label, label) {
            if let Some(v) = table.get(c).and_then(|col| col[idx]) {
                return v;
            }
            counts.label_to_global += 1;
        }
        if let Some(v) = self.global[idx] {
            return v;
        }
        counts.global_to_instance += 1;
        let mut own: Vec<f64> = target.observed_series(n, j).into_iter().map(|(_, v)| v).collect();
        if let Some(v) = stat_of(&mut own, self.stat, target.schema().is_categorical(j)) {
            return v;
        }
        counts.instance_to_feature += 1;
        self.feature[j]
    }
}

fn log_fallbacks(what: &str, counts: &FallbackCounts) {
    if counts.total() > 0 {
        warn!(
            "{what}: fallbacks used (label->global {}, global->instance {}, instance->feature {})",
            counts.label_to_global, counts.global_to_instance, counts.instance_to_feature
        );
    }
}

/// Fills every missing entry of `target` from time-wise statistics of `donors`.
pub(crate) fn timewise_fill(
    donors: &TimeSeriesDataset,
    target: &TimeSeriesDataset,
    stat: ColumnStat,
    by_label: bool,
) -> Result<(TimeSeriesDataset, FallbackCounts)> {
    check_layout(donors, target)?;
    let fill = ColumnFill::new(donors, stat, by_label);
    let Dims { n, p, t } = target.dims();
    let mut values = target.to_nan_values();
    let mut counts = FallbackCounts::default();
    for i in 0..n {
        let label = by_label.then(|| target.labels()[i]);
        for j in 0..p {
            for tt in 0..t {
                if target.is_missing(i, j, tt) {
                    values[target.dims().index(i, j, tt)] =
                        fill.value(target, i, j, tt, label, &mut counts);
                }
            }
        }
    }
    Ok((target.with_complete_values(values)?, counts))
}

fn check_layout(a: &TimeSeriesDataset, b: &TimeSeriesDataset) -> Result<()> {
    let (da, db) = (a.dims(), b.dims());
    if (da.p, da.t) != (db.p, db.t) || a.schema() != b.schema() {
        return Err(Error::DimensionMismatch {
            expected: format!("(p, T) = ({}, {}) with matching schema", da.p, da.t),
            found: format!("({}, {})", db.p, db.t),
        });
    }
    Ok(())
}

pub fn mean_impute(ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    let (out, counts) = timewise_fill(ds, ds, ColumnStat::Mean, false)?;
    log_fallbacks("mean_impute", &counts);
    Ok(out)
}

pub fn median_impute(ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    let (out, counts) = timewise_fill(ds, ds, ColumnStat::Median, false)?;
    log_fallbacks("median_impute", &counts);
    Ok(out)
}

pub fn mode_impute(ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    let (out, counts) = timewise_fill(ds, ds, ColumnStat::Mode, false)?;
    log_fallbacks("mode_impute", &counts);
    Ok(out)
}

/// Fills continuous gaps with `value`; categorical gaps get the time-wise mode.
pub fn constant_impute(ds: &TimeSeriesDataset, value: f64) -> Result<TimeSeriesDataset> {
    if !value.is_finite() {
        return Err(Error::invalid("constant fill value must be finite"));
    }
    let mut counts = FallbackCounts::default();
    let fill = ColumnFill::new(ds, ColumnStat::Mode, false);
    let Dims { n, p, t } = ds.dims();
    let mut values = ds.to_nan_values();
    for i in 0..n {
        for j in 0..p {
            for tt in (0..t).filter(|&tt| ds.is_missing(i, j, tt)) {
                values[ds.dims().index(i, j, tt)] = if ds.schema().is_categorical(j) {
                    fill.value(ds, i, j, tt, None, &mut counts)
                } else {
                    value
                };
            }
        }
    }
    ds.with_complete_values(values)
}

/// Applies `fill_series(observed, T)` to every series with at least one
/// observed value; empty series get global time-wise means.
fn per_series(
    ds: &TimeSeriesDataset,
    what: &str,
    fill_series: impl Fn(&[(usize, f64)], usize, bool) -> Vec<f64> + Sync,
) -> Result<TimeSeriesDataset> {
    let Dims { n, p, t } = ds.dims();
    let fill = ColumnFill::new(ds, ColumnStat::Mean, false);
    let mut counts = FallbackCounts::default();
    let mut empty = 0usize;
    let mut values = ds.to_nan_values();
    for i in 0..n {
        for j in 0..p {
            let obs = ds.observed_series(i, j);
            if obs.len() == t {
                continue;
            }
            let start = ds.dims().index(i, j, 0);
            if obs.is_empty() {
                empty += 1;
                for tt in 0..t {
                    values[start + tt] = fill.value(ds, i, j, tt, None, &mut counts);
                }
                continue;
            }
            let filled = fill_series(&obs, t, ds.schema().is_categorical(j));
            for tt in 0..t {
                if ds.is_missing(i, j, tt) {
                    values[start + tt] = filled[tt];
                }
            }
        }
    }
    if empty > 0 {
        warn!("{what}: {empty} series had no observed values; filled with time-wise means");
    }
    ds.with_complete_values(values)
}

/// Last observation carried forward; a leading gap takes the first observed value.
pub fn locf(ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    per_series(ds, "locf", |obs, t, _| {
        let mut out = vec![obs[0].1; t];
        let mut k = 0;
        for (tt, slot) in out.iter_mut().enumerate() {
            while k + 1 < obs.len() && obs[k + 1].0 <= tt {
                k += 1;
            }
            if obs[k].0 <= tt {
                *slot = obs[k].1;
            }
        }
        out
    })
}

/// Next observation carried backward; a trailing gap takes the last observed value.
pub fn nocb(ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    per_series(ds, "nocb", |obs, t, _| {
        let last = obs[obs.len() - 1].1;
        let mut out = vec![last; t];
        let mut k = obs.len() - 1;
        for tt in (0..t).rev() {
            while k > 0 && obs[k - 1].0 >= tt {
                k -= 1;
            }
            if obs[k].0 >= tt {
                out[tt] = obs[k].1;
            }
        }
        out
    })
}

/// Categorical series: nearest observed neighbor, earlier one on ties.
fn nearest_fill(obs: &[(usize, f64)], t: usize) -> Vec<f64> {
    (0..t)
        .map(|tt| {
            obs.iter()
                .min_by_key(|(s, _)| (s.abs_diff(tt), *s))
                .map(|e| e.1)
                .unwrap()
        })
        .collect()
}

fn linear_fill(obs: &[(usize, f64)], t: usize) -> Vec<f64> {
    let mut out = vec![0.0; t];
    let mut k = 0;
    for (tt, slot) in out.iter_mut().enumerate() {
        if tt <= obs[0].0 {
            *slot = obs[0].1;
            continue;
        }
        if tt >= obs[obs.len() - 1].0 {
            *slot = obs[obs.len() - 1].1;
            continue;
        }
        while obs[k + 1].0 < tt {
            k += 1;
        }
        let (t0, v0) = obs[k];
        let (t1, v1) = obs[k + 1];
        *slot = v0 + (v1 - v0) * (tt - t0) as f64 / (t1 - t0) as f64;
    }
    out
}

/// Linear interpolation between observed neighbors, flat beyond the ends.
pub fn linear_interpolate(ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    per_series(ds, "linear_interpolate", |obs, t, categorical| {
        if categorical {
            nearest_fill(obs, t)
        } else {
            linear_fill(obs, t)
        }
    })
}

/// Second derivatives of the natural cubic spline through `(x, y)`.
fn natural_spline_moments(x: &[f64], y: &[f64]) -> Vec<f64> {
    let m = x.len();
    let mut moments = vec![0.0; m];
    if m < 3 {
        return moments;
    }
    // Thomas algorithm on the interior equations.
    let k = m - 2;
    let mut sub = vec![0.0; k];
    let mut diag = vec![0.0; k];
    let mut sup = vec![0.0; k];
    let mut rhs = vec![0.0; k];
    for i in 1..m - 1 {
        let h0 = x[i] - x[i - 1];
        let h1 = x[i + 1] - x[i];
        sub[i - 1] = h0;
        diag[i - 1] = 2.0 * (h0 + h1);
        sup[i - 1] = h1;
        rhs[i - 1] = 6.0 * ((y[i + 1] - y[i]) / h1 - (y[i] - y[i - 1]) / h0);
    }
    for i in 1..k {
        let w = sub[i] / diag[i - 1];
        diag[i] -= w * sup[i - 1];
        rhs[i] -= w * rhs[i - 1];
    }
    moments[k] = rhs[k - 1] / diag[k - 1];
    for i in (0..k - 1).rev() {
        moments[i + 1] = (rhs[i] - sup[i] * moments[i + 2]) / diag[i];
    }
    moments
}

fn spline_fill(obs: &[(usize, f64)], t: usize) -> Vec<f64> {
    if obs.len() < 4 {
        return linear_fill(obs, t);
    }
    let x: Vec<f64> = obs.iter().map(|e| e.0 as f64).collect();
    let y: Vec<f64> = obs.iter().map(|e| e.1).collect();
    let mm = natural_spline_moments(&x, &y);
    let mut k = 0;
    (0..t)
        .map(|tt| {
            let xt = tt as f64;
            if xt <= x[0] {
                return y[0];
            }
            if xt >= x[x.len() - 1] {
                return y[y.len() - 1];
            }
            while x[k + 1] < xt {
                k += 1;
            }
            let h = x[k + 1] - x[k];
            let a = (x[k + 1] - xt) / h;
            let b = (xt - x[k]) / h;
            a * y[k] + b * y[k + 1] + ((a.powi(3) - a) * mm[k] + (b.powi(3) - b) * mm[k + 1]) * h * h / 6.0
        })
        .collect()
}

/// Natural cubic spline through the observed points (linear below four points),
/// flat beyond the observed range.
pub fn spline_interpolate(ds: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
    per_series(ds, "spline_interpolate", |obs, t, categorical| {
        if categorical {
            nearest_fill(obs, t)
        } else {
            spline_fill(obs, t)
        }
    })
}

/// Centered window of `window` points (half-width `window / 2`), clipped at
/// the series ends. A window holding no observed value is widened until it does.
pub fn rolling_impute(ds: &TimeSeriesDataset, window: usize) -> Result<TimeSeriesDataset> {
    if window == 0 {
        return Err(Error::invalid("rolling window must be at least 1"));
    }
    per_series(ds, "rolling_impute", move |obs, t, categorical| {
        let mut present = vec![None; t];
        for &(s, v) in obs {
            present[s] = Some(v);
        }
        (0..t)
            .map(|tt| {
                let mut half = window / 2;
                loop {
                    let lo = tt.saturating_sub(half);
                    let hi = (tt + half).min(t - 1);
                    let mut vals: Vec<f64> = present[lo..=hi].iter().flatten().copied().collect();
                    if let Some(v) = stat_of(&mut vals, ColumnStat::Mean, categorical) {
                        return v;
                    }
                    half += 1;
                }
            })
            .collect()
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KnnMetric {
    #[default]
    Euclidean,
    Dtw,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KnnOptions {
    pub k: usize,
    pub metric: KnnMetric,
    /// Sakoe-Chiba half-width for the DTW metric (widened to the length difference when needed).
    pub band: Option<usize>,
}

impl Default for KnnOptions {
    fn default() -> Self {
        KnnOptions {
            k: 5,
            metric: KnnMetric::Euclidean,
            band: None,
        }
    }
}

/// Distance between series `a` of `x` and series `b` of `y` for feature `j`.
///
/// Euclidean: root mean squared difference over commonly observed time
/// points (`None` without overlap). DTW: distance between the observed
/// sub-sequences divided by their total length.
pub(crate) fn series_distance(
    x: &TimeSeriesDataset,
    a: usize,
    y: &TimeSeriesDataset,
    b: usize,
    j: usize,
    opts: &KnnOptions,
) -> Option<f64> {
    match opts.metric {
        KnnMetric::Euclidean => {
            let mut ss = 0.0;
            let mut overlap = 0usize;
            for t in 0..x.series_len() {
                if let (Some(u), Some(v)) = (x.get(a, j, t), y.get(b, j, t)) {
                    ss += (u - v).powi(2);
                    overlap += 1;
                }
            }
            (overlap > 0).then(|| (ss / overlap as f64).sqrt())
        }
        KnnMetric::Dtw => {
            let sa: Vec<f64> = x.observed_series(a, j).into_iter().map(|e| e.1).collect();
            let sb: Vec<f64> = y.observed_series(b, j).into_iter().map(|e| e.1).collect();
            if sa.is_empty() || sb.is_empty() {
                return None;
            }
            let band = opts.band.map(|w| w.max(sa.len().abs_diff(sb.len())));
            dtw_distance(&sa, &sb, band)
                .ok()
                .map(|d| d / (sa.len() + sb.len()) as f64)
        }
    }
}

/// kNN fill of `target` from `donors`. With `same_dataset` an instance is
/// never its own donor; with `by_label` donors must share the target's label.
pub(crate) fn knn_fill(
    donors: &TimeSeriesDataset,
    target: &TimeSeriesDataset,
    opts: &KnnOptions,
    same_dataset: bool,
    by_label: bool,
) -> Result<(TimeSeriesDataset, FallbackCounts)> {
    check_layout(donors, target)?;
    if opts.k == 0 {
        return Err(Error::invalid("knn k must be at least 1"));
    }
    let Dims { n, p, t } = target.dims();
    let fill = ColumnFill::new(donors, ColumnStat::Mean, by_label);
    let rows: Vec<(Vec<(usize, f64)>, FallbackCounts)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut counts = FallbackCounts::default();
            let mut filled = Vec::new();
            for j in 0..p {
                if target.mask().missing_count(i, j) == 0 {
                    continue;
                }
                let categorical = target.schema().is_categorical(j);
                let mut ranked: Vec<(f64, usize)> = (0..donors.n_instances())
                    .filter(|&k| !(same_dataset && k == i))
                    .filter(|&k| !by_label || donors.labels()[k] == target.labels()[i])
                    .filter_map(|k| series_distance(target, i, donors, k, j, opts).map(|d| (d, k)))
                    .collect();
                ranked.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap_or(Ordering::Equal).then(a.1.cmp(&b.1)));
                for tt in (0..t).filter(|&tt| target.is_missing(i, j, tt)) {
                    let mut neighbours: Vec<f64> = ranked
                        .iter()
                        .filter_map(|&(_, k)| donors.get(k, j, tt))
                        .take(opts.k)
                        .collect();
                    let v = match stat_of(&mut neighbours, ColumnStat::Mean, categorical) {
                        Some(v) => v,
                        None => {
                            let label = by_label.then(|| target.labels()[i]);
                            fill.value(target, i, j, tt, label, &mut counts)
                        }
                    };
                    filled.push((target.dims().index(i, j, tt), v));
                }
            }
            (filled, counts)
        })
        .collect();
    let mut values = target.to_nan_values();
    let mut counts = FallbackCounts::default();
    for (filled, c) in rows {
        counts.add(&c);
        for (idx, v) in filled {
            values[idx] = v;
        }
    }
    Ok((target.with_complete_values(values)?, counts))
}

/// kNN imputation across instances; continuous values are averaged and
/// categorical values voted (ties to the lowest class).
pub fn knn_impute(ds: &TimeSeriesDataset, opts: &KnnOptions) -> Result<TimeSeriesDataset> {
    let (out, counts) = knn_fill(ds, ds, opts, true, false)?;
    log_fallbacks("knn_impute", &counts);
    Ok(out)
}
