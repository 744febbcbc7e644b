//! Simulated missingness: MCAR, MAR (lagged value above a threshold) and
//! MNAR (own value above a threshold).
//!
//! MAR and MNAR remove eligible entries with probability
//! `min(1, rate * total / eligible)`, where `total` counts the entries that
//! were observed before corruption. Every (instance, feature) series keeps at
//! least one observed value; skips made to honour that are counted in the log.

use std::fmt;
use std::io::{BufRead, Write};
use std::path::Path;
use std::str::FromStr;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::data::{Dims, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::rng::{derive_seed, rng_for, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mechanism {
    #[serde(rename = "MCAR")]
    Mcar,
    #[serde(rename = "MAR")]
    Mar,
    #[serde(rename = "MNAR")]
    Mnar,
}

impl Mechanism {
    pub const ALL: [Mechanism; 3] = [Mechanism::Mcar, Mechanism::Mar, Mechanism::Mnar];

    pub fn name(self) -> &'static str {
        match self {
            Mechanism::Mcar => "MCAR",
            Mechanism::Mar => "MAR",
            Mechanism::Mnar => "MNAR",
        }
    }
}

impl fmt::Display for Mechanism {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Mechanism {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Mechanism::ALL
            .into_iter()
            .find(|m| m.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| Error::invalid(format!("unknown mechanism {s:?}; expected MCAR, MAR or MNAR")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdScope {
    /// Percentile of each (instance, feature) series.
    #[default]
    PerSeries,
    /// Percentile of each feature over the whole dataset.
    Dataset,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionSpec {
    pub mechanism: Mechanism,
    pub rate: f64,
    /// MAR lag in time steps.
    pub lag: usize,
    /// MAR/MNAR threshold percentile in [0, 1].
    pub threshold_percentile: f64,
    /// MAR/MNAR removal probability; calibrated toward `rate` when unset.
    pub removal_probability: Option<f64>,
    pub threshold_scope: ThresholdScope,
    pub seed: u64,
}

impl Default for CorruptionSpec {
    fn default() -> Self {
        CorruptionSpec {
            mechanism: Mechanism::Mcar,
            rate: 0.25,
            lag: 1,
            threshold_percentile: 0.75,
            removal_probability: None,
            threshold_scope: ThresholdScope::PerSeries,
            seed: 0,
        }
    }
}

impl CorruptionSpec {
    pub fn new(mechanism: Mechanism, rate: f64, seed: u64) -> Self {
        CorruptionSpec {
            mechanism,
            rate,
            seed,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate < 1.0) {
            return Err(Error::invalid(format!("rate must lie in (0, 1), got {}", self.rate)));
        }
        if self.lag == 0 {
            return Err(Error::invalid("lag must be at least 1"));
        }
        if !(0.0..=1.0).contains(&self.threshold_percentile) {
            return Err(Error::invalid(format!(
                "threshold_percentile must lie in [0, 1], got {}",
                self.threshold_percentile
            )));
        }
        if let Some(q) = self.removal_probability {
            if !(q > 0.0 && q <= 1.0) {
                return Err(Error::invalid(format!("removal_probability must lie in (0, 1], got {q}")));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Removal {
    pub instance: usize,
    pub feature: usize,
    pub time: usize,
    pub true_value: f64,
    /// MAR/MNAR threshold the deciding value exceeded.
    pub threshold: Option<f64>,
    /// MAR: the value `lag` steps earlier.
    pub lagged_value: Option<f64>,
}

/// Removed entries (ordered by instance, feature, time) and calibration details.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemovalLog {
    pub mechanism: Mechanism,
    pub target_rate: f64,
    /// Entries observed before corruption.
    pub total: usize,
    /// Entries that could be removed by the mechanism.
    pub eligible: usize,
    pub removal_probability: f64,
    /// Draws that would have emptied a series and were skipped.
    pub guard_skips: usize,
    /// `ceil(rate * total) - eligible` when positive.
    pub shortfall: usize,
    pub removals: Vec<Removal>,
}

impl RemovalLog {
    pub fn len(&self) -> usize {
        self.removals.len()
    }

    pub fn is_empty(&self) -> bool {
        self.removals.is_empty()
    }

    pub fn realized_rate(&self) -> f64 {
        if self.total == 0 {
            0.0
        } else {
            self.removals.len() as f64 / self.total as f64
        }
    }

    /// Puts the logged values back into `corrupted`.
    pub fn restore(&self, corrupted: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        restore_entries(corrupted, self.removals.iter().map(|r| (r.instance, r.feature, r.time, r.true_value)))
    }

    /// CSV with header `instance,feature,time,true_value`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "instance,feature,time,true_value")?;
        for r in &self.removals {
            writeln!(w, "{},{},{},{}", r.instance, r.feature, r.time, r.true_value)?;
        }
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = std::io::BufWriter::new(f);
        self.write_csv(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }
}

/// A removal log read back from CSV (positions and true values only).
#[derive(Debug, Clone, PartialEq)]
pub struct LoggedEntries(pub Vec<(usize, usize, usize, f64)>);

impl LoggedEntries {
    pub fn read_csv(path: &Path) -> Result<Self> {
        let f = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut out = Vec::new();
        for (k, line) in std::io::BufReader::new(f).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if k == 0 || line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: k + 1,
                message,
            };
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 4 {
                return Err(parse_err(format!("expected 4 columns, found {}", cols.len())));
            }
            let idx = |s: &str| s.trim().parse::<usize>().map_err(|e| parse_err(format!("{s:?}: {e}")));
            let v = cols[3]
                .trim()
                .parse::<f64>()
                .map_err(|e| parse_err(format!("{:?}: {e}", cols[3])))?;
            out.push((idx(cols[0])?, idx(cols[1])?, idx(cols[2])?, v));
        }
        Ok(LoggedEntries(out))
    }

    pub fn restore(&self, corrupted: &TimeSeriesDataset) -> Result<TimeSeriesDataset> {
        restore_entries(corrupted, self.0.iter().copied())
    }
}

impl From<&RemovalLog> for LoggedEntries {
    fn from(log: &RemovalLog) -> Self {
        LoggedEntries(log.removals.iter().map(|r| (r.instance, r.feature, r.time, r.true_value)).collect())
    }
}

fn restore_entries(
    corrupted: &TimeSeriesDataset,
    entries: impl Iterator<Item = (usize, usize, usize, f64)>,
) -> Result<TimeSeriesDataset> {
    let dims = corrupted.dims();
    let mut values = corrupted.to_nan_values();
    let mut mask = corrupted.mask().clone();
    for (n, j, t, v) in entries {
        if n >= dims.n || j >= dims.p || t >= dims.t {
            return Err(Error::invalid(format!("logged position ({n}, {j}, {t}) outside the dataset")));
        }
        values[dims.index(n, j, t)] = v;
        mask.set(n, j, t, false);
    }
    corrupted.with_values_and_mask(values, mask)
}

/// Linear-interpolation percentile (`q` in [0, 1]) of a non-empty sample.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    v[lo] + (v[hi] - v[lo]) * (pos - lo as f64)
}

/// Threshold per (instance, feature), `[n * p + j]`.
fn thresholds(ds: &TimeSeriesDataset, spec: &CorruptionSpec) -> Vec<Option<f64>> {
    let Dims { n, p, .. } = ds.dims();
    let observed = |i: usize, j: usize| -> Vec<f64> { ds.observed_series(i, j).into_iter().map(|e| e.1).collect() };
    match spec.threshold_scope {
        ThresholdScope::PerSeries => (0..n)
            .flat_map(|i| (0..p).map(move |j| (i, j)))
            .map(|(i, j)| {
                let v = observed(i, j);
                (!v.is_empty()).then(|| percentile(&v, spec.threshold_percentile))
            })
            .collect(),
        ThresholdScope::Dataset => {
            let per_feature: Vec<Option<f64>> = (0..p)
                .map(|j| {
                    let v: Vec<f64> = (0..n).flat_map(|i| observed(i, j)).collect();
                    (!v.is_empty()).then(|| percentile(&v, spec.threshold_percentile))
                })
                .collect();
            (0..n).flat_map(|_| per_feature.iter().copied()).collect()
        }
    }
}

/// A removable entry: time index plus the recorded threshold and lagged value.
type Candidate = (usize, Option<f64>, Option<f64>);

fn candidates(ds: &TimeSeriesDataset, spec: &CorruptionSpec, thr: &[Option<f64>], i: usize, j: usize) -> Vec<Candidate> {
    let t_len = ds.series_len();
    let p = ds.n_features();
    let threshold = thr.get(i * p + j).copied().flatten();
    (0..t_len)
        .filter_map(|t| {
            let v = ds.get(i, j, t)?;
            match spec.mechanism {
                Mechanism::Mcar => Some((t, None, None)),
                Mechanism::Mnar => {
                    let h = threshold?;
                    (v > h).then_some((t, Some(h), None))
                }
                Mechanism::Mar => {
                    let h = threshold?;
                    let lagged = ds.get(i, j, t.checked_sub(spec.lag)?)?;
                    (lagged > h).then_some((t, Some(h), Some(lagged)))
                }
            }
        })
        .collect()
}

/// Corrupts `ds` under `spec`.
pub fn corrupt(ds: &TimeSeriesDataset, spec: &CorruptionSpec) -> Result<(TimeSeriesDataset, RemovalLog)> {
    spec.validate()?;
    let Dims { n, p, t } = ds.dims();
    if spec.mechanism == Mechanism::Mar && t <= spec.lag {
        return Err(Error::invalid(format!("MAR needs T > lag (T = {t}, lag = {})", spec.lag)));
    }
    let thr = if spec.mechanism == Mechanism::Mcar {
        Vec::new()
    } else {
        thresholds(ds, spec)
    };
    let cands: Vec<Vec<Candidate>> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| (0..p).map(move |j| (i, j)).collect::<Vec<_>>())
        .map(|(i, j)| candidates(ds, spec, &thr, i, j))
        .collect();
    let total = n * p * t - ds.mask().total_missing();
    let eligible: usize = cands.iter().map(Vec::len).sum();
    let probability = match (spec.mechanism, spec.removal_probability) {
        (Mechanism::Mcar, _) => spec.rate,
        (_, Some(q)) => q,
        (_, None) if eligible == 0 => 1.0,
        (_, None) => (spec.rate * total as f64 / eligible as f64).min(1.0),
    };
    let wanted = (spec.rate * total as f64).ceil() as usize;
    let shortfall = wanted.saturating_sub(eligible);
    if spec.mechanism != Mechanism::Mcar && shortfall > 0 {
        warn!(
            "{}: eligible pool {eligible} is smaller than the {wanted} entries targeted; removing the whole pool",
            spec.mechanism
        );
    }

    let stream = derive_seed(spec.seed, tag(spec.mechanism.name()));
    let per_instance: Vec<(Vec<Removal>, usize)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut rng = rng_for(stream, i as u64);
            let mut removals = Vec::new();
            let mut skips = 0;
            for j in 0..p {
                let observed = ds.mask().observed_count(i, j);
                let mut chosen: Vec<&Candidate> = cands[i * p + j]
                    .iter()
                    .filter(|_| rng.random::<f64>() < probability)
                    .collect();
                if observed > 0 && chosen.len() >= observed {
                    // keep-one guard: spare the last selected entry
                    chosen.pop();
                    skips += 1;
                }
                removals.extend(chosen.into_iter().map(|&(tt, threshold, lagged_value)| Removal {
                    instance: i,
                    feature: j,
                    time: tt,
                    true_value: ds.get(i, j, tt).expect("candidate is observed"),
                    threshold,
                    lagged_value,
                }));
            }
            (removals, skips)
        })
        .collect();

    let mut removals = Vec::new();
    let mut guard_skips = 0;
    for (r, s) in per_instance {
        removals.extend(r);
        guard_skips += s;
    }
    if guard_skips > 0 {
        warn!("{}: keep-one guard spared {guard_skips} entries", spec.mechanism);
    }
    let mut values = ds.to_nan_values();
    let mut mask = ds.mask().clone();
    for r in &removals {
        values[ds.dims().index(r.instance, r.feature, r.time)] = f64::NAN;
        mask.set(r.instance, r.feature, r.time, true);
    }
    let corrupted = ds.with_values_and_mask(values, mask)?;
    let log = RemovalLog {
        mechanism: spec.mechanism,
        target_rate: spec.rate,
        total,
        eligible,
        removal_probability: probability,
        guard_skips,
        shortfall,
        removals,
    };
    Ok((corrupted, log))
}

pub fn apply_mcar(ds: &TimeSeriesDataset, rate: f64, seed: u64) -> Result<(TimeSeriesDataset, RemovalLog)> {
    corrupt(ds, &CorruptionSpec::new(Mechanism::Mcar, rate, seed))
}

pub fn apply_mar(ds: &TimeSeriesDataset, rate: f64, seed: u64) -> Result<(TimeSeriesDataset, RemovalLog)> {
    corrupt(ds, &CorruptionSpec::new(Mechanism::Mar, rate, seed))
}

pub fn apply_mnar(ds: &TimeSeriesDataset, rate: f64, seed: u64) -> Result<(TimeSeriesDataset, RemovalLog)> {
    corrupt(ds, &CorruptionSpec::new(Mechanism::Mnar, rate, seed))
}

/// Pearson chi-square test of independence on an r x c contingency table.
/// Returns `(statistic, degrees of freedom, p-value)`; rows or columns with a
/// zero margin are dropped.
pub fn chi_square_independence(table: &[Vec<usize>]) -> Result<(f64, usize, f64)> {
    let rows: Vec<&Vec<usize>> = table.iter().filter(|r| r.iter().sum::<usize>() > 0).collect();
    let c = rows.first().map_or(0, |r| r.len());
    let col_sums: Vec<usize> = (0..c).map(|k| rows.iter().map(|r| r[k]).sum()).collect();
    let keep: Vec<usize> = (0..c).filter(|&k| col_sums[k] > 0).collect();
    if rows.len() < 2 || keep.len() < 2 {
        return Err(Error::invalid("chi-square test needs at least a 2x2 table with non-zero margins"));
    }
    let total: f64 = col_sums.iter().sum::<usize>() as f64;
    let mut stat = 0.0;
    for r in &rows {
        let row_sum: f64 = r.iter().sum::<usize>() as f64;
        for &k in &keep {
            let expected = row_sum * col_sums[k] as f64 / total;
            stat += (r[k] as f64 - expected).powi(2) / expected;
        }
    }
    let dof = (rows.len() - 1) * (keep.len() - 1);
    let dist = ChiSquared::new(dof as f64).map_err(|e| Error::invalid(e.to_string()))?;
    Ok((stat, dof, 1.0 - dist.cdf(stat)))
}

/// Chi-square p-value for independence of removal and the value quartile
/// of the original (observed) entries.
pub fn quartile_independence_p(original: &TimeSeriesDataset, log: &RemovalLog) -> Result<f64> {
    let Dims { n, p, t } = original.dims();
    let mut all = Vec::new();
    for i in 0..n {
        for j in 0..p {
            all.extend(original.observed_series(i, j).into_iter().map(|e| e.1));
        }
    }
    if all.is_empty() {
        return Err(Error::invalid("dataset has no observed values"));
    }
    let cuts = [percentile(&all, 0.25), percentile(&all, 0.5), percentile(&all, 0.75)];
    let quartile = |v: f64| cuts.iter().filter(|&&c| v > c).count();
    let mut removed = vec![false; n * p * t];
    for r in &log.removals {
        removed[original.dims().index(r.instance, r.feature, r.time)] = true;
    }
    let mut table = vec![vec![0usize; 2]; 4];
    for i in 0..n {
        for j in 0..p {
            for (tt, v) in original.observed_series(i, j) {
                let gone = removed[original.dims().index(i, j, tt)];
                table[quartile(v)][usize::from(gone)] += 1;
            }
        }
    }
    chi_square_independence(&table).map(|(_, _, pv)| pv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::{Distribution, StandardNormal};

    fn normal_dataset(n: usize, t: usize, seed: u64) -> TimeSeriesDataset {
        let mut rng = rng_for(seed, 7);
        let series: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..t).map(|_| StandardNormal.sample(&mut rng)).collect())
            .collect();
        TimeSeriesDataset::univariate(&series, vec![0; n]).unwrap()
    }

    #[test]
    fn rate_bounds() {
        let ds = normal_dataset(2, 5, 0);
        assert!(apply_mcar(&ds, 0.0, 0).is_err());
        assert!(apply_mcar(&ds, 1.0, 0).is_err());
        assert!(apply_mcar(&ds, 1.5, 0).is_err());
    }

    #[test]
    fn mcar_is_deterministic_and_calibrated() {
        let ds = normal_dataset(100, 200, 1);
        let (a, log) = apply_mcar(&ds, 0.25, 3).unwrap();
        let (b, _) = apply_mcar(&ds, 0.25, 3).unwrap();
        assert_eq!(a.mask(), b.mask());
        let rate = log.realized_rate();
        assert!((0.24..=0.26).contains(&rate), "{rate}");
    }

    #[test]
    fn mnar_removes_only_values_above_threshold() {
        let ds = normal_dataset(50, 100, 2);
        let (_, log) = apply_mnar(&ds, 0.05, 0).unwrap();
        assert!(!log.is_empty());
        assert!(log.removals.iter().all(|r| r.true_value > r.threshold.unwrap()));
        // 25% of entries are eligible, so q = 0.2
        assert!((log.removal_probability - 0.05 * 5000.0 / log.eligible as f64).abs() < 1e-15);
        let rate = log.realized_rate();
        assert!((0.04..=0.06).contains(&rate), "{rate}");
    }

    #[test]
    fn mnar_threshold_above_max_removes_nothing() {
        let ds = normal_dataset(4, 20, 3);
        let spec = CorruptionSpec {
            threshold_percentile: 1.0,
            ..CorruptionSpec::new(Mechanism::Mnar, 0.25, 0)
        };
        let (out, log) = corrupt(&ds, &spec).unwrap();
        assert!(log.is_empty());
        assert_eq!(log.shortfall, 20);
        assert_eq!(out, ds);
    }

    #[test]
    fn mar_decreasing_series_only_early_entries() {
        let series: Vec<Vec<f64>> = (0..20).map(|_| (0..40).rev().map(f64::from).collect()).collect();
        let ds = TimeSeriesDataset::univariate(&series, vec![0; 20]).unwrap();
        let (_, log) = apply_mar(&ds, 0.25, 0).unwrap();
        assert!(!log.is_empty());
        // threshold = 29.25; lagged value 39 - (t - 1) > 29.25 iff t <= 10
        for r in &log.removals {
            assert!(r.time >= 1 && r.time <= 10, "{r:?}");
            assert!(r.lagged_value.unwrap() > r.threshold.unwrap());
        }
    }

    #[test]
    fn keep_one_guard() {
        let ds = TimeSeriesDataset::univariate(&[vec![1.0, 2.0], vec![3.0, 4.0]], vec![0, 1]).unwrap();
        for seed in 0..20 {
            let (out, log) = apply_mcar(&ds, 0.95, seed).unwrap();
            for i in 0..2 {
                assert!(out.mask().observed_count(i, 0) >= 1);
            }
            assert_eq!(log.restore(&out).unwrap(), ds);
        }
    }

    #[test]
    fn log_csv_round_trip() {
        let ds = normal_dataset(10, 30, 4);
        let (out, log) = apply_mnar(&ds, 0.25, 1).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("log.csv");
        log.save_csv(&path).unwrap();
        let read = LoggedEntries::read_csv(&path).unwrap();
        assert_eq!(read, LoggedEntries::from(&log));
        assert_eq!(read.restore(&out).unwrap(), ds);
    }

    #[test]
    fn percentile_matches_linear_rule() {
        assert_eq!(percentile(&[4.0, 1.0, 3.0, 2.0], 0.75), 3.25);
        assert_eq!(percentile(&[5.0], 0.3), 5.0);
    }

    #[test]
    fn chi_square_hand_case() {
        // expected 25 everywhere: stat = 4 * 25 / 25 = 4 with 1 dof
        let (stat, dof, p) = chi_square_independence(&[vec![30, 20], vec![20, 30]]).unwrap();
        assert_eq!(dof, 1);
        assert!((stat - 4.0).abs() < 1e-12);
        assert!((p - 0.0455003).abs() < 1e-6);
    }
}
