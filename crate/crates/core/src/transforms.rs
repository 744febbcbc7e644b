//! Feature front-ends that turn a complete dataset into the matrix a forest
//! is trained on: raw values, ten summary statistics per channel, or
//! random dilated convolution kernels (PPV and max per kernel).

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::data::{Dims, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::forest::FeatureMatrix;
use crate::rng::{rng_for, tag};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TransformKind {
    #[default]
    Raw,
    Summary,
    Kernels,
}

/// Number of summary statistics per channel.
pub const SUMMARY_FEATURES: usize = 10;

/// Column names of [`summary_transform`], in output order.
pub const SUMMARY_NAMES: [&str; SUMMARY_FEATURES] = [
    "mean",
    "sd",
    "min",
    "max",
    "median",
    "iqr",
    "skew_proxy",
    "slope",
    "lag1_autocorr",
    "mean_crossings",
];

pub const DEFAULT_KERNEL_COUNT: usize = 500;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Kernel {
    /// Mean-centred weights; length 7, 9 or 11.
    pub weights: Vec<f64>,
    pub bias: f64,
    pub dilation: usize,
    /// Zero padding applied at each end.
    pub padding: usize,
}

impl Kernel {
    fn span(&self) -> usize {
        (self.weights.len() - 1) * self.dilation
    }

    /// Number of activations on a series of length `t`.
    pub fn output_len(&self, t: usize) -> usize {
        (t + 2 * self.padding).saturating_sub(self.span())
    }

    /// Dilated convolution with zero padding; positions outside the series read 0.
    pub fn convolve(&self, x: &[f64]) -> Vec<f64> {
        let out_len = self.output_len(x.len());
        (0..out_len)
            .map(|i| {
                let mut acc = self.bias;
                for (k, &w) in self.weights.iter().enumerate() {
                    let pos = i + k * self.dilation;
                    if pos >= self.padding && pos - self.padding < x.len() {
                        acc += w * x[pos - self.padding];
                    }
                }
                acc
            })
            .collect()
    }

    /// (proportion of positive activations, max activation)
    pub fn features(&self, x: &[f64]) -> (f64, f64) {
        let out_len = self.output_len(x.len());
        let mut positive = 0usize;
        let mut max = f64::NEG_INFINITY;
        for i in 0..out_len {
            let mut acc = self.bias;
            let start = i as isize - self.padding as isize;
            for (k, &w) in self.weights.iter().enumerate() {
                let pos = start + (k * self.dilation) as isize;
                if pos >= 0 && (pos as usize) < x.len() {
                    acc += w * x[pos as usize];
                }
            }
            if acc > 0.0 {
                positive += 1;
            }
            if acc > max {
                max = acc;
            }
        }
        (positive as f64 / out_len as f64, max)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KernelBank {
    pub series_len: usize,
    pub seed: u64,
    pub kernels: Vec<Kernel>,
}

impl KernelBank {
    pub fn len(&self) -> usize {
        self.kernels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kernels.is_empty()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }
}

/// Largest dilation allowed for a kernel of `len` taps on series of length `t`.
pub fn max_dilation(t: usize, len: usize) -> usize {
    ((t.saturating_sub(1)) / (len - 1)).max(1)
}

/// Random kernels: length from {7, 9, 11}, standard normal weights centred
/// to mean zero, bias ~ U(-1, 1), dilation `floor(2^u)` with
/// `u ~ U(0, log2(max_dilation))`, and padding with probability 1/2.
/// A kernel whose receptive field exceeds the (padded) series is redrawn.
pub fn generate_kernels(t: usize, count: usize, seed: u64) -> Result<KernelBank> {
    if count == 0 {
        return Err(Error::invalid("kernel count must be at least 1"));
    }
    if t == 0 {
        return Err(Error::invalid("series length must be at least 1"));
    }
    let mut rng = rng_for(seed, tag("kernels"));
    let mut kernels = Vec::with_capacity(count);
    while kernels.len() < count {
        let mut attempts = 0;
        let kernel = loop {
            attempts += 1;
            let len = [7usize, 9, 11][rng.random_range(0..3)];
            let mut weights: Vec<f64> = (0..len).map(|_| StandardNormal.sample(&mut rng)).collect();
            let mean = weights.iter().sum::<f64>() / len as f64;
            weights.iter_mut().for_each(|w| *w -= mean);
            let bias = rng.random_range(-1.0..1.0);
            let exponent_max = (max_dilation(t, len) as f64).log2();
            let dilation = if exponent_max > 0.0 {
                2f64.powf(rng.random_range(0.0..exponent_max)).floor() as usize
            } else {
                1
            };
            let pad = rng.random_bool(0.5) || attempts > 64;
            let padding = if pad { (len - 1) * dilation / 2 } else { 0 };
            let kernel = Kernel {
                weights,
                bias,
                dilation,
                padding,
            };
            if kernel.output_len(t) > 0 {
                break kernel;
            }
        };
        kernels.push(kernel);
    }
    Ok(KernelBank {
        series_len: t,
        seed,
        kernels,
    })
}

fn complete<'a>(dataset: &'a TimeSeriesDataset, what: &'static str) -> Result<&'a [f64]> {
    if !dataset.is_complete() {
        return Err(Error::MissingEntries(what));
    }
    Ok(dataset.raw_values())
}

/// Flattens each instance to `[channel 0 over time, channel 1 over time, ...]`.
pub fn raw_transform(dataset: &TimeSeriesDataset) -> Result<FeatureMatrix> {
    let values = complete(dataset, "raw_transform")?;
    let Dims { n, p, t } = dataset.dims();
    Ok(FeatureMatrix {
        data: values.to_vec(),
        rows: n,
        cols: p * t,
    })
}

/// Inverse of [`raw_transform`] for a `(p, T)` layout.
pub fn unflatten(matrix: &FeatureMatrix, p: usize, t: usize) -> Result<Vec<f64>> {
    if matrix.cols != p * t {
        return Err(Error::DimensionMismatch {
            expected: format!("{} columns", p * t),
            found: matrix.cols.to_string(),
        });
    }
    Ok(matrix.data.clone())
}

fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let lo = h.floor() as usize;
    let hi = h.ceil() as usize;
    sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
}

/// The ten statistics of [`SUMMARY_NAMES`] for one series.
///
/// Conventions: population sd; quantiles by linear interpolation;
/// skew proxy `3 (mean - median) / sd`; slope of the least-squares line
/// against `t = 0, 1, ...`; lag-1 autocorrelation and skew proxy are 0 for
/// constant series; mean crossings count sign changes of `x - mean`.
pub fn summary_stats(x: &[f64]) -> [f64; SUMMARY_FEATURES] {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let ss: f64 = x.iter().map(|v| (v - mean).powi(2)).sum();
    let sd = (ss / n).sqrt();
    let mut sorted = x.to_vec();
    sorted.sort_by(f64::total_cmp);
    let min = sorted[0];
    let max = sorted[sorted.len() - 1];
    let median = quantile_sorted(&sorted, 0.5);
    let iqr = quantile_sorted(&sorted, 0.75) - quantile_sorted(&sorted, 0.25);
    let skew = if sd > 0.0 { 3.0 * (mean - median) / sd } else { 0.0 };
    let t_mean = (n - 1.0) / 2.0;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (t, v) in x.iter().enumerate() {
        let dt = t as f64 - t_mean;
        sxy += dt * (v - mean);
        sxx += dt * dt;
    }
    let slope = if sxx > 0.0 { sxy / sxx } else { 0.0 };
    let autocorr = if ss > 0.0 {
        x.windows(2).map(|w| (w[0] - mean) * (w[1] - mean)).sum::<f64>() / ss
    } else {
        0.0
    };
    let crossings = x
        .windows(2)
        .filter(|w| (w[0] - mean) * (w[1] - mean) < 0.0)
        .count() as f64;
    [mean, sd, min, max, median, iqr, skew, slope, autocorr, crossings]
}

pub fn summary_transform(dataset: &TimeSeriesDataset) -> Result<FeatureMatrix> {
    let values = complete(dataset, "summary_transform")?;
    let Dims { n, p, t } = dataset.dims();
    if t == 0 {
        return Err(Error::invalid("summary_transform needs non-empty series"));
    }
    let data = values
        .chunks(t)
        .flat_map(summary_stats)
        .collect();
    Ok(FeatureMatrix {
        data,
        rows: n,
        cols: p * SUMMARY_FEATURES,
    })
}

/// Per channel and kernel, `[ppv, max]`; output is `N × (p · 2K)`.
pub fn kernel_transform(dataset: &TimeSeriesDataset, bank: &KernelBank) -> Result<FeatureMatrix> {
    let values = complete(dataset, "kernel_transform")?;
    let Dims { n, p, t } = dataset.dims();
    if t != bank.series_len {
        return Err(Error::DimensionMismatch {
            expected: format!("series length {}", bank.series_len),
            found: t.to_string(),
        });
    }
    let cols = p * 2 * bank.len();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let mut row = Vec::with_capacity(cols);
            for j in 0..p {
                let start = (i * p + j) * t;
                let series = &values[start..start + t];
                for kernel in &bank.kernels {
                    let (ppv, max) = kernel.features(series);
                    row.push(ppv);
                    row.push(max);
                }
            }
            row
        })
        .collect();
    Ok(FeatureMatrix {
        data: rows.into_iter().flatten().collect(),
        rows: n,
        cols,
    })
}

/// A fitted transform: kind, input layout, and any learned state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Transform {
    kind: TransformKind,
    p: usize,
    t: usize,
    output_dim: usize,
    bank: Option<KernelBank>,
}

impl Transform {
    /// Fits on the layout of `dataset`; `kernel_count` is used by the kernel kind only.
    pub fn fit(kind: TransformKind, dataset: &TimeSeriesDataset, kernel_count: usize, seed: u64) -> Result<Self> {
        let Dims { p, t, .. } = dataset.dims();
        let (bank, output_dim) = match kind {
            TransformKind::Raw => (None, p * t),
            TransformKind::Summary => (None, p * SUMMARY_FEATURES),
            TransformKind::Kernels => {
                let bank = generate_kernels(t, kernel_count, seed)?;
                let d = p * 2 * bank.len();
                (Some(bank), d)
            }
        };
        Ok(Transform {
            kind,
            p,
            t,
            output_dim,
            bank,
        })
    }

    /// Rebuilds a fitted transform from persisted state.
    pub fn from_parts(kind: TransformKind, p: usize, t: usize, bank: Option<KernelBank>) -> Result<Self> {
        let output_dim = match (kind, &bank) {
            (TransformKind::Raw, None) => p * t,
            (TransformKind::Summary, None) => p * SUMMARY_FEATURES,
            (TransformKind::Kernels, Some(b)) if b.series_len == t => p * 2 * b.len(),
            (TransformKind::Kernels, Some(b)) => {
                return Err(Error::DimensionMismatch {
                    expected: format!("kernel bank for T = {t}"),
                    found: b.series_len.to_string(),
                })
            }
            (TransformKind::Kernels, None) => return Err(Error::invalid("kernel transform needs a kernel bank")),
            (_, Some(_)) => return Err(Error::invalid("only the kernel transform carries a kernel bank")),
        };
        Ok(Transform {
            kind,
            p,
            t,
            output_dim,
            bank,
        })
    }

    pub fn input_layout(&self) -> (usize, usize) {
        (self.p, self.t)
    }

    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn output_dim(&self) -> usize {
        self.output_dim
    }

    pub fn kernel_bank(&self) -> Option<&KernelBank> {
        self.bank.as_ref()
    }

    pub fn apply(&self, dataset: &TimeSeriesDataset) -> Result<FeatureMatrix> {
        let Dims { p, t, .. } = dataset.dims();
        if (p, t) != (self.p, self.t) {
            return Err(Error::DimensionMismatch {
                expected: format!("(p, T) = ({}, {})", self.p, self.t),
                found: format!("({p}, {t})"),
            });
        }
        let m = match (&self.kind, &self.bank) {
            (TransformKind::Raw, _) => raw_transform(dataset)?,
            (TransformKind::Summary, _) => summary_transform(dataset)?,
            (TransformKind::Kernels, Some(bank)) => kernel_transform(dataset, bank)?,
            (TransformKind::Kernels, None) => {
                return Err(Error::invalid("kernel transform has no kernel bank"))
            }
        };
        debug_assert_eq!(m.cols, self.output_dim);
        Ok(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ds(series: &[Vec<f64>]) -> TimeSeriesDataset {
        TimeSeriesDataset::univariate(series, vec![0; series.len()]).unwrap()
    }

    #[test]
    fn raw_flattens_in_channel_time_order() {
        let m = raw_transform(&ds(&[vec![1.0, 2.0, 3.0]])).unwrap();
        assert_eq!(m.data, vec![1.0, 2.0, 3.0]);
        let dims = Dims::new(1, 2, 2);
        let two = TimeSeriesDataset::from_nan_values(dims, vec![1.0, 2.0, 3.0, 4.0], vec![0], vec!["a".into()]).unwrap();
        let m = raw_transform(&two).unwrap();
        assert_eq!(m.row(0), &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(unflatten(&m, 2, 2).unwrap(), two.complete_values().unwrap());
    }

    #[test]
    fn transforms_reject_missing() {
        let d = ds(&[vec![1.0, f64::NAN]]);
        assert!(raw_transform(&d).is_err());
        assert!(summary_transform(&d).is_err());
    }

    #[test]
    fn summary_of_ramp() {
        let s = summary_stats(&[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(s[0], 2.5);
        assert!((s[1] - 1.25f64.sqrt()).abs() < 1e-15);
        assert_eq!((s[2], s[3], s[4]), (1.0, 4.0, 2.5));
        assert_eq!(s[5], 1.5); // 3.25 - 1.75
        assert_eq!(s[6], 0.0);
        assert!((s[7] - 1.0).abs() < 1e-15);
        // ((-1.5)(-0.5) + (-0.5)(0.5) + (0.5)(1.5)) / 5 = 0.25
        assert!((s[8] - 0.25).abs() < 1e-15);
        assert_eq!(s[9], 1.0);
    }

    #[test]
    fn summary_of_constant() {
        let s = summary_stats(&[3.0; 6]);
        assert_eq!((s[1], s[7], s[8], s[9]), (0.0, 0.0, 0.0, 0.0));
    }

    #[test]
    fn reversal_negates_slope() {
        let x = [0.3, -1.2, 2.5, 0.7, 1.1];
        let r: Vec<f64> = x.iter().rev().copied().collect();
        let (a, b) = (summary_stats(&x), summary_stats(&r));
        assert!((a[7] + b[7]).abs() < 1e-12);
        assert!((a[0] - b[0]).abs() < 1e-12);
        assert!((a[1] - b[1]).abs() < 1e-12);
    }

    #[test]
    fn kernels_are_centred_and_bounded() {
        for t in [3, 10, 150] {
            let bank = generate_kernels(t, 200, 4).unwrap();
            for k in &bank.kernels {
                assert!([7, 9, 11].contains(&k.weights.len()));
                assert!(k.weights.iter().sum::<f64>().abs() < 1e-12);
                assert!(k.dilation <= max_dilation(t, k.weights.len()));
                assert!((-1.0..1.0).contains(&k.bias));
                assert!(k.output_len(t) > 0);
            }
        }
    }

    #[test]
    fn zero_series_activations_equal_bias() {
        let bank = generate_kernels(20, 30, 1).unwrap();
        for k in &bank.kernels {
            let (ppv, max) = k.features(&[0.0; 20]);
            assert_eq!(ppv, if k.bias > 0.0 { 1.0 } else { 0.0 });
            assert_eq!(max, k.bias);
        }
    }

    #[test]
    fn kernel_bank_json_round_trip() {
        let bank = generate_kernels(30, 5, 2).unwrap();
        assert_eq!(KernelBank::from_json(&bank.to_json().unwrap()).unwrap(), bank);
    }

    #[test]
    fn fitted_transform_checks_layout() {
        let train = ds(&[vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0, 7.0, 8.0]]);
        for kind in [TransformKind::Raw, TransformKind::Summary, TransformKind::Kernels] {
            let tr = Transform::fit(kind, &train, 8, 0).unwrap();
            assert_eq!(tr.apply(&train).unwrap().cols, tr.output_dim());
            assert!(tr.apply(&ds(&[vec![1.0, 2.0]])).is_err());
        }
    }
}
