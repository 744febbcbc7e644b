//! Resumable benchmark grid over datasets, mechanisms, rates, methods and seeds.
//!
//! Each cell standardizes the data, corrupts train and test, imputes the
//! training set (fit) and the test set (transform), then trains a random
//! forest and a k-NN classifier on the imputed training series and scores
//! them on the imputed test series. Finished cells are appended to
//! `records.jsonl` as they complete; the final report is sorted, so it does
//! not depend on scheduling.

use std::collections::{BTreeMap, HashSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use log::{info, warn};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::knn::knn_classify;
use super::metrics::{accuracy, rmse};
use super::ranks::average_ranks;
use crate::data::{standardize_with, StandardizeScope, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::forest::{fit_forest, ForestParams};
use crate::impute::{Imputer, ImputerConfig, Method};
use crate::missingness::{corrupt, CorruptionSpec, Mechanism, RemovalLog, ThresholdScope};
use crate::rng::{derive_seed, tag};
use crate::synthetic::SyntheticSpec;
use crate::transforms::raw_transform;

pub const CONFIG_VERSION: u32 = 1;

/// A dataset entry of the benchmark config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum DatasetSpec {
    /// `<data_dir>/<name>/<name>_TRAIN.tsv` (or `<data_dir>/<name>_TRAIN.tsv`) and its `_TEST` twin.
    Name(String),
    Files(FileDataset),
    Synthetic(SyntheticDataset),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileDataset {
    pub name: String,
    pub train: PathBuf,
    /// Without a test file the training file is split by `test_fraction`.
    #[serde(default)]
    pub test: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticDataset {
    pub name: String,
    pub synthetic: SyntheticSpec,
    /// Test instances generated with a derived seed.
    pub n_test: usize,
}

impl DatasetSpec {
    pub fn name(&self) -> &str {
        match self {
            DatasetSpec::Name(n) => n,
            DatasetSpec::Files(f) => &f.name,
            DatasetSpec::Synthetic(s) => &s.name,
        }
    }
}

/// Corruption options shared by every cell; mechanism, rate and seed come from the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorruptionOptions {
    pub lag: usize,
    pub threshold_percentile: f64,
    pub removal_probability: Option<f64>,
    pub threshold_scope: ThresholdScope,
}

impl Default for CorruptionOptions {
    fn default() -> Self {
        let d = CorruptionSpec::default();
        CorruptionOptions {
            lag: d.lag,
            threshold_percentile: d.threshold_percentile,
            removal_probability: d.removal_probability,
            threshold_scope: d.threshold_scope,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Standardize {
    #[default]
    PerSeries,
    Dataset,
    None,
}

fn default_version() -> u32 {
    CONFIG_VERSION
}
fn default_knn_k() -> usize {
    1
}
fn default_true() -> bool {
    true
}
fn default_test_fraction() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BenchmarkConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub datasets: Vec<DatasetSpec>,
    pub methods: Vec<Method>,
    pub mechanisms: Vec<Mechanism>,
    pub rates: Vec<f64>,
    pub seeds: Vec<u64>,
    /// Directory for named datasets; relative to the config file.
    #[serde(default)]
    pub data_dir: Option<PathBuf>,
    #[serde(default)]
    pub imputer: ImputerConfig,
    #[serde(default)]
    pub corruption: CorruptionOptions,
    /// Forest of the random-forest classifier (its seed is replaced by the cell seed).
    #[serde(default)]
    pub classifier_forest: ForestParams,
    #[serde(default = "default_knn_k")]
    pub knn_k: usize,
    /// Corrupt the test split with the same mechanism and rate as training.
    #[serde(default = "default_true")]
    pub corrupt_test: bool,
    #[serde(default)]
    pub standardize: Standardize,
    /// Used for file datasets without a test file.
    #[serde(default = "default_test_fraction")]
    pub test_fraction: f64,
}

impl BenchmarkConfig {
    /// Minimal config with defaults everywhere else.
    pub fn new(datasets: Vec<DatasetSpec>, methods: Vec<Method>, mechanisms: Vec<Mechanism>, rates: Vec<f64>, seeds: Vec<u64>) -> Self {
        BenchmarkConfig {
            version: CONFIG_VERSION,
            datasets,
            methods,
            mechanisms,
            rates,
            seeds,
            data_dir: None,
            imputer: ImputerConfig::default(),
            corruption: CorruptionOptions::default(),
            classifier_forest: ForestParams::default(),
            knn_k: default_knn_k(),
            corrupt_test: true,
            standardize: Standardize::PerSeries,
            test_fraction: default_test_fraction(),
        }
    }

    pub fn cells(&self) -> Vec<CellKey> {
        let mut cells = Vec::new();
        for d in &self.datasets {
            for &mechanism in &self.mechanisms {
                for &rate in &self.rates {
                    for &method in &self.methods {
                        for &seed in &self.seeds {
                            cells.push(CellKey {
                                dataset: d.name().to_string(),
                                mechanism,
                                rate,
                                method,
                                seed,
                            });
                        }
                    }
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellKey {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub method: Method,
    pub seed: u64,
}

impl CellKey {
    fn id(&self) -> String {
        format!("{}|{}|{}|{}|{}", self.dataset, self.mechanism, self.rate, self.method, self.seed)
    }
}

/// One grid cell. Column order here is the report CSV column order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Record {
    pub dataset: String,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub method: Method,
    pub seed: u64,
    /// Over removed entries of train and test together.
    pub rmse: Option<f64>,
    pub rf_accuracy: Option<f64>,
    pub knn_accuracy: Option<f64>,
    pub removed_train: Option<usize>,
    pub removed_test: Option<usize>,
    pub best_iteration: Option<usize>,
    pub internal_score: Option<f64>,
    pub corrupt_seconds: f64,
    pub impute_seconds: f64,
    pub classify_seconds: f64,
    pub error: Option<String>,
}

/// Names of the runtime columns, which are the only non-deterministic fields.
pub const RUNTIME_COLUMNS: [&str; 3] = ["corrupt_seconds", "impute_seconds", "classify_seconds"];

impl Record {
    fn empty(key: &CellKey) -> Self {
        Record {
            dataset: key.dataset.clone(),
            mechanism: key.mechanism,
            rate: key.rate,
            method: key.method,
            seed: key.seed,
            rmse: None,
            rf_accuracy: None,
            knn_accuracy: None,
            removed_train: None,
            removed_test: None,
            best_iteration: None,
            internal_score: None,
            corrupt_seconds: 0.0,
            impute_seconds: 0.0,
            classify_seconds: 0.0,
            error: None,
        }
    }

    pub fn key(&self) -> CellKey {
        CellKey {
            dataset: self.dataset.clone(),
            mechanism: self.mechanism,
            rate: self.rate,
            method: self.method,
            seed: self.seed,
        }
    }

    fn sort_key(&self) -> (String, Mechanism, u64, Method, u64) {
        // rates are validated to (0, 1), so the bit pattern orders them
        (self.dataset.clone(), self.mechanism, self.rate.to_bits(), self.method, self.seed)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub records: Vec<Record>,
}

/// Mean rank of one method within a (metric, mechanism, rate) group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub metric: String,
    pub mechanism: Mechanism,
    pub rate: f64,
    pub method: Method,
    pub mean_rank: Option<f64>,
    /// Mean score over datasets and seeds.
    pub mean_score: Option<f64>,
    pub datasets: usize,
}

impl BenchmarkReport {
    /// Sorts records by (dataset, mechanism, rate, method, seed).
    pub fn new(mut records: Vec<Record>) -> Self {
        records.sort_by_key(Record::sort_key);
        BenchmarkReport { records }
    }

    /// Copy with runtime columns zeroed, for reproducibility comparisons.
    pub fn without_runtime(&self) -> Self {
        let records = self
            .records
            .iter()
            .map(|r| Record {
                corrupt_seconds: 0.0,
                impute_seconds: 0.0,
                classify_seconds: 0.0,
                ..r.clone()
            })
            .collect();
        BenchmarkReport { records }
    }

    /// Per-dataset mean over seeds, ranked across methods for each metric,
    /// mechanism and rate. Accuracies rank higher-is-better, RMSE lower-is-better.
    pub fn ranks(&self) -> Vec<RankRow> {
        type Group = (Mechanism, u64);
        type Metric = (&'static str, bool, fn(&Record) -> Option<f64>);
        let metrics: [Metric; 3] = [
            ("rf_accuracy", true, |r| r.rf_accuracy),
            ("knn_accuracy", true, |r| r.knn_accuracy),
            ("rmse", false, |r| r.rmse),
        ];
        let mut groups: BTreeMap<Group, (Vec<Method>, Vec<String>)> = BTreeMap::new();
        for r in &self.records {
            let g = groups.entry((r.mechanism, r.rate.to_bits())).or_default();
            if !g.0.contains(&r.method) {
                g.0.push(r.method);
            }
            if !g.1.contains(&r.dataset) {
                g.1.push(r.dataset.clone());
            }
        }
        let mut rows = Vec::new();
        for (metric, higher, get) in metrics {
            for (&(mechanism, rate_bits), (methods, datasets)) in &groups {
                let mut methods = methods.clone();
                methods.sort();
                let mut table = vec![vec![None; datasets.len()]; methods.len()];
                for (m, method) in methods.iter().enumerate() {
                    for (d, dataset) in datasets.iter().enumerate() {
                        let scores: Vec<f64> = self
                            .records
                            .iter()
                            .filter(|r| {
                                r.mechanism == mechanism
                                    && r.rate.to_bits() == rate_bits
                                    && r.method == *method
                                    && &r.dataset == dataset
                            })
                            .filter_map(get)
                            .collect();
                        if !scores.is_empty() {
                            table[m][d] = Some(scores.iter().sum::<f64>() / scores.len() as f64);
                        }
                    }
                }
                let ranks = average_ranks(&table, higher);
                for (m, method) in methods.iter().enumerate() {
                    let present: Vec<f64> = table[m].iter().flatten().copied().collect();
                    rows.push(RankRow {
                        metric: metric.to_string(),
                        mechanism,
                        rate: f64::from_bits(rate_bits),
                        method: *method,
                        mean_rank: ranks[m],
                        mean_score: (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64),
                        datasets: present.len(),
                    });
                }
            }
        }
        rows
    }

    /// Rank tables as Markdown, one table per (metric, mechanism, rate).
    pub fn ranks_markdown(&self) -> String {
        let rows = self.ranks();
        let mut out = String::new();
        let mut current: Option<(String, Mechanism, u64)> = None;
        for r in &rows {
            let key = (r.metric.clone(), r.mechanism, r.rate.to_bits());
            if current.as_ref() != Some(&key) {
                if current.is_some() {
                    out.push('\n');
                }
                out.push_str(&format!("### {} ({}, rate {})\n\n", r.metric, r.mechanism, r.rate));
                out.push_str("| method | mean rank | mean score | datasets |\n|---|---|---|---|\n");
                current = Some(key);
            }
            let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
            out.push_str(&format!(
                "| {} | {} | {} | {} |\n",
                r.method,
                fmt(r.mean_rank),
                fmt(r.mean_score),
                r.datasets
            ));
        }
        out
    }

    /// Records as a Markdown table.
    pub fn records_markdown(&self) -> String {
        let mut out = String::from(
            "| dataset | mechanism | rate | method | seed | rmse | rf_accuracy | knn_accuracy | error |\n|---|---|---|---|---|---|---|---|---|\n",
        );
        let fmt = |v: Option<f64>| v.map_or("-".to_string(), |v| format!("{v:.4}"));
        for r in &self.records {
            out.push_str(&format!(
                "| {} | {} | {} | {} | {} | {} | {} | {} | {} |\n",
                r.dataset,
                r.mechanism,
                r.rate,
                r.method,
                r.seed,
                fmt(r.rmse),
                fmt(r.rf_accuracy),
                fmt(r.knn_accuracy),
                r.error.as_deref().unwrap_or("")
            ));
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub out_dir: PathBuf,
    /// Worker threads; results do not depend on it.
    pub jobs: usize,
    /// Keep finished cells from an existing `records.jsonl`.
    pub resume: bool,
    /// Directory relative dataset paths are resolved against.
    pub base_dir: PathBuf,
}

pub const RECORDS_FILE: &str = "records.jsonl";
pub const REPORT_CSV: &str = "report.csv";
pub const REPORT_JSON: &str = "report.json";
pub const RANKS_CSV: &str = "ranks.csv";

/// Environment variable naming the default directory for named datasets.
pub const DATA_DIR_ENV: &str = "GAPIMPUTE_DATA_DIR";

struct LoadedDataset {
    train: TimeSeriesDataset,
    test: TimeSeriesDataset,
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

fn data_dir(config: &BenchmarkConfig, base: &Path) -> PathBuf {
    match (&config.data_dir, std::env::var_os(DATA_DIR_ENV)) {
        (Some(d), _) => resolve(base, d),
        (None, Some(env)) => PathBuf::from(env),
        (None, None) => base.to_path_buf(),
    }
}

/// Train and test paths of a named UCR dataset under `dir`.
pub fn named_dataset_paths(dir: &Path, name: &str) -> Result<(PathBuf, PathBuf)> {
    for root in [dir.join(name), dir.to_path_buf()] {
        let train = root.join(format!("{name}_TRAIN.tsv"));
        let test = root.join(format!("{name}_TEST.tsv"));
        if train.is_file() && test.is_file() {
            return Ok((train, test));
        }
    }
    Err(Error::invalid(format!(
        "dataset {name:?} not found under {} (expected {name}_TRAIN.tsv and {name}_TEST.tsv)",
        dir.display()
    )))
}

fn load_dataset(spec: &DatasetSpec, config: &BenchmarkConfig, base: &Path) -> Result<LoadedDataset> {
    let (train, test) = match spec {
        DatasetSpec::Name(name) => {
            let (a, b) = named_dataset_paths(&data_dir(config, base), name)?;
            crate::io::read_ucr_pair(&a, &b)?
        }
        DatasetSpec::Files(f) => {
            let train_path = resolve(base, &f.train);
            match &f.test {
                Some(t) => crate::io::read_dataset_pair(&train_path, &resolve(base, t))?,
                None => {
                    let all = crate::io::read_dataset(&train_path)?;
                    let split = crate::data::split_indices(all.labels(), config.test_fraction, 0)?;
                    (all.subset(&split.train)?, all.subset(&split.test)?)
                }
            }
        }
        DatasetSpec::Synthetic(s) => {
            let train = crate::synthetic::generate(&s.synthetic)?;
            let test_spec = SyntheticSpec {
                n: s.n_test,
                seed: derive_seed(s.synthetic.seed, tag("test")),
                ..s.synthetic.clone()
            };
            (train, crate::synthetic::generate(&test_spec)?)
        }
    };
    let (train, test) = match config.standardize {
        Standardize::None => (train, test),
        Standardize::PerSeries => (
            standardize_with(&train, StandardizeScope::PerSeries)?.0,
            standardize_with(&test, StandardizeScope::PerSeries)?.0,
        ),
        Standardize::Dataset => {
            let (train, params) = standardize_with(&train, StandardizeScope::Dataset)?;
            (train, crate::data::apply_standardization(&test, &params)?)
        }
    };
    Ok(LoadedDataset { train, test })
}

fn removed_sq_errors(imputed: &TimeSeriesDataset, log: &RemovalLog, truth: &mut Vec<f64>, est: &mut Vec<f64>) {
    for r in &log.removals {
        truth.push(r.true_value);
        est.push(imputed.get(r.instance, r.feature, r.time).unwrap_or(f64::NAN));
    }
}

/// RMSE between imputed values and the logged true values.
pub fn rmse_at_removed(imputed: &TimeSeriesDataset, log: &RemovalLog) -> Result<f64> {
    if log.is_empty() {
        return Err(Error::EmptyLog);
    }
    let (mut t, mut e) = (Vec::new(), Vec::new());
    removed_sq_errors(imputed, log, &mut t, &mut e);
    rmse(&t, &e)
}

fn run_cell(key: &CellKey, data: &LoadedDataset, config: &BenchmarkConfig) -> Result<Record> {
    let mut rec = Record::empty(key);
    let spec = |split: &str| CorruptionSpec {
        mechanism: key.mechanism,
        rate: key.rate,
        lag: config.corruption.lag,
        threshold_percentile: config.corruption.threshold_percentile,
        removal_probability: config.corruption.removal_probability,
        threshold_scope: config.corruption.threshold_scope,
        seed: derive_seed(derive_seed(key.seed, tag(&key.dataset)), tag(split)),
    };

    let clock = Instant::now();
    let (train, train_log) = corrupt(&data.train, &spec("train"))?;
    let (test, test_log) = if config.corrupt_test {
        let (t, l) = corrupt(&data.test, &spec("test"))?;
        (t, Some(l))
    } else {
        (data.test.clone(), None)
    };
    rec.corrupt_seconds = clock.elapsed().as_secs_f64();
    rec.removed_train = Some(train_log.len());
    rec.removed_test = Some(test_log.as_ref().map_or(0, RemovalLog::len));

    let clock = Instant::now();
    let mut imputer_config = config.imputer.clone();
    imputer_config.gap.seed = key.seed;
    let imputer = Imputer::with_config(key.method, imputer_config);
    let (train_imp, fitted) = imputer.fit(&train)?;
    let test_imp = fitted.transform(&test)?;
    rec.impute_seconds = clock.elapsed().as_secs_f64();
    if let Some(p) = fitted.pipeline() {
        rec.best_iteration = Some(p.best_iteration);
        rec.internal_score = Some(p.best_diagnostics().aggregate);
    }
    let (mut truth, mut est) = (Vec::new(), Vec::new());
    removed_sq_errors(&train_imp, &train_log, &mut truth, &mut est);
    if let Some(l) = &test_log {
        removed_sq_errors(&test_imp, l, &mut truth, &mut est);
    }
    if !truth.is_empty() {
        rec.rmse = Some(rmse(&truth, &est)?);
    }

    let clock = Instant::now();
    let x_train = raw_transform(&train_imp)?;
    let x_test = raw_transform(&test_imp)?;
    let n_classes = train_imp.class_count().max(test_imp.class_count());
    let forest_params = ForestParams {
        seed: derive_seed(key.seed, tag("classifier")),
        ..config.classifier_forest.clone()
    };
    let forest = fit_forest(x_train.view(), train_imp.labels(), n_classes, &forest_params)?;
    let rf_pred = forest.predict(x_test.view())?;
    rec.rf_accuracy = Some(accuracy(test_imp.labels(), &rf_pred)?);
    let knn_pred = knn_classify(x_train.view(), train_imp.labels(), x_test.view(), config.knn_k, n_classes)?;
    rec.knn_accuracy = Some(accuracy(test_imp.labels(), &knn_pred)?);
    rec.classify_seconds = clock.elapsed().as_secs_f64();
    Ok(rec)
}

fn read_records(path: &Path) -> Result<Vec<Record>> {
    if !path.exists() {
        return Ok(Vec::new());
    }
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (k, line) in BufReader::new(f).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        match serde_json::from_str::<Record>(&line) {
            Ok(r) => out.push(r),
            // a torn final line from an interrupted run is recomputed
            Err(e) => warn!("{}:{}: skipping unreadable record: {e}", path.display(), k + 1),
        }
    }
    Ok(out)
}

/// Checks grid axes and shared options; returns every problem found.
pub fn check_config(config: &BenchmarkConfig) -> Vec<String> {
    let mut problems = Vec::new();
    if config.version != CONFIG_VERSION {
        problems.push(format!("version: unsupported version {}", config.version));
    }
    for (axis, len) in [
        ("datasets", config.datasets.len()),
        ("methods", config.methods.len()),
        ("mechanisms", config.mechanisms.len()),
        ("rates", config.rates.len()),
        ("seeds", config.seeds.len()),
    ] {
        if len == 0 {
            problems.push(format!("{axis}: must not be empty"));
        }
    }
    for (i, r) in config.rates.iter().enumerate() {
        if !(*r > 0.0 && *r < 1.0) {
            problems.push(format!("rates[{i}]: {r} is outside (0, 1)"));
        }
    }
    let mut names = HashSet::new();
    for (i, d) in config.datasets.iter().enumerate() {
        if !names.insert(d.name()) {
            problems.push(format!("datasets[{i}]: duplicate name {:?}", d.name()));
        }
    }
    if config.knn_k == 0 {
        problems.push("knn_k: must be at least 1".into());
    }
    if !(config.test_fraction > 0.0 && config.test_fraction < 1.0) {
        problems.push(format!("test_fraction: {} is outside (0, 1)", config.test_fraction));
    }
    if config.corruption.lag == 0 {
        problems.push("corruption.lag: must be at least 1".into());
    }
    if !(0.0..=1.0).contains(&config.corruption.threshold_percentile) {
        problems.push("corruption.threshold_percentile: must lie in [0, 1]".into());
    }
    if config.classifier_forest.num_trees == 0 {
        problems.push("classifier_forest.num_trees: must be at least 1".into());
    }
    if config.imputer.gap.max_iters == 0 {
        problems.push("imputer.gap.max_iters: must be at least 1".into());
    }
    problems
}

/// Runs (or resumes) the grid and writes `records.jsonl`, `report.csv`,
/// `report.json` and `ranks.csv` into `options.out_dir`. Cell failures are
/// recorded in the `error` column and never stop the grid.
pub fn run_benchmark(config: &BenchmarkConfig, options: &BenchmarkOptions) -> Result<BenchmarkReport> {
    let problems = check_config(config);
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    std::fs::create_dir_all(&options.out_dir).map_err(|e| Error::io(&options.out_dir, e))?;
    let records_path = options.out_dir.join(RECORDS_FILE);
    let cells = config.cells();
    let wanted: HashSet<String> = cells.iter().map(CellKey::id).collect();

    let mut done: Vec<Record> = if options.resume {
        read_records(&records_path)?
            .into_iter()
            .filter(|r| wanted.contains(&r.key().id()))
            .collect()
    } else {
        Vec::new()
    };
    let mut seen = HashSet::new();
    done.retain(|r| seen.insert(r.key().id()));
    let pending: Vec<&CellKey> = cells.iter().filter(|c| !seen.contains(&c.id())).collect();
    info!("benchmark: {} cells, {} already done, {} to run", cells.len(), done.len(), pending.len());

    // rewrite the log so it holds exactly the kept records
    {
        let mut f = File::create(&records_path).map_err(|e| Error::io(&records_path, e))?;
        for r in &done {
            writeln!(f, "{}", serde_json::to_string(r)?).map_err(|e| Error::io(&records_path, e))?;
        }
    }

    let mut loaded: BTreeMap<String, std::result::Result<LoadedDataset, String>> = BTreeMap::new();
    for d in &config.datasets {
        if pending.iter().any(|c| c.dataset == d.name()) {
            let r = load_dataset(d, config, &options.base_dir).map_err(|e| e.to_string());
            if let Err(e) = &r {
                warn!("dataset {}: {e}", d.name());
            }
            loaded.insert(d.name().to_string(), r);
        }
    }

    let writer = Mutex::new(
        OpenOptions::new()
            .append(true)
            .open(&records_path)
            .map_err(|e| Error::io(&records_path, e))?,
    );
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(options.jobs.max(1))
        .build()
        .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
    let fresh: Vec<Result<Record>> = pool.install(|| {
        pending
            .par_iter()
            .map(|key| {
                let rec = match &loaded[&key.dataset] {
                    Ok(data) => run_cell(key, data, config).unwrap_or_else(|e| Record {
                        error: Some(e.to_string()),
                        ..Record::empty(key)
                    }),
                    Err(e) => Record {
                        error: Some(format!("loading dataset: {e}")),
                        ..Record::empty(key)
                    },
                };
                let line = serde_json::to_string(&rec)?;
                let mut w = writer.lock().unwrap_or_else(|p| p.into_inner());
                writeln!(w, "{line}").map_err(|e| Error::io(&records_path, e))?;
                w.flush().map_err(|e| Error::io(&records_path, e))?;
                info!("cell {} done", key.id());
                Ok(rec)
            })
            .collect()
    });
    for r in fresh {
        done.push(r?);
    }

    let report = BenchmarkReport::new(done);
    crate::io::write_report_csv(&report, &options.out_dir.join(REPORT_CSV))?;
    crate::io::write_report_json(&report, &options.out_dir.join(REPORT_JSON))?;
    crate::io::write_ranks_csv(&report.ranks(), &options.out_dir.join(RANKS_CSV))?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synthetic::Family;

    fn tiny_config() -> BenchmarkConfig {
        let mut c = BenchmarkConfig::new(
            vec![DatasetSpec::Synthetic(SyntheticDataset {
                name: "sines".into(),
                synthetic: SyntheticSpec {
                    family: Family::Sines,
                    n: 16,
                    t: 12,
                    noise: 0.2,
                    seed: 1,
                },
                n_test: 10,
            })],
            vec![Method::Mean, Method::GapRaw],
            vec![Mechanism::Mcar],
            vec![0.25],
            vec![0],
        );
        c.imputer.gap.forest.num_trees = 20;
        c.imputer.gap.max_iters = 2;
        c.classifier_forest.num_trees = 20;
        c
    }

    #[test]
    fn grid_counts_and_resume() {
        let dir = tempfile::tempdir().unwrap();
        let opts = BenchmarkOptions {
            out_dir: dir.path().to_path_buf(),
            jobs: 2,
            resume: false,
            base_dir: dir.path().to_path_buf(),
        };
        let config = tiny_config();
        let first = run_benchmark(&config, &opts).unwrap();
        assert_eq!(first.records.len(), 2);
        for r in &first.records {
            assert!(r.error.is_none(), "{:?}", r.error);
            assert!(r.rmse.unwrap() >= 0.0);
            assert!((0.0..=1.0).contains(&r.rf_accuracy.unwrap()));
        }
        let csv_before = std::fs::read(dir.path().join(REPORT_CSV)).unwrap();
        let resumed = run_benchmark(&config, &BenchmarkOptions { resume: true, ..opts }).unwrap();
        // identical including runtime: nothing was recomputed
        assert_eq!(resumed, first);
        assert_eq!(std::fs::read(dir.path().join(REPORT_CSV)).unwrap(), csv_before);
    }

    #[test]
    fn failures_are_recorded() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = tiny_config();
        config.datasets.push(DatasetSpec::Name("NoSuchDataset".into()));
        let opts = BenchmarkOptions {
            out_dir: dir.path().to_path_buf(),
            jobs: 1,
            resume: false,
            base_dir: dir.path().to_path_buf(),
        };
        let report = run_benchmark(&config, &opts).unwrap();
        assert_eq!(report.records.len(), 4);
        let failed: Vec<_> = report.records.iter().filter(|r| r.error.is_some()).collect();
        assert_eq!(failed.len(), 2);
        assert!(failed.iter().all(|r| r.dataset == "NoSuchDataset"));
    }

    #[test]
    fn config_problems_are_listed() {
        let mut c = tiny_config();
        c.rates = vec![1.5, 0.2];
        c.seeds.clear();
        let p = check_config(&c);
        assert_eq!(p.len(), 2, "{p:?}");
        assert!(p.iter().any(|s| s.starts_with("rates[0]")));
    }

    #[test]
    fn rank_rows_sum_per_group() {
        let mk = |dataset: &str, method: Method, acc: f64| Record {
            rf_accuracy: Some(acc),
            knn_accuracy: Some(acc),
            rmse: Some(1.0 - acc),
            ..Record::empty(&CellKey {
                dataset: dataset.into(),
                mechanism: Mechanism::Mcar,
                rate: 0.25,
                method,
                seed: 0,
            })
        };
        let report = BenchmarkReport::new(vec![
            mk("a", Method::Mean, 0.5),
            mk("a", Method::GapRaw, 0.9),
            mk("b", Method::Mean, 0.7),
            mk("b", Method::GapRaw, 0.7),
        ]);
        let ranks = report.ranks();
        let rf: Vec<&RankRow> = ranks.iter().filter(|r| r.metric == "rf_accuracy").collect();
        let mean = rf.iter().find(|r| r.method == Method::Mean).unwrap();
        let gap = rf.iter().find(|r| r.method == Method::GapRaw).unwrap();
        assert_eq!(mean.mean_rank, Some(1.75));
        assert_eq!(gap.mean_rank, Some(1.25));
        let rm = ranks.iter().find(|r| r.metric == "rmse" && r.method == Method::GapRaw).unwrap();
        assert_eq!(rm.mean_rank, Some(1.25));
    }
}
