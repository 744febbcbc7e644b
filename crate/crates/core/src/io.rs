//! Dataset, config, report and pipeline files.
//!
//! * `ucr_tsv`: one instance per line, `label<TAB>v1<TAB>...<TAB>vT` (commas are
//!   also accepted); `NaN`, `nan`, `NA`, `?` or an empty field mark a missing
//!   value. Univariate only.
//! * `csv_long`: header `instance,label,feature,time,value`, one row per
//!   entry, missing values written as `NaN`.
//!
//! Floats are written in shortest round-trip form, so write-then-read is exact.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::data::{Dims, FeatureSchema, MissingMask, StandardizationParams, TimeSeriesDataset};
use crate::error::{Error, Result};
use crate::eval::benchmark::{check_config, BenchmarkConfig, BenchmarkReport, RankRow, Record};
use crate::forest::Forest;
use crate::impute::{FallbackCounts, FittedImputer, ImputationPipeline, ImputerConfig, IterationDiagnostics, Method};
use crate::transforms::{KernelBank, Transform, TransformKind};

pub const CSV_LONG_HEADER: &str = "instance,label,feature,time,value";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetFormat {
    UcrTsv,
    CsvLong,
}

impl FromStr for DatasetFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ucr_tsv" => Ok(DatasetFormat::UcrTsv),
            "csv_long" => Ok(DatasetFormat::CsvLong),
            _ => Err(Error::invalid(format!("unknown format {s:?}; expected ucr_tsv or csv_long"))),
        }
    }
}

impl DatasetFormat {
    /// `csv_long` when the first line is its header, otherwise `ucr_tsv`.
    pub fn sniff(text: &str) -> Self {
        match text.lines().next() {
            Some(l) if l.trim() == CSV_LONG_HEADER => DatasetFormat::CsvLong,
            _ => DatasetFormat::UcrTsv,
        }
    }
}

fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn parse_value(token: &str) -> std::result::Result<f64, String> {
    let t = token.trim();
    match t {
        "" | "NaN" | "nan" | "NA" | "?" => Ok(f64::NAN),
        _ => match t.parse::<f64>() {
            Ok(v) if v.is_finite() => Ok(v),
            Ok(_) => Err(format!("non-finite value {t:?}")),
            Err(_) => Err(format!("non-numeric value {t:?}")),
        },
    }
}

fn format_value(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v}"),
        None => "NaN".to_string(),
    }
}

/// Sorted distinct labels: numerically when every label parses as a number,
/// lexicographically otherwise.
pub fn label_dictionary<'a>(labels: impl IntoIterator<Item = &'a str>) -> Vec<String> {
    let mut unique: Vec<String> = labels.into_iter().map(str::to_string).collect();
    unique.sort();
    unique.dedup();
    let numeric: Option<Vec<f64>> = unique.iter().map(|l| l.parse::<f64>().ok()).collect();
    if let Some(keys) = numeric {
        let mut pairs: Vec<(f64, String)> = keys.into_iter().zip(unique).collect();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0).then_with(|| a.1.cmp(&b.1)));
        unique = pairs.into_iter().map(|p| p.1).collect();
    }
    unique
}

/// Raw lines of a UCR file: `(label, values)`.
fn parse_ucr_rows(text: &str, path: &Path) -> Result<Vec<(String, Vec<f64>)>> {
    let mut rows = Vec::new();
    let mut width = None;
    for (k, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let sep = if line.contains('\t') { '\t' } else { ',' };
        let mut fields = line.split(sep);
        let label = fields.next().unwrap_or_default().trim().to_string();
        if label.is_empty() {
            return Err(parse_error(path, k + 1, "missing class label"));
        }
        let values = fields
            .map(parse_value)
            .collect::<std::result::Result<Vec<f64>, String>>()
            .map_err(|m| parse_error(path, k + 1, m))?;
        if values.is_empty() {
            return Err(parse_error(path, k + 1, "no values after the label"));
        }
        match width {
            None => width = Some(values.len()),
            Some(w) if w != values.len() => {
                return Err(parse_error(
                    path,
                    k + 1,
                    format!("ragged row: {} values, expected {w}", values.len()),
                ))
            }
            _ => {}
        }
        rows.push((label, values));
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "file contains no instances"));
    }
    Ok(rows)
}

fn ucr_dataset(rows: Vec<(String, Vec<f64>)>, classes: &[String]) -> Result<TimeSeriesDataset> {
    let n = rows.len();
    let t = rows[0].1.len();
    let labels = rows
        .iter()
        .map(|(l, _)| classes.iter().position(|c| c == l).expect("label in dictionary"))
        .collect();
    let values = rows.into_iter().flat_map(|r| r.1).collect();
    TimeSeriesDataset::from_nan_values(Dims::new(n, 1, t), values, labels, classes.to_vec())
}

pub fn parse_ucr(text: &str, path: &Path) -> Result<TimeSeriesDataset> {
    let rows = parse_ucr_rows(text, path)?;
    let classes = label_dictionary(rows.iter().map(|r| r.0.as_str()));
    ucr_dataset(rows, &classes)
}

pub fn read_ucr_tsv(path: &Path) -> Result<TimeSeriesDataset> {
    parse_ucr(&read_text(path)?, path)
}

/// Reads a train/test pair with one label dictionary covering both files.
pub fn read_ucr_pair(train: &Path, test: &Path) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    let a = parse_ucr_rows(&read_text(train)?, train)?;
    let b = parse_ucr_rows(&read_text(test)?, test)?;
    if a[0].1.len() != b[0].1.len() {
        return Err(Error::DimensionMismatch {
            expected: format!("test series of length {}", a[0].1.len()),
            found: b[0].1.len().to_string(),
        });
    }
    let classes = label_dictionary(a.iter().chain(&b).map(|r| r.0.as_str()));
    Ok((ucr_dataset(a, &classes)?, ucr_dataset(b, &classes)?))
}

pub fn write_ucr_tsv(ds: &TimeSeriesDataset, path: &Path) -> Result<()> {
    write_text(path, &ucr_string(ds)?)
}

pub fn ucr_string(ds: &TimeSeriesDataset) -> Result<String> {
    let Dims { n, p, t } = ds.dims();
    if p != 1 {
        return Err(Error::invalid(format!("ucr_tsv is univariate; dataset has {p} features (use csv_long)")));
    }
    let mut out = String::new();
    for i in 0..n {
        out.push_str(&ds.classes()[ds.labels()[i]]);
        for tt in 0..t {
            out.push('\t');
            out.push_str(&format_value(ds.get(i, 0, tt)));
        }
        out.push('\n');
    }
    Ok(out)
}

pub fn csv_long_string(ds: &TimeSeriesDataset) -> String {
    let Dims { n, p, t } = ds.dims();
    let mut out = String::with_capacity(n * p * t * 16);
    out.push_str(CSV_LONG_HEADER);
    out.push('\n');
    for i in 0..n {
        let label = &ds.classes()[ds.labels()[i]];
        for j in 0..p {
            for tt in 0..t {
                let _ = writeln!(out, "{i},{label},{j},{tt},{}", format_value(ds.get(i, j, tt)));
            }
        }
    }
    out
}

pub fn write_csv_long(ds: &TimeSeriesDataset, path: &Path) -> Result<()> {
    write_text(path, &csv_long_string(ds))
}

/// Optional metadata for [`parse_csv_long`]; label dictionary and schema
/// default to the sorted labels of the file and all-continuous features.
#[derive(Debug, Clone, Default)]
pub struct CsvLongOptions {
    pub classes: Option<Vec<String>>,
    pub schema: Option<FeatureSchema>,
}

type LongRows = BTreeMap<usize, (String, BTreeMap<(usize, usize), f64>)>;

fn parse_long_rows(text: &str, path: &Path) -> Result<LongRows> {
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == CSV_LONG_HEADER => {}
        _ => return Err(parse_error(path, 1, format!("expected header {CSV_LONG_HEADER:?}"))),
    }
    let mut rows: LongRows = BTreeMap::new();
    for (k, line) in lines {
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').collect();
        if cols.len() != 5 {
            return Err(parse_error(path, k + 1, format!("expected 5 columns, found {}", cols.len())));
        }
        let idx = |s: &str| {
            s.trim()
                .parse::<usize>()
                .map_err(|_| parse_error(path, k + 1, format!("bad index {s:?}")))
        };
        let (i, j, tt) = (idx(cols[0])?, idx(cols[2])?, idx(cols[3])?);
        let v = parse_value(cols[4]).map_err(|m| parse_error(path, k + 1, m))?;
        let label = cols[1].trim().to_string();
        let entry = rows.entry(i).or_insert_with(|| (label.clone(), BTreeMap::new()));
        if entry.0 != label {
            return Err(parse_error(path, k + 1, format!("instance {i} has conflicting labels")));
        }
        if entry.1.insert((j, tt), v).is_some() {
            return Err(parse_error(path, k + 1, format!("duplicate entry ({i}, {j}, {tt})")));
        }
    }
    if rows.is_empty() {
        return Err(parse_error(path, 1, "file contains no instances"));
    }
    Ok(rows)
}

fn long_dataset(rows: LongRows, path: &Path, classes: &[String], schema: Option<FeatureSchema>) -> Result<TimeSeriesDataset> {
    let n = rows.len();
    if rows.keys().copied().ne(0..n) {
        return Err(parse_error(path, 1, "instance indices are not contiguous from 0"));
    }
    let p = rows.values().flat_map(|r| r.1.keys().map(|k| k.0)).max().unwrap_or(0) + 1;
    let t = rows.values().flat_map(|r| r.1.keys().map(|k| k.1)).max().unwrap_or(0) + 1;
    let dims = Dims::new(n, p, t);
    let mut values = vec![f64::NAN; dims.size()];
    let mut bits = vec![true; dims.size()];
    let mut labels = Vec::with_capacity(n);
    for (i, (label, entries)) in rows {
        if entries.len() != p * t {
            return Err(parse_error(path, 1, format!("instance {i} has {} of {} entries", entries.len(), p * t)));
        }
        labels.push(
            classes
                .iter()
                .position(|c| *c == label)
                .ok_or_else(|| parse_error(path, 1, format!("label {label:?} not in class dictionary")))?,
        );
        for ((j, tt), v) in entries {
            let k = dims.index(i, j, tt);
            values[k] = v;
            bits[k] = v.is_nan();
        }
    }
    let mask = MissingMask::from_bits(dims, bits)?;
    let schema = schema.unwrap_or_else(|| FeatureSchema::continuous(p));
    TimeSeriesDataset::new(dims, values, mask, labels, classes.to_vec(), schema)
}

pub fn parse_csv_long(text: &str, path: &Path, options: CsvLongOptions) -> Result<TimeSeriesDataset> {
    let rows = parse_long_rows(text, path)?;
    let classes = options
        .classes
        .unwrap_or_else(|| label_dictionary(rows.values().map(|r| r.0.as_str())));
    long_dataset(rows, path, &classes, options.schema)
}

pub fn read_csv_long(path: &Path) -> Result<TimeSeriesDataset> {
    parse_csv_long(&read_text(path)?, path, CsvLongOptions::default())
}

/// Reads either format, detected from the first line.
pub fn read_dataset(path: &Path) -> Result<TimeSeriesDataset> {
    let text = read_text(path)?;
    match DatasetFormat::sniff(&text) {
        DatasetFormat::UcrTsv => parse_ucr(&text, path),
        DatasetFormat::CsvLong => parse_csv_long(&text, path, CsvLongOptions::default()),
    }
}

/// Reads a train/test pair (either format) sharing one label dictionary.
pub fn read_dataset_pair(train: &Path, test: &Path) -> Result<(TimeSeriesDataset, TimeSeriesDataset)> {
    let (ta, tb) = (read_text(train)?, read_text(test)?);
    match (DatasetFormat::sniff(&ta), DatasetFormat::sniff(&tb)) {
        (DatasetFormat::UcrTsv, DatasetFormat::UcrTsv) => read_ucr_pair(train, test),
        (DatasetFormat::CsvLong, DatasetFormat::CsvLong) => {
            let (a, b) = (parse_long_rows(&ta, train)?, parse_long_rows(&tb, test)?);
            let classes = label_dictionary(a.values().chain(b.values()).map(|r| r.0.as_str()));
            Ok((long_dataset(a, train, &classes, None)?, long_dataset(b, test, &classes, None)?))
        }
        _ => Err(Error::invalid("train and test files use different formats")),
    }
}

pub fn write_dataset(ds: &TimeSeriesDataset, path: &Path, format: DatasetFormat) -> Result<()> {
    match format {
        DatasetFormat::UcrTsv => write_ucr_tsv(ds, path),
        DatasetFormat::CsvLong => write_csv_long(ds, path),
    }
}

// ---------------------------------------------------------------- config

fn type_name(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}

/// Reports keys of `value` that `template` does not have, recursing into
/// nested objects present on both sides.
fn unknown_keys(value: &Value, template: &Value, path: &str, problems: &mut Vec<String>) {
    if let (Value::Object(v), Value::Object(t)) = (value, template) {
        for (k, child) in v {
            let p = if path.is_empty() { k.clone() } else { format!("{path}.{k}") };
            match t.get(k) {
                None => problems.push(format!("{p}: unknown key")),
                Some(tc) => unknown_keys(child, tc, &p, problems),
            }
        }
    }
}

fn check_array<F: Fn(&Value) -> Option<String>>(root: &serde_json::Map<String, Value>, key: &str, check: F, problems: &mut Vec<String>) {
    match root.get(key) {
        None => problems.push(format!("{key}: required")),
        Some(Value::Array(items)) => {
            if items.is_empty() {
                problems.push(format!("{key}: must not be empty"));
            }
            for (i, item) in items.iter().enumerate() {
                if let Some(m) = check(item) {
                    problems.push(format!("{key}[{i}]: {m}"));
                }
            }
        }
        Some(other) => problems.push(format!("{key}: expected array, found {}", type_name(other))),
    }
}

/// Validates a v1 benchmark config document, listing every problem with its path.
pub fn validate_config(value: &Value) -> Result<BenchmarkConfig> {
    let mut problems = Vec::new();
    let Value::Object(root) = value else {
        return Err(Error::Config(vec![format!("(root): expected object, found {}", type_name(value))]));
    };
    let template = serde_json::to_value(BenchmarkConfig::new(vec![], vec![], vec![], vec![], vec![]))?;
    unknown_keys(value, &template, "", &mut problems);
    if let Some(v) = root.get("version") {
        if v.as_u64() != Some(crate::eval::benchmark::CONFIG_VERSION as u64) {
            problems.push(format!("version: unsupported value {v}"));
        }
    }
    check_array(
        root,
        "datasets",
        |v| match v {
            Value::String(_) => None,
            Value::Object(o) if o.get("name").is_some_and(Value::is_string) => None,
            Value::Object(_) => Some("object needs a string \"name\"".into()),
            other => Some(format!("expected string or object, found {}", type_name(other))),
        },
        &mut problems,
    );
    check_array(
        root,
        "methods",
        |v| match v.as_str() {
            Some(s) => s.parse::<Method>().err().map(|e| e.to_string()),
            None => Some(format!("expected string, found {}", type_name(v))),
        },
        &mut problems,
    );
    check_array(
        root,
        "mechanisms",
        |v| match v.as_str() {
            Some("MCAR" | "MAR" | "MNAR") => None,
            Some(s) => Some(format!("unknown mechanism {s:?}; expected MCAR, MAR or MNAR")),
            None => Some(format!("expected string, found {}", type_name(v))),
        },
        &mut problems,
    );
    check_array(
        root,
        "rates",
        |v| match v.as_f64() {
            Some(r) if r > 0.0 && r < 1.0 => None,
            Some(r) => Some(format!("{r} is outside (0, 1)")),
            None => Some(format!("expected number, found {}", type_name(v))),
        },
        &mut problems,
    );
    check_array(
        root,
        "seeds",
        |v| v.as_u64().is_none().then(|| format!("expected non-negative integer, found {v}")),
        &mut problems,
    );
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    let config: BenchmarkConfig =
        serde_json::from_value(value.clone()).map_err(|e| Error::Config(vec![format!("(root): {e}")]))?;
    let more = check_config(&config);
    if !more.is_empty() {
        return Err(Error::Config(more));
    }
    Ok(config)
}

pub fn parse_config(text: &str) -> Result<BenchmarkConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("(root): {e}")]))?;
    validate_config(&value)
}

pub fn read_config(path: &Path) -> Result<BenchmarkConfig> {
    parse_config(&read_text(path)?)
}

/// Parses an imputer options document, the `imputer` block of a benchmark config.
pub fn parse_imputer_config(text: &str) -> Result<ImputerConfig> {
    let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(vec![format!("(root): {e}")]))?;
    if !value.is_object() {
        return Err(Error::Config(vec![format!("(root): expected object, found {}", type_name(&value))]));
    }
    let mut problems = Vec::new();
    unknown_keys(&value, &serde_json::to_value(ImputerConfig::default())?, "", &mut problems);
    if !problems.is_empty() {
        return Err(Error::Config(problems));
    }
    serde_json::from_value(value).map_err(|e| Error::Config(vec![format!("(root): {e}")]))
}

pub fn read_imputer_config(path: &Path) -> Result<ImputerConfig> {
    parse_imputer_config(&read_text(path)?)
}

// ---------------------------------------------------------------- reports

fn csv_error(path: &Path, e: csv::Error) -> Error {
    let line = e.position().map_or(0, |p| p.line() as usize);
    parse_error(path, line, e.to_string())
}

fn to_csv<T: Serialize>(rows: &[T], path: &Path) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| csv_error(path, e))?;
    }
    let bytes = w.into_inner().map_err(|e| Error::invalid(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::invalid(e.to_string()))
}

pub fn report_csv_string(report: &BenchmarkReport) -> Result<String> {
    to_csv(&report.records, Path::new("<report>"))
}

pub fn write_report_csv(report: &BenchmarkReport, path: &Path) -> Result<()> {
    write_text(path, &to_csv(&report.records, path)?)
}

pub fn parse_report_csv(text: &str, path: &Path) -> Result<BenchmarkReport> {
    let mut r = csv::Reader::from_reader(text.as_bytes());
    let records = r
        .deserialize::<Record>()
        .collect::<std::result::Result<Vec<_>, _>>()
        .map_err(|e| csv_error(path, e))?;
    Ok(BenchmarkReport { records })
}

pub fn read_report_csv(path: &Path) -> Result<BenchmarkReport> {
    parse_report_csv(&read_text(path)?, path)
}

pub fn write_report_json(report: &BenchmarkReport, path: &Path) -> Result<()> {
    let mut s = serde_json::to_string_pretty(report)?;
    s.push('\n');
    write_text(path, &s)
}

pub fn read_report_json(path: &Path) -> Result<BenchmarkReport> {
    Ok(serde_json::from_str(&read_text(path)?)?)
}

pub fn ranks_csv_string(rows: &[RankRow]) -> Result<String> {
    to_csv(rows, Path::new("<ranks>"))
}

pub fn write_ranks_csv(rows: &[RankRow], path: &Path) -> Result<()> {
    write_text(path, &to_csv(rows, path)?)
}

/// Report from a benchmark output directory (`report.json`, else `report.csv`).
pub fn read_report_dir(dir: &Path) -> Result<BenchmarkReport> {
    let json = dir.join(crate::eval::benchmark::REPORT_JSON);
    if json.is_file() {
        return read_report_json(&json);
    }
    read_report_csv(&dir.join(crate::eval::benchmark::REPORT_CSV))
}

// ---------------------------------------------------------------- pipelines

/// A fitted imputer plus the standardization applied before it.
///
/// Directory layout: `config.json` (method, options, class dictionary and
/// schema), `standardization.json` (if any), and for GAP methods
/// `pipeline.json` (transform layout, selected iteration),
/// `kernels.json` (kernel transform only), `forest.json`,
/// `diagnostics.json`, `train.csv` and `imputed_train.csv` (csv_long).
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineBundle {
    pub fitted: FittedImputer,
    pub standardization: Option<StandardizationParams>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct BundleConfig {
    version: u32,
    method: Method,
    imputer: ImputerConfig,
    #[serde(default)]
    classes: Option<Vec<String>>,
    #[serde(default)]
    schema: Option<FeatureSchema>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct PipelineMeta {
    transform: TransformKind,
    p: usize,
    t: usize,
    best_iteration: usize,
    init_fallbacks: FallbackCounts,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    write_text(path, &s)
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| parse_error(path, e.line(), e.to_string()))
}

pub fn save_pipeline(bundle: &PipelineBundle, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let (method, imputer, pipeline) = match &bundle.fitted {
        FittedImputer::Baseline { method, config } => (*method, config.clone(), None),
        FittedImputer::Gap(p) => {
            let method = match p.config.transform {
                TransformKind::Raw => Method::GapRaw,
                TransformKind::Summary => Method::GapSummary,
                TransformKind::Kernels => Method::GapKernels,
            };
            let imputer = ImputerConfig {
                gap: p.config.clone(),
                ..ImputerConfig::default()
            };
            (method, imputer, Some(p.as_ref()))
        }
    };
    write_json(
        &dir.join("config.json"),
        &BundleConfig {
            version: 1,
            method,
            imputer,
            classes: pipeline.map(|p| p.train.classes().to_vec()),
            schema: pipeline.map(|p| p.train.schema().clone()),
        },
    )?;
    let std_path = dir.join("standardization.json");
    match &bundle.standardization {
        Some(s) => write_json(&std_path, s)?,
        None if std_path.exists() => fs::remove_file(&std_path).map_err(|e| Error::io(&std_path, e))?,
        None => {}
    }
    if let Some(p) = pipeline {
        let (tp, tt) = p.transform.input_layout();
        write_json(
            &dir.join("pipeline.json"),
            &PipelineMeta {
                transform: p.transform.kind(),
                p: tp,
                t: tt,
                best_iteration: p.best_iteration,
                init_fallbacks: p.init_fallbacks,
            },
        )?;
        if let Some(bank) = p.transform.kernel_bank() {
            write_json(&dir.join("kernels.json"), bank)?;
        }
        write_json(&dir.join("forest.json"), &p.forest)?;
        write_json(&dir.join("diagnostics.json"), &p.diagnostics)?;
        write_csv_long(&p.train, &dir.join("train.csv"))?;
        write_csv_long(&p.imputed_train_dataset()?, &dir.join("imputed_train.csv"))?;
    }
    Ok(())
}

pub fn load_pipeline(dir: &Path) -> Result<PipelineBundle> {
    let config: BundleConfig = read_json(&dir.join("config.json"))?;
    if config.version != 1 {
        return Err(Error::invalid(format!("unsupported pipeline bundle version {}", config.version)));
    }
    let std_path = dir.join("standardization.json");
    let standardization = if std_path.is_file() {
        Some(read_json(&std_path)?)
    } else {
        None
    };
    let fitted = match config.method.gap_transform() {
        None => FittedImputer::Baseline {
            method: config.method,
            config: config.imputer,
        },
        Some(kind) => {
            let meta: PipelineMeta = read_json(&dir.join("pipeline.json"))?;
            if meta.transform != kind {
                return Err(Error::invalid("pipeline.json transform disagrees with the method"));
            }
            let bank: Option<KernelBank> = if kind == TransformKind::Kernels {
                Some(read_json(&dir.join("kernels.json"))?)
            } else {
                None
            };
            let transform = Transform::from_parts(kind, meta.p, meta.t, bank)?;
            let forest: Forest = read_json(&dir.join("forest.json"))?;
            let diagnostics: Vec<IterationDiagnostics> = read_json(&dir.join("diagnostics.json"))?;
            let options = || CsvLongOptions {
                classes: config.classes.clone(),
                schema: config.schema.clone(),
            };
            let train_path = dir.join("train.csv");
            let train = parse_csv_long(&read_text(&train_path)?, &train_path, options())?;
            let imp_path = dir.join("imputed_train.csv");
            let imputed = parse_csv_long(&read_text(&imp_path)?, &imp_path, options())?;
            if meta.best_iteration == 0 || meta.best_iteration > diagnostics.len() {
                return Err(Error::invalid("best_iteration outside the recorded diagnostics"));
            }
            let gap = config.imputer.gap.with_transform(kind);
            FittedImputer::Gap(Box::new(ImputationPipeline {
                config: gap,
                imputed_train: imputed.complete_values()?.to_vec(),
                train,
                transform,
                forest,
                best_iteration: meta.best_iteration,
                diagnostics,
                init_fallbacks: meta.init_fallbacks,
            }))
        }
    };
    Ok(PipelineBundle {
        fitted,
        standardization,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    const P: &str = "<test>";

    #[test]
    fn two_line_ucr_file() {
        let ds = parse_ucr("1\t0.5\t0.7\n2\t0.1\tNaN\n", Path::new(P)).unwrap();
        assert_eq!(ds.dims(), Dims::new(2, 1, 2));
        assert_eq!(ds.mask().total_missing(), 1);
        assert_eq!(ds.labels(), &[0, 1]);
        assert_eq!(ds.classes(), &["1".to_string(), "2".to_string()]);
        assert_eq!(ds.get(0, 0, 1), Some(0.7));
    }

    #[test]
    fn empty_and_ragged_files() {
        assert!(parse_ucr("", Path::new(P)).is_err());
        let err = parse_ucr("1,0.5,0.7\n2,0.1\n", Path::new(P)).unwrap_err();
        match err {
            Error::Parse { line, .. } => assert_eq!(line, 2),
            other => panic!("{other:?}"),
        }
        assert!(parse_ucr("1\tabc\n", Path::new(P)).is_err());
    }

    #[test]
    fn numeric_label_order() {
        assert_eq!(label_dictionary(["10", "2", "-1", "2"]), vec!["-1", "2", "10"]);
        assert_eq!(label_dictionary(["b", "a", "10"]), vec!["10", "a", "b"]);
    }

    #[test]
    fn ucr_round_trip_is_exact() {
        let text = "a\t0.1\t-3.25e-8\tNaN\nb\t1e300\t0\t5\n";
        let ds = parse_ucr(text, Path::new(P)).unwrap();
        let back = parse_ucr(&ucr_string(&ds).unwrap(), Path::new(P)).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn csv_long_round_trip_multivariate() {
        let dims = Dims::new(2, 2, 3);
        let values: Vec<f64> = (0..12).map(|k| if k == 4 { f64::NAN } else { k as f64 * 0.1 }).collect();
        let ds = TimeSeriesDataset::from_nan_values(dims, values, vec![1, 0], vec!["x".into(), "y".into()]).unwrap();
        let text = csv_long_string(&ds);
        assert!(text.starts_with(CSV_LONG_HEADER));
        let back = parse_csv_long(&text, Path::new(P), CsvLongOptions::default()).unwrap();
        assert_eq!(back, ds);
    }

    #[test]
    fn minimal_config_is_valid() {
        let c = parse_config(r#"{"datasets":["GunPoint"],"methods":["mean"],"mechanisms":["MCAR"],"rates":[0.25],"seeds":[0]}"#)
            .unwrap();
        assert_eq!(c.methods, vec![Method::Mean]);
        assert_eq!(c.knn_k, 1);
    }

    #[test]
    fn config_errors_name_every_path() {
        let err = parse_config(
            r#"{"datasets":["GunPoint"],"methods":["mean","gap"],"mechanisms":["MCAR"],"rates":[0.25,1.5],"seeds":[0],"colour":1,"imputer":{"gap":{"forest":{"trees":3}}}}"#,
        )
        .unwrap_err();
        let Error::Config(problems) = err else { panic!() };
        let joined = problems.join("\n");
        for needle in ["rates[1]", "methods[1]", "colour: unknown key", "imputer.gap.forest.trees: unknown key"] {
            assert!(joined.contains(needle), "{needle} missing from\n{joined}");
        }
    }

    #[test]
    fn report_csv_round_trip_is_byte_identical() {
        use crate::eval::benchmark::Record;
        use crate::missingness::Mechanism;
        let rec = Record {
            dataset: "d,1".into(),
            mechanism: Mechanism::Mnar,
            rate: 0.05,
            method: Method::KnnDtw,
            seed: 2,
            rmse: Some(0.1 + 0.2),
            rf_accuracy: Some(1.0),
            knn_accuracy: None,
            removed_train: Some(7),
            removed_test: Some(0),
            best_iteration: None,
            internal_score: Some(-1e-12),
            corrupt_seconds: 0.5,
            impute_seconds: 0.25,
            classify_seconds: 1.0,
            error: Some("line one\nline \"two\"".into()),
        };
        let report = BenchmarkReport { records: vec![rec] };
        let text = report_csv_string(&report).unwrap();
        let back = parse_report_csv(&text, Path::new(P)).unwrap();
        assert_eq!(back, report);
        assert_eq!(report_csv_string(&back).unwrap(), text);
    }
}
