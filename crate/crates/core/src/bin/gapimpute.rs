//! `gapimpute`: corrupt, impute, classify, benchmark and report from the shell.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error.

use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::info;

use gap_impute::data::{apply_standardization, destandardize};
use gap_impute::eval::{accuracy, knn_classify, run_benchmark, BenchmarkOptions, BenchmarkReport};
use gap_impute::forest::{fit_forest, ForestParams};
use gap_impute::impute::{FittedImputer, Imputer, Method};
use gap_impute::io::{
    load_pipeline, ranks_csv_string, read_config, read_dataset, read_dataset_pair, read_imputer_config, read_report_dir,
    report_csv_string, save_pipeline, write_dataset, DatasetFormat, PipelineBundle,
};
use gap_impute::missingness::{corrupt, CorruptionSpec, Mechanism, ThresholdScope};
use gap_impute::transforms::raw_transform;
use gap_impute::{Error, TimeSeriesDataset};

#[derive(Debug, Parser)]
#[command(
    name = "gapimpute",
    version,
    about = "Impute missing values in labeled time series with forest GAP proximities",
    after_help = "Exit codes: 0 success, 1 usage error, 2 data error.\n\
                  Named benchmark datasets are looked up in the config's data_dir, else in $GAPIMPUTE_DATA_DIR."
)]
struct Cli {
    /// Log progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Remove observed values under a missingness mechanism
    Corrupt(CorruptArgs),
    /// Impute a dataset, optionally saving the fitted pipeline
    Impute(ImputeArgs),
    /// Impute a test set with a saved pipeline
    ImputeTest(ImputeTestArgs),
    /// Train a classifier on a complete train set and score a complete test set
    Classify(ClassifyArgs),
    /// Run a benchmark grid from a JSON config
    Benchmark(BenchmarkArgs),
    /// Print a benchmark report or its rank table
    Report(ReportArgs),
    /// Summarize a dataset file or a pipeline directory
    Inspect(InspectArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum OutFormat {
    UcrTsv,
    CsvLong,
}

#[derive(Debug, Args)]
struct Output {
    /// Output file
    #[arg(long)]
    out: PathBuf,
    /// Output format [default: csv_long for *.csv, else ucr_tsv]
    #[arg(long, value_enum)]
    format: Option<OutFormat>,
}

impl Output {
    fn write(&self, ds: &TimeSeriesDataset) -> Result<(), Error> {
        let format = match self.format {
            Some(OutFormat::UcrTsv) => DatasetFormat::UcrTsv,
            Some(OutFormat::CsvLong) => DatasetFormat::CsvLong,
            None if self.out.extension().is_some_and(|e| e == "csv") => DatasetFormat::CsvLong,
            None => DatasetFormat::UcrTsv,
        };
        write_dataset(ds, &self.out, format)
    }
}

#[derive(Debug, Args)]
struct CorruptArgs {
    /// Input dataset (ucr_tsv or csv_long)
    #[arg(long = "in")]
    input: PathBuf,
    /// MCAR, MAR or MNAR
    #[arg(long)]
    mechanism: Mechanism,
    /// Target fraction of observed entries to remove, in (0, 1)
    #[arg(long)]
    rate: f64,
    /// Seed for the removal draws
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Removal log CSV (instance,feature,time,true_value)
    #[arg(long)]
    log: Option<PathBuf>,
    /// MAR lag
    #[arg(long, default_value_t = 1)]
    lag: usize,
    /// MAR/MNAR threshold percentile
    #[arg(long, default_value_t = 0.75)]
    threshold_percentile: f64,
    /// MAR/MNAR removal probability [default: calibrated to the rate]
    #[arg(long)]
    removal_probability: Option<f64>,
    /// Compute thresholds per series or over the whole dataset
    #[arg(long, value_enum, default_value = "per_series")]
    threshold_scope: Scope,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Scope {
    PerSeries,
    Dataset,
}

#[derive(Debug, Args)]
struct ImputeArgs {
    /// Input dataset with missing values
    #[arg(long = "in")]
    input: PathBuf,
    /// Imputation method: mean, median, mode, constant, locf, nocb, linear, spline,
    /// rolling, knn, knn_dtw, gap_raw, gap_summary or gap_kernels
    #[arg(long, value_parser = parse_method)]
    method: Method,
    /// Imputer options JSON (the `imputer` block of a benchmark config)
    #[arg(long)]
    config: Option<PathBuf>,
    /// GAP seed [default: from config, else 0]
    #[arg(long)]
    seed: Option<u64>,
    /// GAP forest size [default: from config, else 200]
    #[arg(long)]
    trees: Option<usize>,
    /// GAP iterations [default: from config, else 5]
    #[arg(long)]
    max_iters: Option<usize>,
    /// Directory to save the fitted pipeline for impute-test
    #[arg(long)]
    pipeline_out: Option<PathBuf>,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Args)]
struct ImputeTestArgs {
    /// Pipeline directory written by `impute --pipeline-out`
    #[arg(long)]
    pipeline: PathBuf,
    /// Test dataset; its labels are never read
    #[arg(long = "in")]
    input: PathBuf,
    #[command(flatten)]
    output: Output,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum Classifier {
    Rf,
    Knn,
}

#[derive(Debug, Args)]
struct ClassifyArgs {
    /// Complete training dataset
    #[arg(long)]
    train: PathBuf,
    /// Complete test dataset
    #[arg(long)]
    test: PathBuf,
    /// Classifier trained on the flattened series
    #[arg(long, value_enum, default_value = "rf")]
    classifier: Classifier,
    /// Forest seed
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Forest size
    #[arg(long, default_value_t = 200)]
    trees: usize,
    /// Neighbours for knn
    #[arg(long, default_value_t = 1)]
    k: usize,
    /// Predictions CSV (instance,label,predicted)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct BenchmarkArgs {
    /// Benchmark config JSON (v1)
    #[arg(long)]
    config: PathBuf,
    /// Directory for records.jsonl, report.csv, report.json and ranks.csv
    #[arg(long)]
    out_dir: PathBuf,
    /// Worker threads; results do not depend on it [default: available cores]
    #[arg(long)]
    jobs: Option<usize>,
    /// Keep finished cells from an earlier run in the same directory
    #[arg(long)]
    resume: bool,
    /// Directory of named datasets, overriding the config's data_dir
    #[arg(long)]
    data_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
    Markdown,
}

#[derive(Debug, Args)]
struct ReportArgs {
    /// Benchmark output directory
    #[arg(long)]
    in_dir: PathBuf,
    /// Print the mean-rank table instead of per-cell records
    #[arg(long)]
    ranks: bool,
    /// Output format
    #[arg(long, value_enum, default_value = "markdown")]
    format: ReportFormat,
    /// Zero the runtime columns
    #[arg(long)]
    no_runtime: bool,
}

#[derive(Debug, Args)]
struct InspectArgs {
    /// Dataset file or pipeline directory
    path: PathBuf,
}

fn parse_method(s: &str) -> Result<Method, String> {
    s.parse::<Method>().map_err(|e| e.to_string())
}

enum Failure {
    Usage(String),
    Data(Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config(_) | Error::UnknownMethod { .. } => Failure::Usage(e.to_string()),
            e => Failure::Data(e),
        }
    }
}

type Outcome = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    let outcome = match cli.command {
        Command::Corrupt(a) => cmd_corrupt(a),
        Command::Impute(a) => cmd_impute(a),
        Command::ImputeTest(a) => cmd_impute_test(a),
        Command::Classify(a) => cmd_classify(a),
        Command::Benchmark(a) => cmd_benchmark(a),
        Command::Report(a) => cmd_report(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
        Err(Failure::Data(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn cmd_corrupt(a: CorruptArgs) -> Outcome {
    let ds = read_dataset(&a.input)?;
    let spec = CorruptionSpec {
        lag: a.lag,
        threshold_percentile: a.threshold_percentile,
        removal_probability: a.removal_probability,
        threshold_scope: match a.threshold_scope {
            Scope::PerSeries => ThresholdScope::PerSeries,
            Scope::Dataset => ThresholdScope::Dataset,
        },
        ..CorruptionSpec::new(a.mechanism, a.rate, a.seed)
    };
    spec.validate().map_err(|e| Failure::Usage(e.to_string()))?;
    let (corrupted, log) = corrupt(&ds, &spec)?;
    a.output.write(&corrupted)?;
    if let Some(path) = &a.log {
        log.save_csv(path)?;
    }
    info!(
        "removed {} of {} entries (realized rate {:.4})",
        log.len(),
        log.total,
        log.realized_rate()
    );
    Ok(())
}

fn cmd_impute(a: ImputeArgs) -> Outcome {
    let mut config = match &a.config {
        Some(p) => read_imputer_config(p)?,
        None => Default::default(),
    };
    if let Some(s) = a.seed {
        config.gap.seed = s;
    }
    if let Some(t) = a.trees {
        config.gap.forest.num_trees = t;
    }
    if let Some(m) = a.max_iters {
        config.gap.max_iters = m;
    }
    let ds = read_dataset(&a.input)?;
    let (imputed, fitted) = Imputer::with_config(a.method, config).fit(&ds)?;
    if let Some(p) = fitted.pipeline() {
        info!(
            "best iteration {} (score {:.4})",
            p.best_iteration,
            p.best_diagnostics().aggregate
        );
    }
    a.output.write(&imputed)?;
    if let Some(dir) = &a.pipeline_out {
        save_pipeline(
            &PipelineBundle {
                fitted,
                standardization: None,
            },
            dir,
        )?;
    }
    Ok(())
}

fn cmd_impute_test(a: ImputeTestArgs) -> Outcome {
    let bundle = load_pipeline(&a.pipeline)?;
    let test = read_dataset(&a.input)?;
    let imputed = match &bundle.standardization {
        Some(params) => {
            let z = bundle.fitted.transform(&apply_standardization(&test, params)?)?;
            destandardize(&z, params)?
        }
        None => bundle.fitted.transform(&test)?,
    };
    a.output.write(&imputed)?;
    Ok(())
}

fn cmd_classify(a: ClassifyArgs) -> Outcome {
    let (train, test) = read_dataset_pair(&a.train, &a.test)?;
    let (x_train, x_test) = (raw_transform(&train)?, raw_transform(&test)?);
    let n_classes = train.class_count().max(test.class_count());
    let predicted = match a.classifier {
        Classifier::Rf => {
            let params = ForestParams::default().with_trees(a.trees).with_seed(a.seed);
            fit_forest(x_train.view(), train.labels(), n_classes, &params)?.predict(x_test.view())?
        }
        Classifier::Knn => knn_classify(x_train.view(), train.labels(), x_test.view(), a.k, n_classes)?,
    };
    println!("accuracy {:.6}", accuracy(test.labels(), &predicted)?);
    if let Some(path) = &a.out {
        let classes = test.classes();
        let mut s = String::from("instance,label,predicted\n");
        for (i, (&y, &p)) in test.labels().iter().zip(&predicted).enumerate() {
            s.push_str(&format!("{i},{},{}\n", classes[y], classes[p]));
        }
        std::fs::write(path, s).map_err(|e| Error::Io {
            path: path.clone(),
            source: e,
        })?;
    }
    Ok(())
}

fn absolute(p: &Path) -> PathBuf {
    std::path::absolute(p).unwrap_or_else(|_| p.to_path_buf())
}

fn cmd_benchmark(a: BenchmarkArgs) -> Outcome {
    let mut config = read_config(&a.config)?;
    if let Some(d) = &a.data_dir {
        config.data_dir = Some(absolute(d));
    }
    let jobs = match a.jobs {
        Some(0) => return Err(Failure::Usage("--jobs must be at least 1".into())),
        Some(j) => j,
        None => std::thread::available_parallelism().map_or(1, |n| n.get()),
    };
    let base_dir = absolute(&a.config).parent().map(Path::to_path_buf).unwrap_or_default();
    let options = BenchmarkOptions {
        out_dir: a.out_dir.clone(),
        jobs,
        resume: a.resume,
        base_dir,
    };
    let report = run_benchmark(&config, &options)?;
    let failed = report.records.iter().filter(|r| r.error.is_some()).count();
    println!(
        "{} records ({failed} failed) written to {}",
        report.records.len(),
        a.out_dir.display()
    );
    Ok(())
}

fn cmd_report(a: ReportArgs) -> Outcome {
    let mut report = read_report_dir(&a.in_dir)?;
    if a.no_runtime {
        report = report.without_runtime();
    }
    let text = render_report(&report, a.ranks, a.format)?;
    let mut out = std::io::stdout().lock();
    out.write_all(text.as_bytes())
        .map_err(|e| Error::Io {
            path: "<stdout>".into(),
            source: e,
        })?;
    Ok(())
}

fn render_report(report: &BenchmarkReport, ranks: bool, format: ReportFormat) -> Result<String, Error> {
    Ok(match (ranks, format) {
        (true, ReportFormat::Csv) => ranks_csv_string(&report.ranks())?,
        (true, ReportFormat::Json) => serde_json::to_string_pretty(&report.ranks())? + "\n",
        (true, ReportFormat::Markdown) => report.ranks_markdown(),
        (false, ReportFormat::Csv) => report_csv_string(report)?,
        (false, ReportFormat::Json) => serde_json::to_string_pretty(report)? + "\n",
        (false, ReportFormat::Markdown) => report.records_markdown(),
    })
}

fn cmd_inspect(a: InspectArgs) -> Outcome {
    if a.path.is_dir() {
        let bundle = load_pipeline(&a.path)?;
        match bundle.fitted.pipeline() {
            Some(p) => {
                println!("pipeline: gap ({:?} transform)", p.transform.kind());
                println!("training instances: {}", p.train.n_instances());
                println!("best iteration: {}", p.best_iteration);
                for d in &p.diagnostics {
                    println!(
                        "  iteration {}: score {:.6}, substituted rows {}",
                        d.iteration, d.aggregate, d.substituted_rows
                    );
                }
            }
            None => {
                if let FittedImputer::Baseline { method, .. } = &bundle.fitted {
                    println!("pipeline: {method} (stateless)");
                }
            }
        }
        println!("standardized: {}", bundle.standardization.is_some());
        return Ok(());
    }
    let ds = read_dataset(&a.path)?;
    let d = ds.dims();
    println!("instances: {}", d.n);
    println!("features: {}", d.p);
    println!("length: {}", d.t);
    println!("classes: {}", ds.classes().join(", "));
    let mut counts = vec![0usize; ds.class_count()];
    for &y in ds.labels() {
        counts[y] += 1;
    }
    println!(
        "class counts: {}",
        counts.iter().map(|c| c.to_string()).collect::<Vec<_>>().join(", ")
    );
    println!(
        "missing: {} ({:.4})",
        ds.mask().total_missing(),
        ds.missing_fraction()
    );
    Ok(())
}
