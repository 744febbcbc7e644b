//! A small resumable benchmark grid with mean-rank summaries.

use gap_impute::eval::benchmark::{run_benchmark, BenchmarkConfig, BenchmarkOptions, DatasetSpec, SyntheticDataset};
use gap_impute::impute::Method;
use gap_impute::missingness::Mechanism;
use gap_impute::synthetic::{Family, SyntheticSpec};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dataset = |name: &str, family, seed| {
        DatasetSpec::Synthetic(SyntheticDataset {
            name: name.into(),
            synthetic: SyntheticSpec {
                family,
                n: 40,
                t: 24,
                noise: 0.5,
                seed,
            },
            n_test: 40,
        })
    };
    let mut config = BenchmarkConfig::new(
        vec![dataset("constant", Family::ClassConstant, 1), dataset("sines", Family::Sines, 2)],
        vec![Method::Mean, Method::Linear, Method::Knn, Method::GapRaw],
        vec![Mechanism::Mcar, Mechanism::Mnar],
        vec![0.25],
        vec![0, 1],
    );
    config.imputer.gap.forest.num_trees = 50;
    config.classifier_forest.num_trees = 50;

    let out = tempfile::tempdir()?;
    let options = BenchmarkOptions {
        out_dir: out.path().to_path_buf(),
        jobs: 2,
        resume: false,
        base_dir: std::env::current_dir().unwrap_or_default(),
    };
    let report = run_benchmark(&config, &options)?;
    println!("{} cells", report.records.len());
    println!("{}", report.ranks_markdown());

    // A resumed run reuses every finished cell from records.jsonl.
    let again = run_benchmark(&config, &BenchmarkOptions { resume: true, ..options })?;
    println!("resumed run identical: {}", again.without_runtime() == report.without_runtime());
    Ok(())
}
