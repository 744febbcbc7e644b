//! Fits an imputer, saves it to disk, loads it back and applies it to new data.

use gap_impute::impute::{Imputer, ImputerConfig, Method};
use gap_impute::io::{load_pipeline, save_pipeline, PipelineBundle};
use gap_impute::missingness::apply_mar;
use gap_impute::synthetic::class_constant;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let (train, _) = apply_mar(&class_constant(40, 16, 0.2, 1)?, 0.2, 2)?;
    let (test, _) = apply_mar(&class_constant(20, 16, 0.2, 3)?, 0.2, 4)?;

    let mut config = ImputerConfig::default();
    config.gap.forest.num_trees = 50;
    config.gap.kernel_count = 100;
    let (_, fitted) = Imputer::with_config(Method::GapKernels, config).fit(&train)?;
    let before = fitted.transform(&test)?;

    let dir = tempfile::tempdir()?;
    save_pipeline(&PipelineBundle { fitted, standardization: None }, dir.path())?;
    let mut files: Vec<_> = std::fs::read_dir(dir.path())
        ?
        .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
        .collect();
    files.sort();
    println!("bundle: {}", files.join(", "));

    let loaded = load_pipeline(dir.path())?;
    let after = loaded.fitted.transform(&test)?;
    let same = before.to_nan_values().iter().zip(after.to_nan_values()).all(|(a, b)| a.to_bits() == b.to_bits());
    println!("reloaded pipeline reproduces test imputations bit for bit: {same}");
    if let Some(p) = loaded.fitted.pipeline() {
        println!("selected iteration {} with score {:.4}", p.best_iteration, p.best_diagnostics().aggregate);
    }
    Ok(())
}
