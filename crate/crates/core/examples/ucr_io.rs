//! Reads a vendored UCR dataset and converts it between the two file formats.

use std::path::Path;

use gap_impute::io::{read_csv_long, read_ucr_pair, write_dataset, DatasetFormat};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/ucr");
    let (train, test) = read_ucr_pair(&dir.join("Chinatown_TRAIN.tsv"), &dir.join("Chinatown_TEST.tsv"))?;
    println!(
        "Chinatown: {} train, {} test, length {}, classes {:?}",
        train.n_instances(),
        test.n_instances(),
        train.series_len(),
        train.classes()
    );

    let out = tempfile::tempdir()?;
    let path = out.path().join("chinatown_train.csv");
    write_dataset(&train, &path, DatasetFormat::CsvLong)?;
    let text = std::fs::read_to_string(&path)?;
    for line in text.lines().take(4) {
        println!("  {line}");
    }
    let back = read_csv_long(&path)?;
    println!("round trip identical: {}", back == train);
    Ok(())
}
