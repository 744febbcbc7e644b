//! Every registered method on one short series with gaps.

use gap_impute::impute::{Imputer, Method};
use gap_impute::TimeSeriesDataset;

fn main() -> gap_impute::Result<()> {
    let nan = f64::NAN;
    let series = vec![
        vec![nan, 1.0, 2.0, nan, 4.0, 5.0, nan, nan, 8.0, nan],
        vec![0.5, nan, 2.5, 3.5, nan, 5.5, 6.5, 7.5, nan, 9.5],
        vec![9.0, 8.0, nan, 6.0, 5.0, nan, 3.0, 2.0, 1.0, nan],
        vec![8.5, nan, 6.5, 5.5, 4.5, 3.5, nan, 1.5, 0.5, 0.0],
    ];
    let ds = TimeSeriesDataset::univariate(&series, vec![0, 0, 1, 1])?;
    let fmt = |v: Option<f64>| v.map_or("  .  ".to_string(), |v| format!("{v:5.2}"));
    println!("{:>12}  {}", "input", (0..10).map(|t| fmt(ds.get(0, 0, t))).collect::<Vec<_>>().join(" "));
    for method in Method::ALL {
        let out = Imputer::new(method).impute(&ds)?;
        println!("{:>12}  {}", method.name(), (0..10).map(|t| fmt(out.get(0, 0, t))).collect::<Vec<_>>().join(" "));
    }
    Ok(())
}
