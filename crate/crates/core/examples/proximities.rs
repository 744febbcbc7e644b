//! Fits a forest on flattened series and inspects its RF-GAP proximities.

use gap_impute::forest::{classic_proximity, fit_forest, gap_proximities, ForestParams};
use gap_impute::synthetic::{generate, Family, SyntheticSpec};
use gap_impute::transforms::raw_transform;

fn main() -> gap_impute::Result<()> {
    let ds = generate(&SyntheticSpec {
        family: Family::Sines,
        n: 40,
        t: 24,
        noise: 0.3,
        seed: 1,
    })?;
    let x = raw_transform(&ds)?;
    let forest = fit_forest(x.view(), ds.labels(), ds.class_count(), &ForestParams::default().with_seed(7))?;
    println!("OOB accuracy {:.3}", forest.oob_accuracy(ds.labels()).unwrap_or(f64::NAN));

    let prox = gap_proximities(&forest);
    println!("max |row sum - 1| = {:.2e}", prox.max_row_sum_error());
    let row = prox.row(0).expect("row 0 is out of bag somewhere");
    let mut top: Vec<_> = row.to_vec();
    top.sort_by(|a, b| b.1.total_cmp(&a.1));
    for (j, w) in top.iter().take(5) {
        println!("series 0 -> {j:2} (label {}) weight {w:.4}", ds.labels()[*j]);
    }

    // The proximity-weighted vote reproduces the OOB soft vote.
    let vote = prox.weighted_vote(0, ds.labels(), ds.class_count()).unwrap();
    let oob = forest.oob_proba()[0].clone().unwrap();
    println!("weighted vote {vote:.4?} vs OOB vote {oob:.4?}");

    let classic = classic_proximity(&forest);
    println!("classic proximity of 0 and 2: {:.3}", classic[0][2]);
    Ok(())
}
