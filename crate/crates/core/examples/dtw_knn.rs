//! Dynamic time warping, DTW nearest-neighbour imputation and 1-NN classification.

use gap_impute::eval::{accuracy, knn_classify};
use gap_impute::impute::{dtw_distance, knn_impute, KnnMetric, KnnOptions};
use gap_impute::missingness::apply_mcar;
use gap_impute::synthetic::{generate, Family, SyntheticSpec};
use gap_impute::transforms::raw_transform;

fn main() -> gap_impute::Result<()> {
    let a = [0.0, 1.0, 2.0, 1.0, 0.0];
    let b = [0.0, 0.0, 1.0, 2.0, 1.0];
    println!("dtw unconstrained {}", dtw_distance(&a, &b, None)?);
    println!("dtw band 0 {} (Manhattan distance)", dtw_distance(&a, &b, Some(0))?);
    println!("dtw band 1 {}", dtw_distance(&a, &b, Some(1))?);

    let spec = |seed| SyntheticSpec {
        family: Family::Sines,
        n: 40,
        t: 30,
        noise: 0.3,
        seed,
    };
    let (train, _) = apply_mcar(&generate(&spec(1))?, 0.3, 5)?;
    let test = generate(&spec(2))?;
    for metric in [KnnMetric::Euclidean, KnnMetric::Dtw] {
        let filled = knn_impute(&train, &KnnOptions { k: 3, metric, band: Some(3) })?;
        let x_train = raw_transform(&filled)?;
        let x_test = raw_transform(&test)?;
        let predicted = knn_classify(x_train.view(), filled.labels(), x_test.view(), 1, 2)?;
        println!("{metric:?} neighbours: 1-NN accuracy {:.3}", accuracy(test.labels(), &predicted)?);
    }
    Ok(())
}
