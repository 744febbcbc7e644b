use crate::error::{Error, Result};
use crate::forest::{argmax_lowest, Features};

/// Euclidean k-nearest-neighbour classification. Distance ties are broken
/// by the lower training index and vote ties by the lowest class index.
pub fn knn_classify(
    train: Features<'_>,
    train_labels: &[usize],
    test: Features<'_>,
    k: usize,
    n_classes: usize,
) -> Result<Vec<usize>> {
    if train.cols() != test.cols() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} columns", train.cols()),
            found: test.cols().to_string(),
        });
    }
    if train_labels.len() != train.rows() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} labels", train.rows()),
            found: train_labels.len().to_string(),
        });
    }
    if k == 0 || k > train.rows() {
        return Err(Error::invalid(format!("k must be in 1..={}, got {k}", train.rows())));
    }
    if let Some(&bad) = train_labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::invalid(format!("label {bad} outside 0..{n_classes}")));
    }
    use rayon::prelude::*;
    Ok((0..test.rows())
        .into_par_iter()
        .map(|i| {
            let x = test.row(i);
            let mut d: Vec<(f64, usize)> = (0..train.rows())
                .map(|r| {
                    let ss: f64 = x.iter().zip(train.row(r)).map(|(a, b)| (a - b).powi(2)).sum();
                    (ss, r)
                })
                .collect();
            d.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            let mut votes = vec![0.0; n_classes];
            for &(_, r) in &d[..k] {
                votes[train_labels[r]] += 1.0;
            }
            argmax_lowest(&votes)
        })
        .collect())
}
