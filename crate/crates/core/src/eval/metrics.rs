use crate::error::{Error, Result};

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::DimensionMismatch {
            expected: format!("{a} predictions"),
            found: b.to_string(),
        });
    }
    if a == 0 {
        return Err(Error::invalid("metric needs at least one observation"));
    }
    Ok(())
}

/// Coefficient of determination `1 - SS_res / SS_tot`.
///
/// Constant truth: 1 when the estimates match exactly, otherwise 0.
pub fn r2_score(truth: &[f64], estimates: &[f64]) -> Result<f64> {
    check_len(truth.len(), estimates.len())?;
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let ss_tot: f64 = truth.iter().map(|y| (y - mean).powi(2)).sum();
    let ss_res: f64 = truth
        .iter()
        .zip(estimates)
        .map(|(y, e)| (y - e).powi(2))
        .sum();
    if ss_tot == 0.0 {
        return Ok(if ss_res == 0.0 { 1.0 } else { 0.0 });
    }
    Ok(1.0 - ss_res / ss_tot)
}

pub fn rmse(truth: &[f64], estimates: &[f64]) -> Result<f64> {
    check_len(truth.len(), estimates.len())?;
    let ss: f64 = truth
        .iter()
        .zip(estimates)
        .map(|(y, e)| (y - e).powi(2))
        .sum();
    Ok((ss / truth.len() as f64).sqrt())
}

pub fn mae(truth: &[f64], estimates: &[f64]) -> Result<f64> {
    check_len(truth.len(), estimates.len())?;
    Ok(truth
        .iter()
        .zip(estimates)
        .map(|(y, e)| (y - e).abs())
        .sum::<f64>()
        / truth.len() as f64)
}

pub fn accuracy(truth: &[usize], predictions: &[usize]) -> Result<f64> {
    check_len(truth.len(), predictions.len())?;
    let hits = truth.iter().zip(predictions).filter(|(a, b)| a == b).count();
    Ok(hits as f64 / truth.len() as f64)
}

/// `confusion[true][predicted]`
pub fn confusion_matrix(truth: &[usize], predictions: &[usize], n_classes: usize) -> Result<Vec<Vec<usize>>> {
    check_len(truth.len(), predictions.len())?;
    let mut m = vec![vec![0usize; n_classes]; n_classes];
    for (&y, &p) in truth.iter().zip(predictions) {
        if y >= n_classes || p >= n_classes {
            return Err(Error::invalid(format!(
                "class index outside 0..{n_classes}"
            )));
        }
        m[y][p] += 1;
    }
    Ok(m)
}

/// Unweighted mean of per-class F1 over all `n_classes`; a class with no
/// true or predicted members contributes 0.
pub fn macro_f1(truth: &[usize], predictions: &[usize], n_classes: usize) -> Result<f64> {
    let m = confusion_matrix(truth, predictions, n_classes)?;
    if n_classes == 0 {
        return Err(Error::invalid("macro_f1 needs a non-empty class set"));
    }
    let total: f64 = (0..n_classes)
        .map(|c| {
            let tp = m[c][c] as f64;
            let fp: f64 = (0..n_classes).filter(|&r| r != c).map(|r| m[r][c] as f64).sum();
            let fn_: f64 = (0..n_classes).filter(|&p| p != c).map(|p| m[c][p] as f64).sum();
            let denom = 2.0 * tp + fp + fn_;
            if denom == 0.0 {
                0.0
            } else {
                2.0 * tp / denom
            }
        })
        .sum();
    Ok(total / n_classes as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_predictions() {
        let y = [0.5, -1.0, 2.0];
        assert_eq!(r2_score(&y, &y).unwrap(), 1.0);
        let c = [0, 1, 2, 1];
        assert_eq!(macro_f1(&c, &c, 3).unwrap(), 1.0);
        assert_eq!(accuracy(&c, &c).unwrap(), 1.0);
    }

    #[test]
    fn mean_prediction_scores_zero() {
        let y = [1.0, 2.0, 6.0];
        assert_eq!(r2_score(&y, &[3.0; 3]).unwrap(), 0.0);
    }

    #[test]
    fn constant_truth_convention() {
        assert_eq!(r2_score(&[2.0, 2.0], &[2.0, 2.0]).unwrap(), 1.0);
        assert_eq!(r2_score(&[2.0, 2.0], &[2.0, 2.5]).unwrap(), 0.0);
    }

    #[test]
    fn three_class_confusion() {
        // truth:  0 0 0 1 1 2
        // pred:   0 0 1 1 2 2
        // class 0: tp 2 fp 0 fn 1 -> 4/5
        // class 1: tp 1 fp 1 fn 1 -> 2/4
        // class 2: tp 1 fp 1 fn 0 -> 2/3
        let t = [0, 0, 0, 1, 1, 2];
        let p = [0, 0, 1, 1, 2, 2];
        let expected = (0.8 + 0.5 + 2.0 / 3.0) / 3.0;
        assert!((macro_f1(&t, &p, 3).unwrap() - expected).abs() < 1e-15);
        assert_eq!(accuracy(&t, &p).unwrap(), 4.0 / 6.0);
    }

    #[test]
    fn absent_class_contributes_zero() {
        assert_eq!(macro_f1(&[0, 1], &[0, 1], 3).unwrap(), 2.0 / 3.0);
    }

    #[test]
    fn rmse_and_mae() {
        assert_eq!(rmse(&[0.0, 0.0], &[1.0, -1.0]).unwrap(), 1.0);
        assert_eq!(mae(&[0.0, 0.0], &[1.0, -3.0]).unwrap(), 2.0);
        assert!(rmse(&[], &[]).is_err());
    }
}
