use crate::error::{Error, Result};

/// Dynamic time warping distance with absolute local cost and the
/// match/insert/delete step set. `band` is a Sakoe-Chiba half-width in
/// index units (`|i - j| <= band`).
pub fn dtw_distance(a: &[f64], b: &[f64], band: Option<usize>) -> Result<f64> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("dtw_distance needs non-empty series"));
    }
    let (n, m) = (a.len(), b.len());
    let diff = n.abs_diff(m);
    let w = match band {
        Some(w) if w < diff => return Err(Error::InfeasibleBand { band: w, diff }),
        Some(w) => w,
        None => n.max(m),
    };
    // Rolling rows over b, index 0 is the virtual boundary.
    let mut prev = vec![f64::INFINITY; m + 1];
    let mut curr = vec![f64::INFINITY; m + 1];
    prev[0] = 0.0;
    for i in 1..=n {
        curr.fill(f64::INFINITY);
        let lo = i.saturating_sub(w).max(1);
        let hi = (i + w).min(m);
        for j in lo..=hi {
            let cost = (a[i - 1] - b[j - 1]).abs();
            let best = prev[j - 1].min(prev[j]).min(curr[j - 1]);
            curr[j] = cost + best;
        }
        std::mem::swap(&mut prev, &mut curr);
    }
    Ok(prev[m])
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_series_have_zero_distance() {
        assert_eq!(dtw_distance(&[1.0, 2.0, 3.0], &[1.0, 2.0, 3.0], None).unwrap(), 0.0);
    }

    #[test]
    fn hand_computed_values() {
        assert_eq!(dtw_distance(&[0.0, 0.0, 0.0], &[1.0, 1.0, 1.0], None).unwrap(), 3.0);
        assert_eq!(dtw_distance(&[1.0, 2.0], &[2.0, 1.0], None).unwrap(), 2.0);
    }

    #[test]
    fn symmetric() {
        let a = [0.3, 1.9, -0.4, 2.2, 0.0];
        let b = [1.0, -1.0, 0.5];
        assert_eq!(
            dtw_distance(&a, &b, None).unwrap(),
            dtw_distance(&b, &a, None).unwrap()
        );
    }

    #[test]
    fn band_constraints() {
        let a = [0.0, 1.0, 2.0, 3.0];
        let b = [0.0, 0.0, 1.0, 2.0, 3.0];
        assert!(matches!(
            dtw_distance(&a, &b, Some(0)),
            Err(Error::InfeasibleBand { band: 0, diff: 1 })
        ));
        assert_eq!(dtw_distance(&a, &b, Some(1)).unwrap(), 0.0);
        // a zero band on equal lengths is the L1 distance
        let c = [1.0, 0.0, 2.0, 2.0];
        assert_eq!(dtw_distance(&a, &c, Some(0)).unwrap(), 1.0 + 1.0 + 0.0 + 1.0);
        assert!(dtw_distance(&a, &c, None).unwrap() <= 3.0);
    }

    #[test]
    fn empty_rejected() {
        assert!(dtw_distance(&[], &[1.0], None).is_err());
    }
}
