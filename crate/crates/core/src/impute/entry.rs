//! Single-entry imputation rules driven by a proximity row.

/// Proximity-weighted average over donors observed at the target time point.
///
/// `donor_value(k)` returns the donor's observed value or `None` when the
/// donor is missing there. With `renormalize` the weights are rescaled to
/// sum to one over the available donors, so the result is a convex
/// combination of their values; without it the plain sum
/// `sum_k p(n, k) x_k` is returned. `None` signals that no donor with
/// positive weight is observed, and the caller must fall back.
pub fn impute_continuous_entry<F>(weights: &[(usize, f64)], donor_value: F, renormalize: bool) -> Option<f64>
where
    F: Fn(usize) -> Option<f64>,
{
    let mut total = 0.0;
    let mut acc = 0.0;
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for &(k, w) in weights {
        if w <= 0.0 {
            continue;
        }
        if let Some(v) = donor_value(k) {
            total += w;
            acc += w * v;
            lo = lo.min(v);
            hi = hi.max(v);
        }
    }
    if total <= 0.0 {
        return None;
    }
    if renormalize {
        // rounding can push a convex combination just outside its hull
        Some((acc / total).clamp(lo, hi))
    } else {
        Some(acc)
    }
}

/// Proximity-weighted majority vote over donors observed at the target time
/// point. Ties break toward the lowest class index; `None` when no donor
/// with positive weight is observed.
pub fn impute_categorical_entry<F>(weights: &[(usize, f64)], donor_class: F, n_classes: usize) -> Option<usize>
where
    F: Fn(usize) -> Option<usize>,
{
    let mut votes = vec![0.0; n_classes];
    let mut any = false;
    for &(k, w) in weights {
        if w <= 0.0 {
            continue;
        }
        if let Some(c) = donor_class(k) {
            votes[c] += w;
            any = true;
        }
    }
    any.then(|| crate::forest::argmax_lowest(&votes))
}
