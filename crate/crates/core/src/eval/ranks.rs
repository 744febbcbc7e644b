use log::warn;

/// Ranks of `scores` (1 = best) with ties sharing their mean rank.
pub fn rank_with_ties(scores: &[f64], higher_is_better: bool) -> Vec<f64> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        let c = scores[a].total_cmp(&scores[b]);
        if higher_is_better {
            c.reverse()
        } else {
            c
        }
    });
    let mut ranks = vec![0.0; scores.len()];
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // positions start..end hold ranks start+1..=end
        let mean = (start + 1 + end) as f64 / 2.0;
        for &k in &order[start..end] {
            ranks[k] = mean;
        }
        start = end;
    }
    ranks
}

/// Mean rank of each method across datasets.
///
/// `scores[m][d]` is method `m` on dataset `d`; `None` marks a missing cell.
/// Each dataset is ranked over the methods present there, and each method's
/// mean is taken over the datasets where it has a score (`None` if none).
pub fn average_ranks(scores: &[Vec<Option<f64>>], higher_is_better: bool) -> Vec<Option<f64>> {
    let m = scores.len();
    let n_datasets = scores.iter().map(Vec::len).max().unwrap_or(0);
    let mut sums = vec![0.0; m];
    let mut counts = vec![0usize; m];
    let mut incomplete = 0usize;
    for d in 0..n_datasets {
        let present: Vec<(usize, f64)> = (0..m)
            .filter_map(|k| scores[k].get(d).copied().flatten().filter(|v| !v.is_nan()).map(|v| (k, v)))
            .collect();
        if present.len() < m {
            incomplete += 1;
        }
        let values: Vec<f64> = present.iter().map(|e| e.1).collect();
        for ((k, _), r) in present.iter().zip(rank_with_ties(&values, higher_is_better)) {
            sums[*k] += r;
            counts[*k] += 1;
        }
    }
    if incomplete > 0 {
        warn!("average_ranks: {incomplete} datasets have missing cells; ranked over the methods present");
    }
    sums.iter()
        .zip(&counts)
        .map(|(s, &c)| (c > 0).then(|| s / c as f64))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: &[&[f64]]) -> Vec<Vec<Option<f64>>> {
        rows.iter().map(|r| r.iter().map(|&v| Some(v)).collect()).collect()
    }

    #[test]
    fn domination_gives_rank_one() {
        let t = table(&[&[0.9, 0.8, 0.7], &[0.5, 0.4, 0.3], &[0.1, 0.2, 0.0]]);
        let r = average_ranks(&t, true);
        assert_eq!(r, vec![Some(1.0), Some(2.0), Some(3.0)]);
    }

    #[test]
    fn ties_share_mean_rank() {
        assert_eq!(rank_with_ties(&[0.5, 0.5], true), vec![1.5, 1.5]);
        assert_eq!(rank_with_ties(&[0.2, 0.9, 0.2, 0.1], true), vec![2.5, 1.0, 2.5, 4.0]);
        assert_eq!(rank_with_ties(&[0.2, 0.9, 0.2, 0.1], false), vec![2.5, 4.0, 2.5, 1.0]);
    }

    #[test]
    fn hand_ranked_table() {
        // datasets (columns) ranked by hand, higher is better
        //          d0   d1   d2   d3
        // A       .70  .60  .90  .50   -> 2, 2.5, 1, 3
        // B       .80  .60  .80  .55   -> 1, 2.5, 2, 2
        // C       .60  .65  .70  .60   -> 3, 1,   3, 1
        let t = table(&[&[0.70, 0.60, 0.90, 0.50], &[0.80, 0.60, 0.80, 0.55], &[0.60, 0.65, 0.70, 0.60]]);
        let r = average_ranks(&t, true);
        assert_eq!(r, vec![Some(8.5 / 4.0), Some(7.5 / 4.0), Some(2.0)]);
    }

    #[test]
    fn rank_sums_are_triangular() {
        let scores = [0.3, 0.1, 0.3, 0.9, 0.1];
        let s: f64 = rank_with_ties(&scores, true).iter().sum();
        assert_eq!(s, 15.0);
    }

    #[test]
    fn missing_cells_are_skipped() {
        let t = vec![vec![Some(0.9), None], vec![Some(0.1), Some(0.5)]];
        let r = average_ranks(&t, true);
        assert_eq!(r, vec![Some(1.0), Some(1.5)]);
    }
}
