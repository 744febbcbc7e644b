//! Independent reference implementations shared by the integration tests.
#![allow(dead_code)]

use gap_impute::forest::{Forest, Node, Tree};
use gap_impute::rng::rng_for;
use rand::Rng;
use rand_distr::{Distribution, Normal};

/// Gaussian blobs: `classes` centres on a scaled simplex-like grid, `d` columns.
pub fn blobs(n: usize, d: usize, classes: usize, sep: f64, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = rng_for(seed, 7);
    let noise = Normal::new(0.0, 1.0).unwrap();
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let c = i % classes;
        for f in 0..d {
            let centre = if f % classes == c { sep } else { 0.0 };
            x.push(centre + noise.sample(&mut rng));
        }
        y.push(c);
    }
    (x, y)
}

/// Uniform noise features with labels from a noisy threshold on the first column.
pub fn noisy_threshold(n: usize, d: usize, flip: f64, seed: u64) -> (Vec<f64>, Vec<usize>) {
    let mut rng = rng_for(seed, 11);
    let mut x = Vec::with_capacity(n * d);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let row: Vec<f64> = (0..d).map(|_| rng.random::<f64>()).collect();
        let mut label = usize::from(row[0] > 0.5);
        if rng.random::<f64>() < flip {
            label = 1 - label;
        }
        x.extend(row);
        y.push(label);
    }
    (x, y)
}

/// Descends from the root by comparing the raw feature value to each split threshold.
pub fn leaf_by_descent(tree: &Tree, row: &[f64]) -> usize {
    let mut node = 0;
    loop {
        match &tree.nodes()[node] {
            Node::Leaf { .. } => return node,
            Node::Split {
                feature,
                threshold,
                left,
                right,
            } => node = if row[*feature] <= *threshold { *left } else { *right },
        }
    }
}

/// Textbook RF-GAP for training rows, one (i, t, j) term at a time.
/// Rows that are in-bag in every tree are `None`.
pub fn naive_gap_train(forest: &Forest, x: &[f64], d: usize) -> Vec<Option<Vec<f64>>> {
    let n = forest.n_train();
    let row = |i: usize| &x[i * d..(i + 1) * d];
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        let mut p = vec![0.0; n];
        let mut s_i = 0usize;
        for tree in forest.trees() {
            let c = tree.in_bag_counts();
            if c[i] != 0 {
                continue;
            }
            s_i += 1;
            let leaf_i = leaf_by_descent(tree, row(i));
            let m: u32 = (0..n).filter(|&k| leaf_by_descent(tree, row(k)) == leaf_i).map(|k| c[k]).sum();
            for (j, pj) in p.iter_mut().enumerate() {
                if leaf_by_descent(tree, row(j)) == leaf_i {
                    *pj += c[j] as f64 / m as f64;
                }
            }
        }
        if s_i == 0 {
            out.push(None);
        } else {
            out.push(Some(p.into_iter().map(|v| v / s_i as f64).collect()));
        }
    }
    out
}

/// Textbook RF-GAP from query rows (out-of-bag in every tree) to training rows.
pub fn naive_gap_test(forest: &Forest, x_train: &[f64], x_query: &[f64], d: usize) -> Vec<Vec<f64>> {
    let n = forest.n_train();
    let k = forest.trees().len() as f64;
    let train_row = |i: usize| &x_train[i * d..(i + 1) * d];
    x_query
        .chunks(d)
        .map(|q| {
            let mut p = vec![0.0; n];
            for tree in forest.trees() {
                let c = tree.in_bag_counts();
                let leaf_q = leaf_by_descent(tree, q);
                let m: u32 = (0..n).filter(|&j| leaf_by_descent(tree, train_row(j)) == leaf_q).map(|j| c[j]).sum();
                for (j, pj) in p.iter_mut().enumerate() {
                    if leaf_by_descent(tree, train_row(j)) == leaf_q {
                        *pj += c[j] as f64 / m as f64;
                    }
                }
            }
            p.into_iter().map(|v| v / k).collect()
        })
        .collect()
}

/// Minimum total `|a_i - b_j|` over every monotone warping path, found by
/// walking all paths explicitly. Cells with `|i - j| > band` are forbidden.
pub fn dtw_by_enumeration(a: &[f64], b: &[f64], band: Option<usize>) -> Option<f64> {
    fn walk(a: &[f64], b: &[f64], band: Option<usize>, i: usize, j: usize, acc: f64, best: &mut Option<f64>) {
        if band.is_some_and(|w| i.abs_diff(j) > w) {
            return;
        }
        let acc = acc + (a[i] - b[j]).abs();
        if i + 1 == a.len() && j + 1 == b.len() {
            if best.is_none_or(|b| acc < b) {
                *best = Some(acc);
            }
            return;
        }
        if i + 1 < a.len() {
            walk(a, b, band, i + 1, j, acc, best);
        }
        if j + 1 < b.len() {
            walk(a, b, band, i, j + 1, acc, best);
        }
        if i + 1 < a.len() && j + 1 < b.len() {
            walk(a, b, band, i + 1, j + 1, acc, best);
        }
    }
    let mut best = None;
    walk(a, b, band, 0, 0, 0.0, &mut best);
    best
}

/// Every series of length 1..=`max_len` over `alphabet`.
pub fn all_series(alphabet: &[f64], max_len: usize) -> Vec<Vec<f64>> {
    let mut out = Vec::new();
    let mut layer: Vec<Vec<f64>> = vec![Vec::new()];
    for _ in 0..max_len {
        layer = layer
            .iter()
            .flat_map(|s| {
                alphabet.iter().map(move |&v| {
                    let mut t = s.clone();
                    t.push(v);
                    t
                })
            })
            .collect();
        out.extend(layer.iter().cloned());
    }
    out
}

/// Percentile by the "(n - 1) q" rank rule with linear interpolation between
/// order statistics, written from the order statistics directly.
pub fn percentile_by_rank(values: &[f64], q: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let h = (v.len() as f64 - 1.0) * q;
    let below = h.floor();
    let frac = h - below;
    let lo = v[below as usize];
    match v.get(below as usize + 1) {
        Some(&hi) if frac > 0.0 => lo + frac * (hi - lo),
        _ => lo,
    }
}

/// Pearson chi-square statistic of a contingency table, all cells kept.
pub fn chi_square_stat(table: &[Vec<usize>]) -> f64 {
    let total: f64 = table.iter().flatten().sum::<usize>() as f64;
    let cols = table[0].len();
    let col_sum = |c: usize| table.iter().map(|r| r[c]).sum::<usize>() as f64;
    let mut stat = 0.0;
    for r in table {
        let row_sum = r.iter().sum::<usize>() as f64;
        for (c, &obs) in r.iter().enumerate().take(cols) {
            let e = row_sum * col_sum(c) / total;
            stat += (obs as f64 - e).powi(2) / e;
        }
    }
    stat
}
