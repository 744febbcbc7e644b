use std::io::Write;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Features, Forest, Tree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProximityKind {
    /// Training rows against training rows, averaged over out-of-bag trees.
    TrainOob,
    /// Query rows against training rows, averaged over all trees.
    Test,
}

/// Sparse row-stochastic weights over training instances.
///
/// A row is `None` when it has no source (a training instance that is
/// in-bag in every tree).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProximityMatrix {
    kind: ProximityKind,
    n_cols: usize,
    rows: Vec<Option<Vec<(usize, f64)>>>,
}

impl ProximityMatrix {
    pub fn from_rows(kind: ProximityKind, n_cols: usize, rows: Vec<Option<Vec<(usize, f64)>>>) -> Self {
        ProximityMatrix { kind, n_cols, rows }
    }

    pub fn kind(&self) -> ProximityKind {
        self.kind
    }

    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.n_cols
    }

    /// Non-zero `(column, weight)` pairs sorted by column.
    pub fn row(&self, i: usize) -> Option<&[(usize, f64)]> {
        self.rows[i].as_deref()
    }

    pub fn is_defined(&self, i: usize) -> bool {
        self.rows[i].is_some()
    }

    pub fn undefined_rows(&self) -> Vec<usize> {
        (0..self.rows.len()).filter(|&i| self.rows[i].is_none()).collect()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.rows[i].as_ref().map_or(0.0, |r| {
            r.binary_search_by_key(&j, |e| e.0).map_or(0.0, |k| r[k].1)
        })
    }

    pub fn row_sum(&self, i: usize) -> Option<f64> {
        self.rows[i].as_ref().map(|r| r.iter().map(|e| e.1).sum())
    }

    /// Replace row `i` (used to substitute a fallback for undefined rows).
    pub fn set_row(&mut self, i: usize, row: Vec<(usize, f64)>) {
        self.rows[i] = Some(row);
    }

    /// Dense export; undefined rows become all-zero.
    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        self.rows
            .iter()
            .map(|r| {
                let mut dense = vec![0.0; self.n_cols];
                for &(j, w) in r.iter().flatten() {
                    dense[j] = w;
                }
                dense
            })
            .collect()
    }

    /// Largest deviation of a defined row sum from 1, or any negative weight.
    pub fn max_row_sum_error(&self) -> f64 {
        self.rows
            .iter()
            .flatten()
            .map(|r| {
                if r.iter().any(|e| e.1 < 0.0) {
                    f64::INFINITY
                } else {
                    (r.iter().map(|e| e.1).sum::<f64>() - 1.0).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    /// Class scores `sum_j p(i, j) 1[y_j = c]` for a defined row.
    pub fn weighted_vote(&self, i: usize, labels: &[usize], n_classes: usize) -> Option<Vec<f64>> {
        self.rows[i].as_ref().map(|r| {
            let mut votes = vec![0.0; n_classes];
            for &(j, w) in r {
                votes[labels[j]] += w;
            }
            votes
        })
    }

    /// Sparse triplet CSV: header `row,col,weight`, one line per non-zero.
    pub fn write_triplets<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        writeln!(w, "row,col,weight")?;
        for (i, r) in self.rows.iter().enumerate() {
            for &(j, v) in r.iter().flatten() {
                writeln!(w, "{i},{j},{v}")?;
            }
        }
        Ok(())
    }

    pub fn write_triplets_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        self.write_triplets(std::io::BufWriter::new(file))
            .map_err(|e| Error::io(path, e))
    }
}

/// Per leaf node, the in-bag members `(j, c_j(t) / |M(t)|)`.
fn leaf_weights(tree: &Tree) -> Vec<Vec<(usize, f64)>> {
    let mut members: Vec<Vec<(usize, u32)>> = vec![Vec::new(); tree.nodes().len()];
    for (j, (&c, &leaf)) in tree.in_bag_counts().iter().zip(tree.leaf_of()).enumerate() {
        if c > 0 {
            members[leaf as usize].push((j, c));
        }
    }
    members
        .into_iter()
        .map(|m| {
            let size: u32 = m.iter().map(|e| e.1).sum();
            m.into_iter()
                .map(|(j, c)| (j, c as f64 / size as f64))
                .collect()
        })
        .collect()
}

fn collect_row(acc: &mut [f64], touched: &mut Vec<usize>, scale: f64) -> Vec<(usize, f64)> {
    touched.sort_unstable();
    let row = touched
        .iter()
        .map(|&j| {
            let w = acc[j] * scale;
            acc[j] = 0.0;
            (j, w)
        })
        .collect();
    touched.clear();
    row
}

fn accumulate(acc: &mut [f64], touched: &mut Vec<usize>, leaf: &[(usize, f64)]) {
    for &(j, w) in leaf {
        if acc[j] == 0.0 {
            touched.push(j);
        }
        acc[j] += w;
    }
}

/// RF-GAP proximities among training instances:
/// `p(i, j) = 1/|S_i| * sum_{t in S_i} c_j(t) 1[j in leaf_t(i)] / |M_i(t)|`.
pub fn gap_proximities(forest: &Forest) -> ProximityMatrix {
    let n = forest.n_train();
    let leaves: Vec<Vec<Vec<(usize, f64)>>> = forest.trees().par_iter().map(leaf_weights).collect();
    let rows: Vec<Option<Vec<(usize, f64)>>> = (0..n)
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], Vec::new()),
            |(acc, touched), i| {
                let mut oob = 0usize;
                for (tree, leaf_map) in forest.trees().iter().zip(&leaves) {
                    if !tree.is_oob(i) {
                        continue;
                    }
                    oob += 1;
                    accumulate(acc, touched, &leaf_map[tree.leaf_of()[i] as usize]);
                }
                (oob > 0).then(|| collect_row(acc, touched, 1.0 / oob as f64))
            },
        )
        .collect();
    let undefined = rows.iter().filter(|r| r.is_none()).count();
    if undefined > 0 {
        warn!("gap_proximities: {undefined} training rows are in-bag in every tree (undefined rows)");
    }
    ProximityMatrix {
        kind: ProximityKind::TrainOob,
        n_cols: n,
        rows,
    }
}

/// RF-GAP proximities from query rows to training rows. Query rows are
/// out-of-bag in every tree, so all trees contribute.
pub fn gap_proximities_test(forest: &Forest, features: Features<'_>) -> Result<ProximityMatrix> {
    if features.cols() != forest.n_features() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} feature columns", forest.n_features()),
            found: features.cols().to_string(),
        });
    }
    let n = forest.n_train();
    let leaves: Vec<Vec<Vec<(usize, f64)>>> = forest.trees().par_iter().map(leaf_weights).collect();
    let k = forest.trees().len() as f64;
    let rows = (0..features.rows())
        .into_par_iter()
        .map_init(
            || (vec![0.0; n], Vec::new()),
            |(acc, touched), q| {
                let row = features.row(q);
                for (tree, leaf_map) in forest.trees().iter().zip(&leaves) {
                    accumulate(acc, touched, &leaf_map[tree.route(row)]);
                }
                Some(collect_row(acc, touched, 1.0 / k))
            },
        )
        .collect();
    Ok(ProximityMatrix {
        kind: ProximityKind::Test,
        n_cols: n,
        rows,
    })
}

/// Original (Breiman) proximity: fraction of trees in which two training
/// instances share a leaf. Dense, symmetric, unit diagonal.
#[allow(clippy::needless_range_loop)]
pub fn classic_proximity(forest: &Forest) -> Vec<Vec<f64>> {
    let n = forest.n_train();
    let k = forest.trees().len() as f64;
    let mut prox = vec![vec![0.0; n]; n];
    for tree in forest.trees() {
        let leaf = tree.leaf_of();
        for a in 0..n {
            for b in a..n {
                if leaf[a] == leaf[b] {
                    prox[a][b] += 1.0;
                }
            }
        }
    }
    for a in 0..n {
        for b in a..n {
            prox[a][b] /= k;
            prox[b][a] = prox[a][b];
        }
    }
    prox
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forest::{fit_forest, ForestParams, Node};

    fn one_leaf_tree(in_bag: Vec<u32>) -> Tree {
        let n = in_bag.len();
        Tree::from_parts(
            vec![Node::Leaf {
                class_counts: vec![in_bag.iter().sum()],
            }],
            in_bag,
            vec![0; n],
        )
    }

    #[test]
    fn single_tree_multiset_weights() {
        // instances: 0 = x_i (OOB), 1 = x_1 (twice in bag), 2 = x_2 (once), 3 OOB
        let forest = Forest::from_parts(vec![one_leaf_tree(vec![0, 2, 1, 0])], 1, 1).unwrap();
        let p = gap_proximities(&forest);
        assert_eq!(p.get(0, 1), 2.0 / 3.0);
        assert_eq!(p.get(0, 2), 1.0 / 3.0);
        assert_eq!(p.get(0, 0), 0.0);
        assert_eq!(p.get(0, 3), 0.0);
        assert!(!p.is_defined(1));
        assert!(!p.is_defined(2));
        assert_eq!(p.undefined_rows(), vec![1, 2]);
    }

    #[test]
    fn single_tree_test_row() {
        // leaf 1 holds {x_3, x_3, x_3, x_7}; leaf 2 holds x_0
        let mut in_bag = vec![0u32; 8];
        in_bag[3] = 3;
        in_bag[7] = 1;
        in_bag[0] = 4;
        let mut leaf_of = vec![1u32; 8];
        leaf_of[0] = 2;
        let nodes = vec![
            Node::Split {
                feature: 0,
                threshold: 0.5,
                left: 1,
                right: 2,
            },
            Node::Leaf {
                class_counts: vec![4],
            },
            Node::Leaf {
                class_counts: vec![4],
            },
        ];
        let forest = Forest::from_parts(vec![Tree::from_parts(nodes, in_bag, leaf_of)], 1, 1).unwrap();
        let q = vec![0.0];
        let p = gap_proximities_test(&forest, Features::new(&q, 1, 1).unwrap()).unwrap();
        assert_eq!(p.row(0).unwrap(), &[(3, 0.75), (7, 0.25)]);
    }

    #[test]
    fn diagonal_is_zero_and_rows_sum_to_one() {
        let (x, y) = crate::forest::tests::blobs(60, 3, 0.7, 11);
        let f = Features::new(&x, 60, 3).unwrap();
        let forest = fit_forest(f, &y, 2, &ForestParams::default().with_trees(50)).unwrap();
        let p = gap_proximities(&forest);
        for i in 0..60 {
            assert_eq!(p.get(i, i), 0.0);
        }
        assert!(p.max_row_sum_error() < 1e-9);
        let t = gap_proximities_test(&forest, f).unwrap();
        assert!(t.max_row_sum_error() < 1e-9);
        assert_eq!(t.kind(), ProximityKind::Test);
    }

    #[test]
    #[allow(clippy::needless_range_loop)]
    fn classic_proximity_bounds_and_duplicates() {
        let mut x = vec![0.1, 0.5, 0.9, 0.3, 0.3, 0.8, 0.2, 0.7];
        x.extend_from_slice(&[0.5, 0.5]);
        let y = vec![0, 1, 0, 1, 0, 1, 0, 1, 0, 0];
        let f = Features::new(&x, 10, 1).unwrap();
        let forest = fit_forest(f, &y, 2, &ForestParams::default().with_trees(30)).unwrap();
        let c = classic_proximity(&forest);
        assert_eq!(c[8][9], 1.0);
        for a in 0..10 {
            assert_eq!(c[a][a], 1.0);
            for b in 0..10 {
                assert!((0.0..=1.0).contains(&c[a][b]));
                assert_eq!(c[a][b], c[b][a]);
            }
        }
    }

    #[test]
    fn triplet_export() {
        let forest = Forest::from_parts(vec![one_leaf_tree(vec![0, 1, 1])], 1, 1).unwrap();
        let mut buf = Vec::new();
        gap_proximities(&forest).write_triplets(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap(), "row,col,weight\n0,1,0.5\n0,2,0.5\n");
    }
}
