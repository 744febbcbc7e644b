//! Bagged Gini decision-tree ensembles and their RF-GAP proximities.
//!
//! Each tree draws a bootstrap sample of size `N` (with replacement) from a
//! stream seeded by `(seed, tree index)`, so a fitted forest is identical
//! no matter how many rayon workers built it.
//!
//! Class predictions average the leaf class proportions over trees (soft
//! voting). This is the vote that GAP proximities reproduce exactly:
//! `sum_j p(i, j) 1[y_j = c]` equals the out-of-bag mean of leaf
//! proportions for class `c`. Ties break toward the lowest class index.

mod proximity;
mod tree;

use log::warn;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::rng_for;

pub use proximity::{
    classic_proximity, gap_proximities, gap_proximities_test, ProximityKind, ProximityMatrix,
};
pub use tree::{Node, Tree};

/// Row-major feature matrix view.
#[derive(Debug, Clone, Copy)]
pub struct Features<'a> {
    data: &'a [f64],
    rows: usize,
    cols: usize,
}

impl<'a> Features<'a> {
    pub fn new(data: &'a [f64], rows: usize, cols: usize) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                expected: format!("{rows}x{cols} = {} values", rows * cols),
                found: data.len().to_string(),
            });
        }
        Ok(Features { data, rows, cols })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, f: usize) -> f64 {
        self.data[i * self.cols + f]
    }

    #[inline]
    pub fn row(&self, i: usize) -> &'a [f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

/// Owned row-major matrix produced by the transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub data: Vec<f64>,
    pub rows: usize,
    pub cols: usize,
}

impl FeatureMatrix {
    pub fn view(&self) -> Features<'_> {
        Features {
            data: &self.data,
            rows: self.rows,
            cols: self.cols,
        }
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    #[default]
    Sqrt,
    Log2,
    All,
    Count(usize),
    Fraction(f64),
}

impl MaxFeatures {
    pub fn resolve(self, d: usize) -> usize {
        let m = match self {
            MaxFeatures::Sqrt => (d as f64).sqrt().floor() as usize,
            MaxFeatures::Log2 => (d as f64).log2().floor() as usize,
            MaxFeatures::All => d,
            MaxFeatures::Count(k) => k,
            MaxFeatures::Fraction(f) => (f * d as f64).floor() as usize,
        };
        m.clamp(1, d.max(1))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForestParams {
    pub num_trees: usize,
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub max_features: MaxFeatures,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            num_trees: 200,
            max_depth: None,
            min_leaf: 1,
            max_features: MaxFeatures::Sqrt,
            seed: 0,
        }
    }
}

impl ForestParams {
    pub fn with_trees(mut self, num_trees: usize) -> Self {
        self.num_trees = num_trees;
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Forest {
    trees: Vec<Tree>,
    n_train: usize,
    n_features: usize,
    n_classes: usize,
    params: ForestParams,
    /// Set when the training labels held a single class.
    single_class: bool,
}

/// Trains `params.num_trees` bootstrap trees on `features`.
pub fn fit_forest(
    features: Features<'_>,
    labels: &[usize],
    n_classes: usize,
    params: &ForestParams,
) -> Result<Forest> {
    let n = features.rows();
    let d = features.cols();
    if params.num_trees == 0 {
        return Err(Error::invalid("forest needs at least one tree"));
    }
    if n < 2 {
        return Err(Error::invalid(format!("forest needs at least 2 rows, got {n}")));
    }
    if d == 0 {
        return Err(Error::invalid("forest needs at least one feature column"));
    }
    if params.min_leaf == 0 {
        return Err(Error::invalid("min_leaf must be at least 1"));
    }
    if labels.len() != n {
        return Err(Error::DimensionMismatch {
            expected: format!("{n} labels"),
            found: labels.len().to_string(),
        });
    }
    if let Some(&y) = labels.iter().find(|&&y| y >= n_classes) {
        return Err(Error::invalid(format!("label {y} outside {n_classes} classes")));
    }
    if let Some(k) = (0..n * d).find(|&k| !features.data[k].is_finite()) {
        return Err(Error::invalid(format!(
            "non-finite feature at row {}, column {}",
            k / d,
            k % d
        )));
    }
    let single_class = labels.iter().all(|&y| y == labels[0]);
    if single_class {
        warn!("fit_forest: training labels hold a single class; trees are single leaves");
    }
    let grow = tree::GrowParams {
        max_depth: params.max_depth,
        min_leaf: params.min_leaf,
        mtry: params.max_features.resolve(d),
        n_classes,
    };
    let trees = (0..params.num_trees)
        .into_par_iter()
        .map(|t| {
            let mut rng = rng_for(params.seed, t as u64);
            let mut counts = vec![0u32; n];
            for _ in 0..n {
                counts[rng.random_range(0..n)] += 1;
            }
            Tree::grow(&features, labels, counts, &grow, &mut rng)
        })
        .collect();
    Ok(Forest {
        trees,
        n_train: n,
        n_features: d,
        n_classes,
        params: params.clone(),
        single_class,
    })
}

pub(crate) fn argmax_lowest(scores: &[f64]) -> usize {
    let mut best = 0;
    for (c, &s) in scores.iter().enumerate() {
        if s > scores[best] {
            best = c;
        }
    }
    best
}

impl Forest {
    /// Assemble a forest from hand-built trees.
    pub fn from_parts(trees: Vec<Tree>, n_features: usize, n_classes: usize) -> Result<Self> {
        let n_train = trees.first().map_or(0, |t| t.in_bag_counts().len());
        if trees.is_empty() || trees.iter().any(|t| t.in_bag_counts().len() != n_train) {
            return Err(Error::invalid("trees must be non-empty and share a training size"));
        }
        Ok(Forest {
            trees,
            n_train,
            n_features,
            n_classes,
            params: ForestParams::default(),
            single_class: false,
        })
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    pub fn n_train(&self) -> usize {
        self.n_train
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.n_classes
    }

    pub fn params(&self) -> &ForestParams {
        &self.params
    }

    pub fn is_single_class(&self) -> bool {
        self.single_class
    }

    /// `S_i`: trees in which training instance `i` is out-of-bag.
    pub fn oob_trees(&self, i: usize) -> Vec<usize> {
        (0..self.trees.len())
            .filter(|&t| self.trees[t].is_oob(i))
            .collect()
    }

    pub fn oob_sets(&self) -> Vec<Vec<usize>> {
        (0..self.n_train).map(|i| self.oob_trees(i)).collect()
    }

    fn check_dims(&self, features: &Features<'_>) -> Result<()> {
        if features.cols() != self.n_features {
            return Err(Error::DimensionMismatch {
                expected: format!("{} feature columns", self.n_features),
                found: features.cols().to_string(),
            });
        }
        Ok(())
    }

    fn add_leaf_proportions(&self, tree: &Tree, leaf: usize, acc: &mut [f64]) {
        let counts = tree.leaf_counts(leaf);
        let total: u32 = counts.iter().sum();
        if total == 0 {
            return;
        }
        for (a, &c) in acc.iter_mut().zip(counts) {
            *a += c as f64 / total as f64;
        }
    }

    /// Mean leaf class proportions over all trees.
    pub fn predict_proba(&self, features: Features<'_>) -> Result<Vec<Vec<f64>>> {
        self.check_dims(&features)?;
        Ok((0..features.rows())
            .into_par_iter()
            .map(|i| {
                let row = features.row(i);
                let mut acc = vec![0.0; self.n_classes];
                for tree in &self.trees {
                    self.add_leaf_proportions(tree, tree.route(row), &mut acc);
                }
                let k = self.trees.len() as f64;
                acc.iter_mut().for_each(|a| *a /= k);
                acc
            })
            .collect())
    }

    pub fn predict(&self, features: Features<'_>) -> Result<Vec<usize>> {
        Ok(self
            .predict_proba(features)?
            .iter()
            .map(|p| argmax_lowest(p))
            .collect())
    }

    /// Out-of-bag class scores; `None` where the instance is in every bootstrap.
    pub fn oob_proba(&self) -> Vec<Option<Vec<f64>>> {
        (0..self.n_train)
            .into_par_iter()
            .map(|i| {
                let mut acc = vec![0.0; self.n_classes];
                let mut used = 0usize;
                for tree in self.trees.iter().filter(|t| t.is_oob(i)) {
                    self.add_leaf_proportions(tree, tree.leaf_of()[i] as usize, &mut acc);
                    used += 1;
                }
                (used > 0).then(|| {
                    acc.iter_mut().for_each(|a| *a /= used as f64);
                    acc
                })
            })
            .collect()
    }

    pub fn oob_predict(&self) -> Vec<Option<usize>> {
        self.oob_proba()
            .into_iter()
            .map(|p| p.map(|p| argmax_lowest(&p)))
            .collect()
    }

    /// OOB accuracy over instances with a defined OOB prediction.
    pub fn oob_accuracy(&self, labels: &[usize]) -> Option<f64> {
        let preds = self.oob_predict();
        let defined: Vec<(usize, usize)> = preds
            .iter()
            .zip(labels)
            .filter_map(|(p, &y)| p.map(|p| (p, y)))
            .collect();
        if defined.is_empty() {
            return None;
        }
        let hits = defined.iter().filter(|(p, y)| p == y).count();
        Some(hits as f64 / defined.len() as f64)
    }
}
