use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::Features;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    /// Weighted (bootstrap multiplicity) class histogram of the in-bag samples.
    Leaf { class_counts: Vec<u32> },
}

/// A single bagged tree together with its bootstrap bookkeeping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    nodes: Vec<Node>,
    /// Bootstrap multiplicity of every training instance.
    in_bag_counts: Vec<u32>,
    /// Terminal node of every training instance (in-bag or not).
    leaf_of: Vec<u32>,
}

pub(crate) struct GrowParams {
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub mtry: usize,
    pub n_classes: usize,
}

impl Tree {
    /// Assemble a tree from parts; `leaf_of` must point at leaf nodes.
    pub fn from_parts(nodes: Vec<Node>, in_bag_counts: Vec<u32>, leaf_of: Vec<u32>) -> Self {
        debug_assert_eq!(in_bag_counts.len(), leaf_of.len());
        debug_assert!(leaf_of
            .iter()
            .all(|&l| matches!(nodes[l as usize], Node::Leaf { .. })));
        Tree {
            nodes,
            in_bag_counts,
            leaf_of,
        }
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn in_bag_counts(&self) -> &[u32] {
        &self.in_bag_counts
    }

    pub fn leaf_of(&self) -> &[u32] {
        &self.leaf_of
    }

    pub fn is_oob(&self, i: usize) -> bool {
        self.in_bag_counts[i] == 0
    }

    pub fn n_leaves(&self) -> usize {
        self.nodes
            .iter()
            .filter(|n| matches!(n, Node::Leaf { .. }))
            .count()
    }

    pub fn depth(&self) -> usize {
        fn go(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + go(nodes, *left).max(go(nodes, *right)),
            }
        }
        go(&self.nodes, 0)
    }

    /// Terminal node reached by `row`.
    pub fn route(&self, row: &[f64]) -> usize {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { .. } => return at,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn leaf_counts(&self, leaf: usize) -> &[u32] {
        match &self.nodes[leaf] {
            Node::Leaf { class_counts } => class_counts,
            Node::Split { .. } => panic!("node {leaf} is not a leaf"),
        }
    }

    /// Grows a tree on the bootstrap sample described by `in_bag_counts`.
    pub(crate) fn grow<R: Rng>(
        x: &Features<'_>,
        labels: &[usize],
        in_bag_counts: Vec<u32>,
        params: &GrowParams,
        rng: &mut R,
    ) -> Tree {
        let samples: Vec<usize> = (0..x.rows)
            .filter(|&i| in_bag_counts[i] > 0)
            .collect();
        let mut builder = Builder {
            x,
            labels,
            weights: &in_bag_counts,
            params,
            nodes: Vec::new(),
            feature_order: (0..x.cols).collect(),
        };
        builder.build(samples, rng);
        let nodes = builder.nodes;
        let mut tree = Tree {
            nodes,
            in_bag_counts,
            leaf_of: Vec::new(),
        };
        tree.leaf_of = (0..x.rows).map(|i| tree.route(x.row(i)) as u32).collect();
        tree
    }
}

struct Builder<'a> {
    x: &'a Features<'a>,
    labels: &'a [usize],
    weights: &'a [u32],
    params: &'a GrowParams,
    nodes: Vec<Node>,
    feature_order: Vec<usize>,
}

struct Candidate {
    feature: usize,
    threshold: f64,
    score: f64,
}

fn gini_mass(counts: &[f64], total: f64) -> f64 {
    // total * gini = total - sum(c^2)/total
    if total <= 0.0 {
        return 0.0;
    }
    total - counts.iter().map(|c| c * c).sum::<f64>() / total
}

impl Builder<'_> {
    fn histogram(&self, samples: &[usize]) -> Vec<u32> {
        let mut counts = vec![0u32; self.params.n_classes];
        for &i in samples {
            counts[self.labels[i]] += self.weights[i];
        }
        counts
    }

    fn build<R: Rng>(&mut self, root: Vec<usize>, rng: &mut R) {
        // (samples, depth, slot to patch in parent)
        self.nodes.push(Node::Leaf {
            class_counts: Vec::new(),
        });
        let mut stack = vec![(root, 0usize, 0usize)];
        while let Some((samples, depth, slot)) = stack.pop() {
            let counts = self.histogram(&samples);
            let total: u32 = counts.iter().sum();
            let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
            let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
            let size_ok = total as usize >= 2 * self.params.min_leaf;
            let split = if !pure && depth_ok && size_ok {
                self.best_split(&samples, &counts, rng)
            } else {
                None
            };
            match split {
                None => self.nodes[slot] = Node::Leaf {
                    class_counts: counts,
                },
                Some(c) => {
                    let (left, right): (Vec<usize>, Vec<usize>) = samples
                        .iter()
                        .partition(|&&i| self.x.get(i, c.feature) <= c.threshold);
                    let l = self.nodes.len();
                    self.nodes.push(Node::Leaf {
                        class_counts: Vec::new(),
                    });
                    let r = self.nodes.len();
                    self.nodes.push(Node::Leaf {
                        class_counts: Vec::new(),
                    });
                    self.nodes[slot] = Node::Split {
                        feature: c.feature,
                        threshold: c.threshold,
                        left: l,
                        right: r,
                    };
                    stack.push((right, depth + 1, r));
                    stack.push((left, depth + 1, l));
                }
            }
        }
    }

    /// Scans features in random order until `mtry` non-constant ones were
    /// evaluated (or all were tried), returning the largest Gini decrease.
    fn best_split<R: Rng>(
        &mut self,
        samples: &[usize],
        parent: &[u32],
        rng: &mut R,
    ) -> Option<Candidate> {
        let parent_f: Vec<f64> = parent.iter().map(|&c| c as f64).collect();
        let total: f64 = parent_f.iter().sum();
        let parent_mass = gini_mass(&parent_f, total);
        let mut order = std::mem::take(&mut self.feature_order);
        order.shuffle(rng);
        let mut best: Option<Candidate> = None;
        let mut informative = 0;
        let mut sorted: Vec<(f64, usize)> = Vec::with_capacity(samples.len());
        for &f in &order {
            if informative >= self.params.mtry {
                break;
            }
            sorted.clear();
            sorted.extend(samples.iter().map(|&i| (self.x.get(i, f), i)));
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            if sorted.first().map(|s| s.0) == sorted.last().map(|s| s.0) {
                continue;
            }
            informative += 1;
            let mut left = vec![0.0; parent.len()];
            let mut left_total = 0.0;
            for k in 0..sorted.len() - 1 {
                let (v, i) = sorted[k];
                let w = self.weights[i] as f64;
                left[self.labels[i]] += w;
                left_total += w;
                let next = sorted[k + 1].0;
                if next <= v {
                    continue;
                }
                let right_total = total - left_total;
                let min_leaf = self.params.min_leaf as f64;
                if left_total < min_leaf || right_total < min_leaf {
                    continue;
                }
                let right: Vec<f64> = parent_f.iter().zip(&left).map(|(p, l)| p - l).collect();
                let score =
                    parent_mass - gini_mass(&left, left_total) - gini_mass(&right, right_total);
                if best.as_ref().is_none_or(|b| score > b.score) {
                    let mut threshold = v + (next - v) / 2.0;
                    if threshold >= next {
                        threshold = v;
                    }
                    best = Some(Candidate {
                        feature: f,
                        threshold,
                        score,
                    });
                }
            }
        }
        self.feature_order = order;
        best
    }
}
