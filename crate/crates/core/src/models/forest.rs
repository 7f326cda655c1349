//! Gini random forest with mean-decrease-in-impurity importances.

use rand::seq::index;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaxFeatures {
    /// ⌈√p⌉ candidate features per split.
    Sqrt,
    All,
    Count(usize),
}

impl MaxFeatures {
    fn resolve(self, p: usize) -> usize {
        match self {
            MaxFeatures::Sqrt => (p as f64).sqrt().ceil() as usize,
            MaxFeatures::All => p,
            MaxFeatures::Count(k) => k,
        }
        .clamp(1, p.max(1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_trees: usize,
    /// `None` grows until leaves are pure.
    pub max_depth: Option<usize>,
    pub max_features: MaxFeatures,
    pub bootstrap: bool,
    pub min_samples_split: usize,
}

impl Default for ForestParams {
    fn default() -> Self {
        ForestParams {
            n_trees: 100,
            max_depth: Some(2),
            max_features: MaxFeatures::Sqrt,
            bootstrap: true,
            min_samples_split: 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        /// Fraction of class-1 samples reaching the leaf.
        p1: f64,
        n: usize,
    },
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
        n: usize,
        /// `n/N · (gini − n_l/n · gini_l − n_r/n · gini_r)`.
        weighted_decrease: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tree {
    pub nodes: Vec<TreeNode>,
}

impl Tree {
    pub fn proba(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                TreeNode::Leaf { p1, .. } => return *p1,
                TreeNode::Split {
                    feature,
                    threshold,
                    left,
                    right,
                    ..
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    /// Unnormalized impurity decrease credited to each feature.
    pub fn importance(&self, p: usize) -> Vec<f64> {
        let mut imp = vec![0.0; p];
        for node in &self.nodes {
            if let TreeNode::Split {
                feature,
                weighted_decrease,
                ..
            } = node
            {
                imp[*feature] += weighted_decrease;
            }
        }
        imp
    }
}

fn gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let q = pos as f64 / n as f64;
    2.0 * q * (1.0 - q)
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [bool],
    params: &'a ForestParams,
    mtry: usize,
    root_n: f64,
    nodes: Vec<TreeNode>,
}

impl Builder<'_> {
    fn grow(&mut self, idx: Vec<usize>, depth: usize, rng: &mut ChaCha8Rng) -> usize {
        let n = idx.len();
        let pos = idx.iter().filter(|&&i| self.y[i]).count();
        let id = self.nodes.len();
        self.nodes.push(TreeNode::Leaf {
            p1: pos as f64 / n as f64,
            n,
        });
        let parent = gini(pos, n);
        let depth_ok = self.params.max_depth.is_none_or(|d| depth < d);
        if !depth_ok || parent == 0.0 || n < self.params.min_samples_split.max(2) {
            return id;
        }

        let p = self.x[0].len();
        let candidates = index::sample(rng, p, self.mtry);
        // (weighted child impurity, feature, threshold)
        let mut best: Option<(f64, usize, f64)> = None;
        let mut sorted = idx.clone();
        for feature in candidates.iter() {
            sorted.sort_by(|&a, &b| self.x[a][feature].total_cmp(&self.x[b][feature]));
            let mut left_pos = 0;
            for split in 1..n {
                left_pos += self.y[sorted[split - 1]] as usize;
                let lo = self.x[sorted[split - 1]][feature];
                let hi = self.x[sorted[split]][feature];
                if lo == hi {
                    continue;
                }
                let (nl, nr) = (split, n - split);
                let child = (nl as f64 * gini(left_pos, nl) + nr as f64 * gini(pos - left_pos, nr)) / n as f64;
                if best.is_none_or(|(b, _, _)| child < b) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some((child, feature, threshold));
                }
            }
        }

        let Some((child, feature, threshold)) = best else {
            return id;
        };
        let decrease = parent - child;
        if decrease <= 0.0 {
            return id;
        }
        let (l_idx, r_idx): (Vec<usize>, Vec<usize>) = idx.into_iter().partition(|&i| self.x[i][feature] <= threshold);
        let left = self.grow(l_idx, depth + 1, rng);
        let right = self.grow(r_idx, depth + 1, rng);
        self.nodes[id] = TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            n,
            weighted_decrease: n as f64 / self.root_n * decrease,
        };
        id
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RandomForest {
    pub params: ForestParams,
    pub n_features: usize,
    pub trees: Vec<Tree>,
}

impl RandomForest {
    /// Tree `t` draws from its own stream seeded with `seed ^ t`, so the
    /// result does not depend on how trees are scheduled across threads.
    pub fn fit(x: &[Vec<f64>], y: &[bool], params: &ForestParams, seed: u64) -> Self {
        let n = x.len();
        let p = x[0].len();
        let mtry = params.max_features.resolve(p);
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let mut rng = rng::seeded(seed ^ t as u64);
                let idx: Vec<usize> = if params.bootstrap {
                    (0..n).map(|_| rng.gen_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let mut b = Builder {
                    x,
                    y,
                    params,
                    mtry,
                    root_n: n as f64,
                    nodes: Vec::new(),
                };
                b.grow(idx, 0, &mut rng);
                Tree { nodes: b.nodes }
            })
            .collect();
        RandomForest {
            params: *params,
            n_features: p,
            trees,
        }
    }

    /// Mean of the trees' leaf class fractions.
    pub fn proba(&self, row: &[f64]) -> f64 {
        self.trees.iter().map(|t| t.proba(row)).sum::<f64>() / self.trees.len() as f64
    }

    /// Per-feature impurity decrease averaged over trees and normalized to
    /// sum to 1. A forest without a single split reports uniform weights.
    pub fn feature_importance(&self) -> Vec<f64> {
        let p = self.n_features;
        let mut total = vec![0.0; p];
        for t in &self.trees {
            for (acc, v) in total.iter_mut().zip(t.importance(p)) {
                *acc += v;
            }
        }
        let sum: f64 = total.iter().sum();
        if sum > 0.0 {
            total.iter().map(|v| v / sum).collect()
        } else {
            vec![1.0 / p as f64; p]
        }
    }
}
