//! CART classification tree grown on Gini impurity.

use rand::seq::index::sample;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Hyperparams, Samples};
use crate::Label;

/// Serialized as `{"f", "t", "l", "r"}` for splits and `{"counts"}` for
/// leaves. Rows with `x[f] <= t` go left.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum TreeNode {
    Internal {
        #[serde(rename = "f")]
        feature: usize,
        #[serde(rename = "t")]
        threshold: f64,
        #[serde(rename = "l")]
        left: Box<TreeNode>,
        #[serde(rename = "r")]
        right: Box<TreeNode>,
    },
    Leaf {
        /// Training rows per class, indexed by [`Label::index`].
        counts: [u32; 2],
    },
}

impl TreeNode {
    pub fn leaf_counts(&self, x: &[f64]) -> [u32; 2] {
        let mut node = self;
        loop {
            match node {
                TreeNode::Internal {
                    feature,
                    threshold,
                    left,
                    right,
                } => node = if x[*feature] <= *threshold { left } else { right },
                TreeNode::Leaf { counts } => return *counts,
            }
        }
    }

    /// Leaf majority; ties go to NLOS.
    pub fn predict(&self, x: &[f64]) -> Label {
        let c = self.leaf_counts(x);
        if c[1] >= c[0] {
            Label::Nlos
        } else {
            Label::Los
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Internal { left, right, .. } => 1 + left.depth().max(right.depth()),
            TreeNode::Leaf { .. } => 0,
        }
    }

    /// Every feature index used by a split.
    pub fn split_features(&self, out: &mut Vec<usize>) {
        if let TreeNode::Internal { feature, left, right, .. } = self {
            out.push(*feature);
            left.split_features(out);
            right.split_features(out);
        }
    }
}

/// `n · gini` for the class counts of a node.
fn weighted_gini(c: [usize; 2]) -> f64 {
    let n = (c[0] + c[1]) as f64;
    if n == 0.0 {
        return 0.0;
    }
    n - (c[0] * c[0] + c[1] * c[1]) as f64 / n
}

struct Split {
    feature: usize,
    threshold: f64,
    gain: f64,
}

pub(crate) struct TreeBuilder<'a, R> {
    pub samples: &'a Samples,
    pub active: &'a [usize],
    pub hp: &'a Hyperparams,
    pub rng: R,
    /// Total weighted Gini decrease per feature.
    pub importance: Vec<f64>,
    scratch: Vec<(f64, Label)>,
}

impl<'a, R: Rng> TreeBuilder<'a, R> {
    pub fn new(samples: &'a Samples, active: &'a [usize], hp: &'a Hyperparams, rng: R) -> Self {
        TreeBuilder {
            samples,
            active,
            hp,
            rng,
            importance: vec![0.0; samples.n_features()],
            scratch: Vec::new(),
        }
    }

    fn counts(&self, rows: &[u32]) -> [usize; 2] {
        let mut c = [0; 2];
        for &r in rows {
            c[self.samples.labels[r as usize].index()] += 1;
        }
        c
    }

    pub fn grow(&mut self, rows: &mut [u32], depth: usize) -> TreeNode {
        let counts = self.counts(rows);
        let leaf = TreeNode::Leaf {
            counts: [counts[0] as u32, counts[1] as u32],
        };
        if depth >= self.hp.max_depth || counts[0] == 0 || counts[1] == 0 || rows.len() < 2 * self.hp.min_leaf_samples {
            return leaf;
        }
        let Some(split) = self.best_split(rows, counts) else {
            return leaf;
        };
        self.importance[split.feature] += split.gain;

        let col = self.samples.column(split.feature);
        let mut mid = 0;
        for i in 0..rows.len() {
            if col[rows[i] as usize] <= split.threshold {
                rows.swap(i, mid);
                mid += 1;
            }
        }
        let (l, r) = rows.split_at_mut(mid);
        TreeNode::Internal {
            feature: split.feature,
            threshold: split.threshold,
            left: Box::new(self.grow(l, depth + 1)),
            right: Box::new(self.grow(r, depth + 1)),
        }
    }

    fn best_split(&mut self, rows: &[u32], counts: [usize; 2]) -> Option<Split> {
        let m = self.hp.features_per_split(self.active.len());
        let mut chosen: Vec<usize> = sample(&mut self.rng, self.active.len(), m)
            .into_iter()
            .map(|i| self.active[i])
            .collect();
        chosen.sort_unstable();

        let parent = weighted_gini(counts);
        let min_leaf = self.hp.min_leaf_samples.max(1);
        let mut best: Option<Split> = None;
        for f in chosen {
            let col = self.samples.column(f);
            self.scratch.clear();
            self.scratch.extend(rows.iter().map(|&r| (col[r as usize], self.samples.labels[r as usize])));
            self.scratch.sort_unstable_by(|a, b| a.0.total_cmp(&b.0));

            let mut left = [0usize; 2];
            let n = self.scratch.len();
            for i in 0..n - 1 {
                left[self.scratch[i].1.index()] += 1;
                let (lo, hi) = (self.scratch[i].0, self.scratch[i + 1].0);
                if lo == hi || i + 1 < min_leaf || n - i - 1 < min_leaf {
                    continue;
                }
                let right = [counts[0] - left[0], counts[1] - left[1]];
                let gain = parent - weighted_gini(left) - weighted_gini(right);
                if gain > 0.0 && best.as_ref().is_none_or(|b| gain > b.gain) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(Split { feature: f, threshold, gain });
                }
            }
        }
        best
    }
}
