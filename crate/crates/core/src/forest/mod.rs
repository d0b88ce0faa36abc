//! Random-forest LOS/NLOS classifier built from CART trees, with recursive
//! feature elimination and evaluation metrics.
//!
//! Trees are bagged: each sees a bootstrap resample of the training rows and
//! considers ⌈√F⌉ randomly chosen active features per node. Feature
//! importance is the normalized total Gini decrease over the forest.

mod metrics;
mod rfe;
mod tree;

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::DatasetRow;
use crate::error::{Error, Result};
use crate::features::FEATURE_NAMES;
use crate::parallel::{map_indexed, Parallelism};
use crate::Label;

pub use metrics::{evaluate, evaluate_predictions, EvalReport};
pub use rfe::{recursive_feature_elimination, RfeResult, RfeStep, RFE_HOLDOUT_FRACTION};
pub use tree::TreeNode;

pub const MODEL_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Hyperparams {
    pub n_trees: usize,
    pub max_depth: usize,
    pub min_leaf_samples: usize,
    /// Features tried per node; `None` means ⌈√(active features)⌉.
    pub features_per_split: Option<usize>,
    pub bootstrap: bool,
}

impl Default for Hyperparams {
    fn default() -> Self {
        Hyperparams {
            n_trees: 100,
            max_depth: 12,
            min_leaf_samples: 5,
            features_per_split: None,
            bootstrap: true,
        }
    }
}

impl Hyperparams {
    pub fn features_per_split(&self, n_active: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (n_active as f64).sqrt().ceil() as usize)
            .clamp(1, n_active)
    }
}

/// Row-major training data with a column-major copy for split search.
#[derive(Clone, Debug, PartialEq)]
pub struct Samples {
    pub feature_names: Vec<String>,
    rows: Vec<Vec<f64>>,
    columns: Vec<Vec<f64>>,
    pub labels: Vec<Label>,
    /// Rows with equal group share a side of any internal holdout.
    pub groups: Vec<u64>,
}

impl Samples {
    pub fn new(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Label>) -> Result<Self> {
        let groups = (0..rows.len() as u64).collect();
        Self::with_groups(feature_names, rows, labels, groups)
    }

    pub fn with_groups(feature_names: Vec<String>, rows: Vec<Vec<f64>>, labels: Vec<Label>, groups: Vec<u64>) -> Result<Self> {
        let f = feature_names.len();
        if rows.len() != labels.len() || rows.len() != groups.len() {
            return Err(Error::DimensionMismatch("rows, labels and groups differ in length".into()));
        }
        if let Some(i) = rows.iter().position(|r| r.len() != f) {
            return Err(Error::DimensionMismatch(format!("row {i} does not have {f} features")));
        }
        if rows.iter().flatten().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("feature values must be finite".into()));
        }
        let columns = (0..f).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Ok(Samples {
            feature_names,
            rows,
            columns,
            labels,
            groups,
        })
    }

    /// Dataset rows in the canonical feature order, grouped by link.
    pub fn from_rows<'a>(rows: impl IntoIterator<Item = &'a DatasetRow>) -> Result<Self> {
        let (mut x, mut y, mut g) = (Vec::new(), Vec::new(), Vec::new());
        for r in rows {
            x.push(r.features.values().to_vec());
            y.push(r.features.label);
            g.push(r.features.link_index as u64);
        }
        Self::with_groups(FEATURE_NAMES.iter().map(|s| s.to_string()).collect(), x, y, g)
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.rows[i]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn subset(&self, idx: &[usize]) -> Samples {
        let rows: Vec<Vec<f64>> = idx.iter().map(|&i| self.rows[i].clone()).collect();
        let columns = (0..self.n_features()).map(|j| rows.iter().map(|r| r[j]).collect()).collect();
        Samples {
            feature_names: self.feature_names.clone(),
            rows,
            columns,
            labels: idx.iter().map(|&i| self.labels[i]).collect(),
            groups: idx.iter().map(|&i| self.groups[i]).collect(),
        }
    }

    /// Same rows with `f` applied to every value of one feature.
    pub fn map_feature(&self, feature: usize, f: impl Fn(f64) -> f64) -> Samples {
        let mut rows = self.rows.clone();
        for r in &mut rows {
            r[feature] = f(r[feature]);
        }
        Samples::with_groups(self.feature_names.clone(), rows, self.labels.clone(), self.groups.clone())
            .expect("shape unchanged")
    }

    pub fn class_counts(&self) -> [usize; 2] {
        let mut c = [0; 2];
        for l in &self.labels {
            c[l.index()] += 1;
        }
        c
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ForestModel {
    pub version: u32,
    pub n_trees: usize,
    pub feature_names: Vec<String>,
    pub active_features: Vec<bool>,
    pub importances: Vec<f64>,
    pub hyperparams: Hyperparams,
    pub seed: u64,
    pub trees: Vec<TreeNode>,
}

impl ForestModel {
    /// Majority vote; an even split goes to NLOS.
    pub fn predict(&self, x: &[f64]) -> Label {
        let nlos = self.trees.iter().filter(|t| t.predict(x) == Label::Nlos).count();
        if 2 * nlos >= self.trees.len() {
            Label::Nlos
        } else {
            Label::Los
        }
    }

    pub fn predict_all(&self, samples: &Samples) -> Vec<Label> {
        (0..samples.len()).map(|i| self.predict(samples.row(i))).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        let mut s = serde_json::to_string(self)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let m: ForestModel = serde_json::from_str(s)?;
        if m.version != MODEL_VERSION {
            return Err(Error::validation("model", format!("unsupported version {}", m.version)));
        }
        let f = m.feature_names.len();
        if m.active_features.len() != f || m.importances.len() != f || m.trees.len() != m.n_trees {
            return Err(Error::validation("model", "inconsistent array lengths"));
        }
        let mut used = Vec::new();
        m.trees.iter().for_each(|t| t.split_features(&mut used));
        if used.iter().any(|&j| j >= f || !m.active_features[j]) {
            return Err(Error::validation("model", "tree splits on an inactive or unknown feature"));
        }
        Ok(m)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?)
    }
}

/// Trains a forest on the features flagged in `active` (all when `None`).
/// Tree `i` draws from its own ChaCha stream, so the result does not depend
/// on how trees are spread over workers.
pub fn train_forest(
    samples: &Samples,
    active: Option<&[bool]>,
    hp: &Hyperparams,
    seed: u64,
    par: Parallelism,
) -> Result<ForestModel> {
    if samples.is_empty() {
        return Err(Error::Empty("no training rows"));
    }
    if samples.len() < 10 {
        return Err(Error::InvalidArgument(format!("{} training rows, need at least 10", samples.len())));
    }
    if samples.class_counts().contains(&0) {
        return Err(Error::SingleClass);
    }
    if hp.n_trees == 0 {
        return Err(Error::InvalidArgument("forest needs at least one tree".into()));
    }
    let f = samples.n_features();
    let mask: Vec<bool> = match active {
        Some(m) if m.len() != f => {
            return Err(Error::DimensionMismatch(format!("mask has {} entries for {f} features", m.len())))
        }
        Some(m) => m.to_vec(),
        None => vec![true; f],
    };
    let active_idx: Vec<usize> = (0..f).filter(|&j| mask[j]).collect();
    if active_idx.is_empty() {
        return Err(Error::InvalidArgument("no active features".into()));
    }

    let n = samples.len();
    let grown = map_indexed(par, hp.n_trees, |t| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let mut rows: Vec<u32> = if hp.bootstrap {
            (0..n).map(|_| rng.random_range(0..n as u32)).collect()
        } else {
            (0..n as u32).collect()
        };
        let mut builder = tree::TreeBuilder::new(samples, &active_idx, hp, rng);
        let root = builder.grow(&mut rows, 0);
        (root, builder.importance)
    });

    let mut importances = vec![0.0; f];
    let mut trees = Vec::with_capacity(hp.n_trees);
    for (root, imp) in grown {
        importances.iter_mut().zip(&imp).for_each(|(a, b)| *a += b);
        trees.push(root);
    }
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        importances.iter_mut().for_each(|v| *v /= total);
    } else {
        // No tree found a useful split.
        for &j in &active_idx {
            importances[j] = 1.0 / active_idx.len() as f64;
        }
    }

    Ok(ForestModel {
        version: MODEL_VERSION,
        n_trees: hp.n_trees,
        feature_names: samples.feature_names.clone(),
        active_features: mask,
        importances,
        hyperparams: hp.clone(),
        seed,
        trees,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn names(f: usize) -> Vec<String> {
        (0..f).map(|i| format!("f{i}")).collect()
    }

    fn separable(n: usize, seed: u64) -> Samples {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let (mut x, mut y) = (Vec::new(), Vec::new());
        for i in 0..n {
            let label = if i % 2 == 0 { Label::Los } else { Label::Nlos };
            let side = if label == Label::Los { -1.0 } else { 1.0 };
            // Classes on either side of x0 + x1 = 0, at least margin 1 apart.
            let u: f64 = rng.random_range(-5.0..5.0);
            let d: f64 = rng.random_range(0.5..3.0);
            x.push(vec![u + side * d, -u + side * d]);
            y.push(label);
        }
        Samples::new(names(2), x, y).unwrap()
    }

    #[test]
    fn errors_on_bad_input() {
        let hp = Hyperparams::default();
        let one_class = Samples::new(names(1), vec![vec![0.0]; 20], vec![Label::Los; 20]).unwrap();
        assert!(matches!(train_forest(&one_class, None, &hp, 0, Parallelism::Sequential), Err(Error::SingleClass)));
        let empty = Samples::new(names(1), vec![], vec![]).unwrap();
        assert!(matches!(train_forest(&empty, None, &hp, 0, Parallelism::Sequential), Err(Error::Empty(_))));
    }

    #[test]
    fn deterministic_under_seed_and_worker_count() {
        let s = separable(300, 1);
        let hp = Hyperparams { n_trees: 12, ..Hyperparams::default() };
        let a = train_forest(&s, None, &hp, 9, Parallelism::Sequential).unwrap();
        let b = train_forest(&s, None, &hp, 9, Parallelism::threads(4)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.to_json().unwrap(), b.to_json().unwrap());
    }

    #[test]
    fn importances_sum_to_one_and_respect_mask() {
        let s = separable(300, 2).map_feature(0, |v| v);
        let hp = Hyperparams { n_trees: 10, ..Hyperparams::default() };
        let m = train_forest(&s, Some(&[false, true]), &hp, 3, Parallelism::Auto).unwrap();
        assert!((m.importances.iter().sum::<f64>() - 1.0).abs() < 1e-9);
        assert_eq!(m.importances[0], 0.0);
        let mut used = Vec::new();
        m.trees.iter().for_each(|t| t.split_features(&mut used));
        assert!(used.iter().all(|&j| j == 1));
    }

    #[test]
    fn single_tree_forest_matches_its_tree() {
        let s = separable(200, 3);
        let hp = Hyperparams { n_trees: 1, ..Hyperparams::default() };
        let m = train_forest(&s, None, &hp, 4, Parallelism::Sequential).unwrap();
        for i in 0..s.len() {
            assert_eq!(m.predict(s.row(i)), m.trees[0].predict(s.row(i)));
        }
    }

    #[test]
    fn vote_ties_and_degenerate_forests() {
        let los = TreeNode::Leaf { counts: [3, 0] };
        let nlos = TreeNode::Leaf { counts: [0, 3] };
        let mut m = ForestModel {
            version: MODEL_VERSION,
            n_trees: 2,
            feature_names: names(1),
            active_features: vec![true],
            importances: vec![1.0],
            hyperparams: Hyperparams::default(),
            seed: 0,
            trees: vec![los.clone(), nlos],
        };
        assert_eq!(m.predict(&[0.0]), Label::Nlos);
        m.trees = vec![los.clone(), los];
        for x in [-1e9, 0.0, 7.5] {
            assert_eq!(m.predict(&[x]), Label::Los);
        }
        assert_eq!(TreeNode::Leaf { counts: [2, 2] }.predict(&[0.0]), Label::Nlos);
    }

    #[test]
    fn model_json_round_trip_and_validation() {
        let s = separable(100, 5);
        let hp = Hyperparams { n_trees: 3, ..Hyperparams::default() };
        let m = train_forest(&s, None, &hp, 1, Parallelism::Sequential).unwrap();
        let json = m.to_json().unwrap();
        assert!(json.contains("\"f\":") && json.contains("\"counts\":"));
        assert_eq!(ForestModel::from_json(&json).unwrap(), m);

        let mut bad = m.clone();
        bad.active_features = vec![false, false];
        assert!(ForestModel::from_json(&bad.to_json().unwrap()).is_err());
    }

    #[test]
    fn depth_limit_respected() {
        let s = separable(400, 6);
        let hp = Hyperparams { n_trees: 5, max_depth: 2, ..Hyperparams::default() };
        let m = train_forest(&s, None, &hp, 2, Parallelism::Sequential).unwrap();
        assert!(m.trees.iter().all(|t| t.depth() <= 2));
    }
}
