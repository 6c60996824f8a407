//! Random forest: bagged Gini trees with per-split feature subsampling.
//!
//! Sample weights shape the bootstrap: each of the n draws picks a row with
//! probability proportional to its weight, so a heavy row appears in more
//! trees rather than carrying an explicit weight inside them. With the
//! bootstrap disabled every tree sees the full weighted training set and
//! only feature subsampling varies. Tree `t` of a forest seeded with `s`
//! draws from a generator seeded with `mix(s, t)`, which makes the whole
//! forest reproducible and independent of fit order. Prediction is an
//! unweighted vote over trees; a tied vote resolves to AR.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};
use crate::seeds::mix;

use super::split::SplitCriterion;
use super::tree::{fit_tree, FeatureSampler, TreeConfig, TreeNode};
use super::TrainSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSubset {
    /// max(1, floor(sqrt(n_features))) candidates per split.
    Sqrt,
    All,
}

#[derive(Debug, Clone)]
pub(crate) struct ForestConfig {
    pub trees: usize,
    pub max_features: FeatureSubset,
    pub max_depth: Option<usize>,
    pub bootstrap: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ForestModel {
    pub(crate) trees: Vec<TreeNode>,
    /// Mean of per-tree normalized split-gain importances, renormalized.
    pub(crate) importances: Vec<f64>,
}

pub(crate) fn fit_forest(train: &TrainSet, cfg: &ForestConfig, seed: u64) -> Result<ForestModel> {
    if cfg.trees == 0 {
        return Err(Error::InvalidParam("forest needs at least one tree".into()));
    }
    let n = train.x.len();
    let d = train.names.len();
    let m = match cfg.max_features {
        FeatureSubset::Sqrt => ((d as f64).sqrt().floor() as usize).max(1),
        FeatureSubset::All => d,
    };
    let tree_cfg = TreeConfig {
        max_depth: cfg.max_depth,
        min_leaf_weight: 1.0,
        pruning_confidence: None,
        criterion: SplitCriterion::Gini,
    };

    let mut cumulative = Vec::with_capacity(n);
    let mut running = 0.0;
    for &w in &train.w {
        running += w;
        cumulative.push(running);
    }
    let total = running;

    let mut trees = Vec::with_capacity(cfg.trees);
    let mut importance_sum = vec![0.0; d];
    for t in 0..cfg.trees {
        let mut rng = ChaCha8Rng::seed_from_u64(mix(seed, t as u64));
        let sample;
        let fit_on: &TrainSet = if cfg.bootstrap {
            let mut x = Vec::with_capacity(n);
            let mut y = Vec::with_capacity(n);
            for _ in 0..n {
                let u = rng.gen_range(0.0..total);
                let i = cumulative.partition_point(|&c| c <= u).min(n - 1);
                x.push(train.x[i].clone());
                y.push(train.y[i]);
            }
            sample = TrainSet {
                names: train.names.clone(),
                x,
                y,
                w: vec![1.0; n],
            };
            &sample
        } else {
            train
        };
        let mut sampler = FeatureSampler { rng: &mut rng, m };
        let (root, imp) = fit_tree(fit_on, &tree_cfg, Some(&mut sampler));
        for (acc, v) in importance_sum.iter_mut().zip(&imp) {
            *acc += v;
        }
        trees.push(root);
    }

    let total_imp: f64 = importance_sum.iter().sum();
    if total_imp > 0.0 {
        for v in &mut importance_sum {
            *v /= total_imp;
        }
    }
    Ok(ForestModel {
        trees,
        importances: importance_sum,
    })
}

impl ForestModel {
    /// (TD votes, AR votes) over the trees.
    pub fn votes(&self, row: &[f64]) -> (usize, usize) {
        let mut td = 0;
        let mut ar = 0;
        for tree in &self.trees {
            match tree.predict(row) {
                Label::Td => td += 1,
                Label::Ar => ar += 1,
            }
        }
        (td, ar)
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        let (td, ar) = self.votes(row);
        if ar >= td {
            Label::Ar
        } else {
            Label::Td
        }
    }

    pub fn importances(&self) -> &[f64] {
        &self.importances
    }

    pub fn tree_count(&self) -> usize {
        self.trees.len()
    }

    /// The fitted trees, in training order. Useful for exporting a single
    /// member for inspection.
    pub fn trees(&self) -> &[TreeNode] {
        &self.trees
    }
}
