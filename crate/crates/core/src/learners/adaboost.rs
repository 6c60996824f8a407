//! Discrete adaptive boosting over depth-1 trees.
//!
//! Each round fits a stump to the current boosting weights, scores it by
//! weighted error, and reweights: correct samples shrink by e^-alpha, errors
//! grow by e^alpha. A round with error at or above one half contributes
//! nothing and stops the run; a perfect round keeps its stump with the error
//! floored at 1e-10 (alpha is then large enough to dominate) and also stops,
//! since no weight update can follow. The final vote is the sign of the
//! alpha-weighted stump sum, with zero resolving to AR.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::Result;

use super::split::SplitCriterion;
use super::tree::{fit_tree, TreeConfig, TreeNode};
use super::TrainSet;

const MIN_ERROR: f64 = 1e-10;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoostModel {
    pub(crate) stumps: Vec<Stump>,
    /// Weighted majority at fit time, used only when no stump survived.
    pub(crate) fallback: Label,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Stump {
    pub(crate) alpha: f64,
    pub(crate) tree: TreeNode,
}

pub(crate) fn fit_adaboost(
    train: &TrainSet,
    rounds: usize,
    criterion: SplitCriterion,
) -> Result<BoostModel> {
    let n = train.x.len();
    let stump_cfg = TreeConfig {
        max_depth: Some(1),
        min_leaf_weight: 0.0,
        pruning_confidence: None,
        criterion,
    };

    let (td0, ar0) = class_mass(&train.y, &train.w);
    let fallback = if ar0 >= td0 { Label::Ar } else { Label::Td };

    let mut boosted = train.clone();
    let total0: f64 = boosted.w.iter().sum();
    for w in &mut boosted.w {
        *w /= total0;
    }

    let mut stumps = Vec::new();
    for _ in 0..rounds {
        let (tree, _) = fit_tree(&boosted, &stump_cfg, None);
        let mut error = 0.0;
        for i in 0..n {
            if tree.predict(&boosted.x[i]) != boosted.y[i] {
                error += boosted.w[i];
            }
        }
        if error >= 0.5 {
            break;
        }
        let perfect = error < MIN_ERROR;
        let eps = error.max(MIN_ERROR);
        let alpha = 0.5 * ((1.0 - eps) / eps).ln();
        stumps.push(Stump { alpha, tree });
        if perfect {
            break;
        }
        let shrink = (-alpha).exp();
        let grow = alpha.exp();
        let tree = &stumps.last().unwrap().tree;
        let mut total = 0.0;
        for i in 0..n {
            boosted.w[i] *= if tree.predict(&boosted.x[i]) == boosted.y[i] {
                shrink
            } else {
                grow
            };
            total += boosted.w[i];
        }
        for w in &mut boosted.w {
            *w /= total;
        }
    }

    Ok(BoostModel { stumps, fallback })
}

fn class_mass(y: &[Label], w: &[f64]) -> (f64, f64) {
    let mut td = 0.0;
    let mut ar = 0.0;
    for (label, weight) in y.iter().zip(w) {
        match label {
            Label::Td => td += weight,
            Label::Ar => ar += weight,
        }
    }
    (td, ar)
}

impl BoostModel {
    /// Signed vote total; positive favors AR.
    pub fn score(&self, row: &[f64]) -> f64 {
        self.stumps
            .iter()
            .map(|s| match s.tree.predict(row) {
                Label::Ar => s.alpha,
                Label::Td => -s.alpha,
            })
            .sum()
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        if self.stumps.is_empty() {
            return self.fallback;
        }
        if self.score(row) >= 0.0 {
            Label::Ar
        } else {
            Label::Td
        }
    }

    pub fn rounds_used(&self) -> usize {
        self.stumps.len()
    }

    pub fn alphas(&self) -> Vec<f64> {
        self.stumps.iter().map(|s| s.alpha).collect()
    }
}
