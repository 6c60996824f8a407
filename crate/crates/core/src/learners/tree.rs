//! C4.5-style decision tree.
//!
//! Growth is recursive best-first splitting by gain ratio (or Gini, for
//! forest use) with weighted class masses. When no candidate threshold has
//! positive gain but the node is still impure and depth remains, the fitter
//! falls back to the first admissible midpoint; parity problems like XOR are
//! separable by a chain of zero-gain splits, and the guarantee that distinct
//! feature vectors with distinct labels reach training accuracy 1.0 depends
//! on it. Pruning is pessimistic-error subtree replacement at a confidence
//! factor, same scheme as classic C4.5.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::split::{best_split_constrained, SplitCriterion};
use super::TrainSet;
use crate::data::Label;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum TreeNode {
    Leaf {
        label: Label,
        td_weight: f64,
        ar_weight: f64,
    },
    Split {
        /// Feature name, for export and round-tripping.
        feature: String,
        /// Column in the model's masked feature vector.
        feature_index: usize,
        threshold: f64,
        /// Samples with value <= threshold.
        left: Box<TreeNode>,
        /// Samples with value > threshold.
        right: Box<TreeNode>,
    },
}

impl TreeNode {
    pub fn predict(&self, x: &[f64]) -> Label {
        match self {
            TreeNode::Leaf { label, .. } => *label,
            TreeNode::Split {
                feature_index,
                threshold,
                left,
                right,
                ..
            } => {
                if x[*feature_index] <= *threshold {
                    left.predict(x)
                } else {
                    right.predict(x)
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Split { left, right, .. } => 1 + left.depth().max(right.depth()),
        }
    }

    pub fn leaf_count(&self) -> usize {
        match self {
            TreeNode::Leaf { .. } => 1,
            TreeNode::Split { left, right, .. } => left.leaf_count() + right.leaf_count(),
        }
    }

    /// Total (td, ar) training mass under this node.
    pub(crate) fn mass(&self) -> (f64, f64) {
        match self {
            TreeNode::Leaf {
                td_weight,
                ar_weight,
                ..
            } => (*td_weight, *ar_weight),
            TreeNode::Split { left, right, .. } => {
                let (lt, la) = left.mass();
                let (rt, ra) = right.mass();
                (lt + rt, la + ra)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct TreeConfig {
    pub max_depth: Option<usize>,
    pub min_leaf_weight: f64,
    /// `None` disables pruning.
    pub pruning_confidence: Option<f64>,
    pub criterion: SplitCriterion,
}

/// Per-split feature subsampling for forests. Draws are consumed in a fixed
/// recursion order (left subtree before right), so a seeded RNG makes the
/// whole tree deterministic.
pub(crate) struct FeatureSampler<'a> {
    pub rng: &'a mut ChaCha8Rng,
    pub m: usize,
}

impl FeatureSampler<'_> {
    fn draw(&mut self, total: usize) -> Vec<usize> {
        if self.m >= total {
            return (0..total).collect();
        }
        // partial Fisher-Yates, then ascending order for a deterministic scan
        let mut pool: Vec<usize> = (0..total).collect();
        for i in 0..self.m {
            let j = self.rng.gen_range(i..total);
            pool.swap(i, j);
        }
        let mut picked = pool[..self.m].to_vec();
        picked.sort_unstable();
        picked
    }
}

fn majority(td: f64, ar: f64) -> Label {
    if ar >= td {
        Label::Ar
    } else {
        Label::Td
    }
}

struct Builder<'a, 'b> {
    train: &'a TrainSet,
    cfg: &'a TreeConfig,
    sampler: Option<&'a mut FeatureSampler<'b>>,
    importances: Vec<f64>,
    total_weight: f64,
}

impl Builder<'_, '_> {
    fn node_mass(&self, rows: &[usize]) -> (f64, f64) {
        let mut td = 0.0;
        let mut ar = 0.0;
        for &i in rows {
            match self.train.y[i] {
                Label::Td => td += self.train.w[i],
                Label::Ar => ar += self.train.w[i],
            }
        }
        (td, ar)
    }

    fn leaf(&self, td: f64, ar: f64) -> TreeNode {
        TreeNode::Leaf {
            label: majority(td, ar),
            td_weight: td,
            ar_weight: ar,
        }
    }

    /// Smallest midpoint on feature `j` whose two sides both carry at least
    /// the minimum leaf weight, ignoring impurity.
    fn forced_threshold(&self, rows: &[usize], j: usize) -> Option<f64> {
        let mut pairs: Vec<(f64, f64)> = rows
            .iter()
            .map(|&i| (self.train.x[i][j], self.train.w[i]))
            .collect();
        pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
        let total: f64 = pairs.iter().map(|p| p.1).sum();
        let mut left = 0.0;
        for k in 0..pairs.len() - 1 {
            left += pairs[k].1;
            if pairs[k + 1].0 > pairs[k].0
                && left >= self.cfg.min_leaf_weight
                && total - left >= self.cfg.min_leaf_weight
            {
                return Some(pairs[k].0 + (pairs[k + 1].0 - pairs[k].0) / 2.0);
            }
        }
        None
    }

    fn build(&mut self, rows: &[usize], depth: usize) -> TreeNode {
        let (td, ar) = self.node_mass(rows);
        if td <= 0.0 || ar <= 0.0 {
            return self.leaf(td, ar);
        }
        if let Some(md) = self.cfg.max_depth {
            if depth >= md {
                return self.leaf(td, ar);
            }
        }
        if td + ar < 2.0 * self.cfg.min_leaf_weight {
            return self.leaf(td, ar);
        }

        let m = self.train.names.len();
        let candidates: Vec<usize> = match self.sampler.as_mut() {
            Some(s) => s.draw(m),
            None => (0..m).collect(),
        };

        let values_of = |j: usize| -> Vec<f64> { rows.iter().map(|&i| self.train.x[i][j]).collect() };
        let labels: Vec<Label> = rows.iter().map(|&i| self.train.y[i]).collect();
        let weights: Vec<f64> = rows.iter().map(|&i| self.train.w[i]).collect();

        let mut best: Option<(usize, super::split::SplitScore)> = None;
        for &j in &candidates {
            if let Some(s) = best_split_constrained(
                &values_of(j),
                &labels,
                &weights,
                self.cfg.criterion,
                self.cfg.min_leaf_weight,
            ) {
                if best.as_ref().map_or(true, |(_, b)| s.score > b.score) {
                    best = Some((j, s));
                }
            }
        }

        let (j, threshold, gain) = match best {
            Some((j, s)) => (j, s.threshold, s.gain),
            None => {
                // impure node, no informative split: force progress if any
                // admissible midpoint exists at all
                match candidates
                    .iter()
                    .find_map(|&j| self.forced_threshold(rows, j).map(|t| (j, t)))
                {
                    Some((j, t)) => (j, t, 0.0),
                    None => return self.leaf(td, ar),
                }
            }
        };

        self.importances[j] += gain * (td + ar) / self.total_weight;

        let (mut left_rows, mut right_rows) = (Vec::new(), Vec::new());
        for &i in rows {
            if self.train.x[i][j] <= threshold {
                left_rows.push(i);
            } else {
                right_rows.push(i);
            }
        }
        debug_assert!(!left_rows.is_empty() && !right_rows.is_empty());

        let left = self.build(&left_rows, depth + 1);
        let right = self.build(&right_rows, depth + 1);
        TreeNode::Split {
            feature: self.train.names[j].clone(),
            feature_index: j,
            threshold,
            left: Box::new(left),
            right: Box::new(right),
        }
    }
}

pub(crate) fn fit_tree(
    train: &TrainSet,
    cfg: &TreeConfig,
    sampler: Option<&mut FeatureSampler<'_>>,
) -> (TreeNode, Vec<f64>) {
    let rows: Vec<usize> = (0..train.x.len()).collect();
    let total_weight: f64 = train.w.iter().sum();
    let mut builder = Builder {
        train,
        cfg,
        sampler,
        importances: vec![0.0; train.names.len()],
        total_weight,
    };
    let mut root = builder.build(&rows, 0);
    if let Some(cf) = cfg.pruning_confidence {
        if cf < 1.0 {
            root = prune(root, cf);
        }
    }
    let mut importances = builder.importances;
    let total: f64 = importances.iter().sum();
    if total > 0.0 {
        for v in &mut importances {
            *v /= total;
        }
    }
    (root, importances)
}

fn prune(node: TreeNode, cf: f64) -> TreeNode {
    match node {
        leaf @ TreeNode::Leaf { .. } => leaf,
        TreeNode::Split {
            feature,
            feature_index,
            threshold,
            left,
            right,
        } => {
            let left = prune(*left, cf);
            let right = prune(*right, cf);
            let node = TreeNode::Split {
                feature,
                feature_index,
                threshold,
                left: Box::new(left),
                right: Box::new(right),
            };
            let (td, ar) = node.mass();
            let n = td + ar;
            let leaf_errors = n - td.max(ar);
            let as_leaf = leaf_errors + added_errors(n, leaf_errors, cf);
            if as_leaf <= subtree_pessimistic_errors(&node, cf) + 0.1 {
                TreeNode::Leaf {
                    label: majority(td, ar),
                    td_weight: td,
                    ar_weight: ar,
                }
            } else {
                node
            }
        }
    }
}

fn subtree_pessimistic_errors(node: &TreeNode, cf: f64) -> f64 {
    match node {
        TreeNode::Leaf {
            td_weight,
            ar_weight,
            ..
        } => {
            let n = td_weight + ar_weight;
            let e = n - td_weight.max(*ar_weight);
            e + added_errors(n, e, cf)
        }
        TreeNode::Split { left, right, .. } => {
            subtree_pessimistic_errors(left, cf) + subtree_pessimistic_errors(right, cf)
        }
    }
}

/// Extra errors charged to a leaf of mass `n` with observed error mass `e`,
/// at confidence factor `cf`: the one-sided upper confidence bound on the
/// binomial error rate (Wilson interval with continuity correction), with
/// the small-count cases handled separately.
fn added_errors(n: f64, e: f64, cf: f64) -> f64 {
    if n <= 0.0 || cf > 0.5 {
        return 0.0;
    }
    if e < 1.0 {
        let base = n * (1.0 - cf.powf(1.0 / n));
        if e == 0.0 {
            return base;
        }
        return base + e * (added_errors(n, 1.0, cf) - base);
    }
    if e + 0.5 >= n {
        return (n - e).max(0.0);
    }
    let z = probit(1.0 - cf);
    let f = (e + 0.5) / n;
    let r = (f + z * z / (2.0 * n) + z * (f / n - f * f / n + z * z / (4.0 * n * n)).sqrt())
        / (1.0 + z * z / n);
    r * n - e
}

/// Inverse standard normal CDF (Acklam's rational approximation, ~1e-9
/// absolute error over the open unit interval).
fn probit(p: f64) -> f64 {
    debug_assert!(p > 0.0 && p < 1.0);
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    if p < P_LOW {
        let q = (-2.0 * p.ln()).sqrt();
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        let q = (-2.0 * (1.0 - p).ln()).sqrt();
        -(((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    }
}
