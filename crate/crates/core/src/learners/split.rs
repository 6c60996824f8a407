//! Threshold search for a single numeric feature.
//!
//! Candidate thresholds are the midpoints between consecutive distinct sorted
//! values, scored either by C4.5 gain ratio or by Gini impurity decrease on
//! the weighted class masses. Equal-scoring thresholds resolve to the
//! smallest, so the search is deterministic.

use serde::{Deserialize, Serialize};

use crate::data::Label;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitCriterion {
    GainRatio,
    Gini,
}

/// A scored threshold. `score` is what the search maximizes (gain ratio or
/// Gini decrease); `gain` is the raw impurity decrease, which trees
/// accumulate into feature importances.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SplitScore {
    pub threshold: f64,
    pub score: f64,
    pub gain: f64,
}

const EPS: f64 = 1e-12;

fn entropy(td: f64, ar: f64) -> f64 {
    let total = td + ar;
    if total <= 0.0 {
        return 0.0;
    }
    let mut h = 0.0;
    for part in [td, ar] {
        if part > 0.0 {
            let p = part / total;
            h -= p * p.log2();
        }
    }
    h
}

fn gini(td: f64, ar: f64) -> f64 {
    let total = td + ar;
    if total <= 0.0 {
        return 0.0;
    }
    let pt = td / total;
    let pa = ar / total;
    1.0 - pt * pt - pa * pa
}

/// Finds the best threshold for one feature, or `None` when no candidate
/// strictly reduces impurity (constant feature, pure labels, or splits that
/// would starve a side below `min_child_weight`).
pub(crate) fn best_split_constrained(
    values: &[f64],
    labels: &[Label],
    weights: &[f64],
    criterion: SplitCriterion,
    min_child_weight: f64,
) -> Option<SplitScore> {
    let n = values.len();
    debug_assert_eq!(n, labels.len());
    debug_assert_eq!(n, weights.len());
    if n < 2 {
        return None;
    }

    // Sort by (value, position) so identical inputs accumulate in an
    // identical order regardless of how the caller shuffled its rows.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| values[a].partial_cmp(&values[b]).unwrap().then(a.cmp(&b)));

    let (mut total_td, mut total_ar) = (0.0, 0.0);
    for i in 0..n {
        match labels[i] {
            Label::Td => total_td += weights[i],
            Label::Ar => total_ar += weights[i],
        }
    }
    let total = total_td + total_ar;
    let parent = match criterion {
        SplitCriterion::GainRatio => entropy(total_td, total_ar),
        SplitCriterion::Gini => gini(total_td, total_ar),
    };

    let mut best: Option<SplitScore> = None;
    let (mut left_td, mut left_ar) = (0.0, 0.0);
    for pos in 0..n - 1 {
        let i = order[pos];
        match labels[i] {
            Label::Td => left_td += weights[i],
            Label::Ar => left_ar += weights[i],
        }
        let v = values[i];
        let v_next = values[order[pos + 1]];
        if v_next <= v {
            continue;
        }
        let wl = left_td + left_ar;
        let wr = total - wl;
        if wl < min_child_weight || wr < min_child_weight {
            continue;
        }
        let threshold = v + (v_next - v) / 2.0;
        let right_td = total_td - left_td;
        let right_ar = total_ar - left_ar;
        let (score, gain) = match criterion {
            SplitCriterion::GainRatio => {
                let gain = parent
                    - (wl / total) * entropy(left_td, left_ar)
                    - (wr / total) * entropy(right_td, right_ar);
                if gain <= EPS {
                    continue;
                }
                let pl = wl / total;
                let pr = wr / total;
                let split_info = -pl * pl.log2() - pr * pr.log2();
                (gain / split_info, gain)
            }
            SplitCriterion::Gini => {
                let decrease = parent
                    - (wl / total) * gini(left_td, left_ar)
                    - (wr / total) * gini(right_td, right_ar);
                if decrease <= EPS {
                    continue;
                }
                (decrease, decrease)
            }
        };
        if best.map_or(true, |b| score > b.score) {
            best = Some(SplitScore {
                threshold,
                score,
                gain,
            });
        }
    }
    best
}

/// Public threshold search: `(threshold, score)` of the best midpoint, or
/// `None` when nothing improves on the unsplit node.
pub fn best_numeric_split(
    values: &[f64],
    labels: &[Label],
    weights: &[f64],
    criterion: SplitCriterion,
) -> Option<(f64, f64)> {
    best_split_constrained(values, labels, weights, criterion, 0.0)
        .map(|s| (s.threshold, s.score))
}
