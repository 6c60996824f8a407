//! Nearest-neighbor classification by weighted majority vote.
//!
//! Distances are squared Euclidean over internally standardized features.
//! The neighborhood is the k nearest points, widened to include every point
//! whose distance exactly equals the k-th smallest, so exact boundary ties
//! never depend on row order. Votes are sample weights, and a tied vote
//! resolves to AR.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

use super::standardize::Standardizer;
use super::TrainSet;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct KnnModel {
    pub(crate) standardizer: Standardizer,
    pub(crate) k: usize,
    pub(crate) points: Vec<Vec<f64>>,
    pub(crate) labels: Vec<Label>,
    pub(crate) weights: Vec<f64>,
}

pub(crate) fn fit_knn(train: &TrainSet, k: usize) -> Result<KnnModel> {
    if k == 0 {
        return Err(Error::InvalidParam("knn k must be at least 1".into()));
    }
    let standardizer = Standardizer::fit(&train.x);
    Ok(KnnModel {
        points: standardizer.transform(&train.x),
        standardizer,
        k,
        labels: train.y.clone(),
        weights: train.w.clone(),
    })
}

impl KnnModel {
    /// (TD vote, AR vote) for a raw feature row.
    pub fn votes(&self, row: &[f64]) -> (f64, f64) {
        let z = self.standardizer.transform_row(row);
        let mut d2: Vec<f64> = self
            .points
            .iter()
            .map(|p| p.iter().zip(&z).map(|(a, b)| (a - b) * (a - b)).sum())
            .collect();
        let k = self.k.min(d2.len());
        let mut sorted = d2.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let cutoff = sorted[k - 1];
        let mut td = 0.0;
        let mut ar = 0.0;
        for (i, d) in d2.iter_mut().enumerate() {
            if *d <= cutoff {
                match self.labels[i] {
                    Label::Td => td += self.weights[i],
                    Label::Ar => ar += self.weights[i],
                }
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
}
