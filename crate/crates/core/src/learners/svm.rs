//! Soft-margin support vector machine trained with sequential minimal
//! optimization.
//!
//! Features are standardized internally before the kernel sees them, so the
//! radial basis width is comparable across columns with very different units.
//! Class weights scale each sample's box constraint: sample `i` may take a
//! multiplier up to `c * w[i]`. AR maps to +1, TD to -1, and a decision value
//! of exactly zero resolves to AR.
//!
//! The optimizer keeps the kernel matrix and a cached vector of raw decision
//! sums, updating both incrementally after every successful pair step, so a
//! fit costs O(n^2) memory and each sweep costs O(n) kernel lookups per
//! update rather than O(n^2) recomputation.

use serde::{Deserialize, Serialize};

use crate::data::Label;
use crate::error::{Error, Result};

use super::standardize::Standardizer;
use super::TrainSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf,
}

#[derive(Debug, Clone)]
pub(crate) struct SvmConfig {
    pub c: f64,
    pub kernel: Kernel,
    /// RBF width; `None` means 1 / n_features.
    pub gamma: Option<f64>,
    pub tol: f64,
    pub max_passes: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SvmModel {
    pub(crate) standardizer: Standardizer,
    pub(crate) kernel: Kernel,
    pub(crate) gamma: f64,
    /// Standardized training rows. Rows with a zero multiplier are retained;
    /// they cost nothing at prediction time beyond a skipped loop iteration.
    pub(crate) vectors: Vec<Vec<f64>>,
    /// +1 for AR, -1 for TD, aligned with `vectors`.
    pub(crate) signs: Vec<f64>,
    pub(crate) alpha: Vec<f64>,
    /// Per-sample box limit `c * w[i]`, kept for optimality reporting.
    pub(crate) box_limit: Vec<f64>,
    pub(crate) bias: f64,
}

fn kernel_value(kernel: Kernel, gamma: f64, u: &[f64], v: &[f64]) -> f64 {
    match kernel {
        Kernel::Linear => u.iter().zip(v).map(|(a, b)| a * b).sum(),
        Kernel::Rbf => {
            let d2: f64 = u.iter().zip(v).map(|(a, b)| (a - b) * (a - b)).sum();
            (-gamma * d2).exp()
        }
    }
}

struct Smo<'a> {
    k: Vec<Vec<f64>>,
    y: &'a [f64],
    cap: &'a [f64],
    alpha: Vec<f64>,
    /// Raw decision sums `sum_j alpha_j y_j K(j, i)`, bias excluded.
    f: Vec<f64>,
    bias: f64,
    tol: f64,
}

const EPS: f64 = 1e-12;

/// Minimum relative alpha change for a step to count as progress. Sits two
/// orders below the KKT tolerance: fine enough to repair tolerance-level
/// violations, coarse enough that near-optimal dithering cannot keep the
/// outer loop spinning.
const STEP_EPS: f64 = 1e-5;

impl<'a> Smo<'a> {
    fn error(&self, i: usize) -> f64 {
        self.f[i] + self.bias - self.y[i]
    }

    fn take_step(&mut self, i1: usize, i2: usize) -> bool {
        if i1 == i2 {
            return false;
        }
        let (a1_old, a2_old) = (self.alpha[i1], self.alpha[i2]);
        let (y1, y2) = (self.y[i1], self.y[i2]);
        let (e1, e2) = (self.error(i1), self.error(i2));
        let s = y1 * y2;
        let (c1, c2) = (self.cap[i1], self.cap[i2]);
        let (low, high) = if s < 0.0 {
            let gamma = a2_old - a1_old;
            (gamma.max(0.0), (c1 + gamma).min(c2))
        } else {
            let total = a1_old + a2_old;
            ((total - c1).max(0.0), total.min(c2))
        };
        if high - low < EPS {
            return false;
        }
        let k11 = self.k[i1][i1];
        let k12 = self.k[i1][i2];
        let k22 = self.k[i2][i2];
        let eta = k11 + k22 - 2.0 * k12;
        let mut a2 = if eta > EPS {
            (a2_old + y2 * (e1 - e2) / eta).clamp(low, high)
        } else {
            // Flat direction: compare the objective at both endpoints.
            let f1 = y1 * (e1 + self.bias) - a1_old * k11 - s * a2_old * k12;
            let f2 = y2 * (e2 + self.bias) - s * a1_old * k12 - a2_old * k22;
            let l1 = a1_old + s * (a2_old - low);
            let h1 = a1_old + s * (a2_old - high);
            let obj_low = l1 * f1 + low * f2
                + 0.5 * l1 * l1 * k11
                + 0.5 * low * low * k22
                + s * low * l1 * k12;
            let obj_high = h1 * f1 + high * f2
                + 0.5 * h1 * h1 * k11
                + 0.5 * high * high * k22
                + s * high * h1 * k12;
            if obj_low < obj_high - EPS {
                low
            } else if obj_low > obj_high + EPS {
                high
            } else {
                a2_old
            }
        };
        if a2 < EPS {
            a2 = 0.0;
        } else if a2 > c2 - EPS {
            a2 = c2;
        }
        if (a2 - a2_old).abs() < STEP_EPS * (a2 + a2_old + STEP_EPS) {
            return false;
        }
        let a1 = a1_old + s * (a2_old - a2);
        let d1 = a1 - a1_old;
        let d2 = a2 - a2_old;

        let b1 = self.bias - e1 - y1 * d1 * k11 - y2 * d2 * k12;
        let b2 = self.bias - e2 - y1 * d1 * k12 - y2 * d2 * k22;
        self.bias = if a1 > EPS && a1 < c1 - EPS {
            b1
        } else if a2 > EPS && a2 < c2 - EPS {
            b2
        } else {
            (b1 + b2) / 2.0
        };

        self.alpha[i1] = a1;
        self.alpha[i2] = a2;
        for i in 0..self.f.len() {
            self.f[i] += y1 * d1 * self.k[i1][i] + y2 * d2 * self.k[i2][i];
        }
        true
    }

    fn is_non_bound(&self, i: usize) -> bool {
        self.alpha[i] > EPS && self.alpha[i] < self.cap[i] - EPS
    }

    fn examine(&mut self, i2: usize) -> bool {
        let y2 = self.y[i2];
        let a2 = self.alpha[i2];
        let e2 = self.error(i2);
        let r2 = e2 * y2;
        let violates = (r2 < -self.tol && a2 < self.cap[i2] - EPS) || (r2 > self.tol && a2 > EPS);
        if !violates {
            return false;
        }
        let n = self.f.len();

        // Second-choice heuristic: the partner with the largest |E1 - E2|
        // among non-bound samples.
        let mut best: Option<(f64, usize)> = None;
        for i in 0..n {
            if self.is_non_bound(i) {
                let gap = (self.error(i) - e2).abs();
                if best.map_or(true, |(g, _)| gap > g) {
                    best = Some((gap, i));
                }
            }
        }
        if let Some((_, i1)) = best {
            if self.take_step(i1, i2) {
                return true;
            }
        }
        // Deterministic fallback sweeps; start at a position derived from i2
        // so repeated failures do not always retry the same partner first.
        for offset in 0..n {
            let i1 = (i2 + 1 + offset) % n;
            if self.is_non_bound(i1) && self.take_step(i1, i2) {
                return true;
            }
        }
        for offset in 0..n {
            let i1 = (i2 + 1 + offset) % n;
            if self.take_step(i1, i2) {
                return true;
            }
        }
        false
    }
}

pub(crate) fn fit_svm(train: &TrainSet, cfg: &SvmConfig) -> Result<SvmModel> {
    if cfg.c <= 0.0 {
        return Err(Error::InvalidParam("svm c must be positive".into()));
    }
    let standardizer = Standardizer::fit(&train.x);
    let xs = standardizer.transform(&train.x);
    let n = xs.len();
    let d = train.names.len();
    let gamma = cfg.gamma.unwrap_or(1.0 / d as f64);
    if gamma <= 0.0 {
        return Err(Error::InvalidParam("svm gamma must be positive".into()));
    }
    let y: Vec<f64> = train
        .y
        .iter()
        .map(|l| if *l == Label::Ar { 1.0 } else { -1.0 })
        .collect();
    let cap: Vec<f64> = train.w.iter().map(|w| cfg.c * w).collect();

    let mut k = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in i..n {
            let v = kernel_value(cfg.kernel, gamma, &xs[i], &xs[j]);
            k[i][j] = v;
            k[j][i] = v;
        }
    }

    let mut smo = Smo {
        k,
        y: &y,
        cap: &cap,
        alpha: vec![0.0; n],
        f: vec![0.0; n],
        bias: 0.0,
        tol: cfg.tol,
    };

    let mut examine_all = true;
    let mut sweeps = 0usize;
    loop {
        let mut changed = 0usize;
        if examine_all {
            for i in 0..n {
                if smo.examine(i) {
                    changed += 1;
                }
            }
        } else {
            for i in 0..n {
                if smo.is_non_bound(i) && smo.examine(i) {
                    changed += 1;
                }
            }
        }
        if examine_all {
            if changed == 0 {
                break;
            }
            examine_all = false;
        } else if changed == 0 {
            examine_all = true;
        }
        sweeps += 1;
        if sweeps > cfg.max_passes {
            return Err(Error::NonConvergence {
                what: "svm".into(),
                detail: format!("optimizer still active after {} sweeps", cfg.max_passes),
            });
        }
    }

    let Smo { alpha, bias, .. } = smo;
    Ok(SvmModel {
        standardizer,
        kernel: cfg.kernel,
        gamma,
        vectors: xs,
        signs: y,
        alpha,
        box_limit: cap,
        bias,
    })
}

impl SvmModel {
    /// Decision value for a raw (unstandardized) feature row. Positive or
    /// zero means AR.
    pub fn decision_value(&self, row: &[f64]) -> f64 {
        let z = self.standardizer.transform_row(row);
        let mut sum = self.bias;
        for ((v, a), y) in self.vectors.iter().zip(&self.alpha).zip(&self.signs) {
            if *a > 0.0 {
                sum += a * y * kernel_value(self.kernel, self.gamma, v, &z);
            }
        }
        sum
    }

    pub fn predict(&self, row: &[f64]) -> Label {
        if self.decision_value(row) >= 0.0 {
            Label::Ar
        } else {
            Label::Td
        }
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alpha
    }

    pub fn box_limits(&self) -> &[f64] {
        &self.box_limit
    }

    pub fn bias(&self) -> f64 {
        self.bias
    }

    /// Functional margins `y_i * f(x_i)` over the training set.
    pub fn training_margins(&self) -> Vec<f64> {
        self.vectors
            .iter()
            .zip(&self.signs)
            .map(|(v, y)| {
                let mut sum = self.bias;
                for ((u, a), yu) in self.vectors.iter().zip(&self.alpha).zip(&self.signs) {
                    if *a > 0.0 {
                        sum += a * yu * kernel_value(self.kernel, self.gamma, u, v);
                    }
                }
                y * sum
            })
            .collect()
    }

    /// Checks the optimality conditions at the stated slack:
    /// zero multipliers need margin >= 1 - slack, boxed multipliers need
    /// margin <= 1 + slack, and interior multipliers need a margin within
    /// slack of 1.
    pub fn optimality_gap(&self) -> f64 {
        let margins = self.training_margins();
        let mut worst = 0.0f64;
        for ((m, a), cap) in margins.iter().zip(&self.alpha).zip(&self.box_limit) {
            let gap = if *a <= EPS {
                (1.0 - m).max(0.0)
            } else if *a >= cap - EPS {
                (m - 1.0).max(0.0)
            } else {
                (m - 1.0).abs()
            };
            worst = worst.max(gap);
        }
        worst
    }

    /// For a linear kernel, the hyperplane in standardized space, where
    /// coefficient magnitudes are comparable across features.
    pub fn standardized_weights(&self) -> Option<Vec<f64>> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let d = self.standardizer.means().len();
        let mut w = vec![0.0; d];
        for ((v, a), y) in self.vectors.iter().zip(&self.alpha).zip(&self.signs) {
            for j in 0..d {
                w[j] += a * y * v[j];
            }
        }
        Some(w)
    }

    /// For a linear kernel, the hyperplane folded back into raw feature
    /// space: `(weights, bias)` with `f(x) = weights . x + bias`.
    pub fn linear_weights(&self) -> Option<(Vec<f64>, f64)> {
        if self.kernel != Kernel::Linear {
            return None;
        }
        let d = self.standardizer.means().len();
        let mut w_std = vec![0.0; d];
        for ((v, a), y) in self.vectors.iter().zip(&self.alpha).zip(&self.signs) {
            for j in 0..d {
                w_std[j] += a * y * v[j];
            }
        }
        let mut w_raw = vec![0.0; d];
        let mut b_raw = self.bias;
        for j in 0..d {
            w_raw[j] = w_std[j] / self.standardizer.sds()[j];
            b_raw -= w_std[j] * self.standardizer.means()[j] / self.standardizer.sds()[j];
        }
        Some((w_raw, b_raw))
    }
}
