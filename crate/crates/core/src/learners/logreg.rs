//! Weighted L2-regularized logistic regression, fit by damped Newton steps.
//!
//! The model is fit on internally standardized features. The penalty applies
//! to the coefficients only, never the intercept, so the class balance point
//! is free to move. AR is the positive class; a predicted probability of
//! exactly one half resolves to AR.

use crate::data::Label;
use crate::error::{Error, Result};

use super::standardize::Standardizer;
use super::TrainSet;

#[derive(Debug, Clone)]
pub(crate) struct LogRegConfig {
    pub lambda: f64,
    pub max_iter: usize,
    pub tol: f64,
}

/// Negative log-likelihood (weighted, plus the ridge term) and its gradient
/// with respect to `beta = [intercept, coef...]`.
///
/// Exposed so tests can difference the objective numerically and compare
/// against the analytic gradient.
pub fn objective_and_gradient(
    x: &[Vec<f64>],
    y01: &[f64],
    w: &[f64],
    lambda: f64,
    beta: &[f64],
) -> (f64, Vec<f64>) {
    let m = beta.len() - 1;
    let mut nll = 0.0;
    let mut grad = vec![0.0; beta.len()];
    for (i, row) in x.iter().enumerate() {
        let mut z = beta[0];
        for j in 0..m {
            z += beta[j + 1] * row[j];
        }
        // log(1 + e^z) without overflow
        let softplus = z.max(0.0) + (-z.abs()).exp().ln_1p();
        nll += w[i] * (softplus - y01[i] * z);
        let p = 1.0 / (1.0 + (-z).exp());
        let r = w[i] * (p - y01[i]);
        grad[0] += r;
        for j in 0..m {
            grad[j + 1] += r * row[j];
        }
    }
    for j in 0..m {
        nll += 0.5 * lambda * beta[j + 1] * beta[j + 1];
        grad[j + 1] += lambda * beta[j + 1];
    }
    (nll, grad)
}

fn hessian(x: &[Vec<f64>], w: &[f64], lambda: f64, beta: &[f64]) -> Vec<Vec<f64>> {
    let m = beta.len() - 1;
    let d = m + 1;
    let mut h = vec![vec![0.0; d]; d];
    for (i, row) in x.iter().enumerate() {
        let mut z = beta[0];
        for j in 0..m {
            z += beta[j + 1] * row[j];
        }
        let p = 1.0 / (1.0 + (-z).exp());
        let s = w[i] * p * (1.0 - p);
        h[0][0] += s;
        for j in 0..m {
            let sj = s * row[j];
            h[0][j + 1] += sj;
            h[j + 1][0] += sj;
            for k in j..m {
                let v = sj * row[k];
                h[j + 1][k + 1] += v;
                if k != j {
                    h[k + 1][j + 1] += v;
                }
            }
        }
    }
    for j in 1..d {
        h[j][j] += lambda;
    }
    h
}

/// Gaussian elimination with partial pivoting. Errors on a singular system
/// so the caller can retry with a damped Hessian.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().partial_cmp(&a[j][col].abs()).unwrap())?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let factor = a[row][col] / a[col][col];
            if factor == 0.0 {
                continue;
            }
            for k in col..n {
                a[row][k] -= factor * a[col][k];
            }
            b[row] -= factor * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for col in (0..n).rev() {
        let mut v = b[col];
        for k in col + 1..n {
            v -= a[col][k] * x[k];
        }
        x[col] = v / a[col][col];
    }
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

pub(crate) fn fit_logreg(train: &TrainSet, cfg: &LogRegConfig) -> Result<(Standardizer, Vec<f64>, f64)> {
    let std = Standardizer::fit(&train.x);
    let xs = std.transform(&train.x);
    let y01: Vec<f64> = train
        .y
        .iter()
        .map(|l| if *l == Label::Ar { 1.0 } else { 0.0 })
        .collect();
    let m = train.names.len();
    let mut beta = vec![0.0; m + 1];

    let (mut nll, mut grad) = objective_and_gradient(&xs, &y01, &train.w, cfg.lambda, &beta);
    let mut gnorm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    for _ in 0..cfg.max_iter {
        if gnorm <= cfg.tol {
            return Ok((std, beta[1..].to_vec(), beta[0]));
        }
        let h = hessian(&xs, &train.w, cfg.lambda, &beta);
        let neg_grad: Vec<f64> = grad.iter().map(|g| -g).collect();
        let max_diag = h.iter().enumerate().fold(0.0f64, |acc, (i, row)| acc.max(row[i]));
        let mut direction = None;
        let mut mu = 0.0;
        for _ in 0..6 {
            let mut damped = h.clone();
            if mu > 0.0 {
                for (i, row) in damped.iter_mut().enumerate() {
                    row[i] += mu;
                }
            }
            if let Some(d) = solve(damped, neg_grad.clone()) {
                direction = Some(d);
                break;
            }
            mu = if mu == 0.0 { 1e-8 * (1.0 + max_diag) } else { mu * 100.0 };
        }
        let direction = direction.ok_or_else(|| Error::NonConvergence {
            what: "logistic regression".into(),
            detail: "Newton system is singular beyond damping".into(),
        })?;

        // backtracking line search on the objective; the slack term keeps
        // rounding noise from rejecting a Newton step whose true improvement
        // is below f64 resolution
        let slack = 1e-12 * (1.0 + nll.abs());
        let mut step = 1.0;
        let mut accepted = false;
        for _ in 0..40 {
            let candidate: Vec<f64> = beta
                .iter()
                .zip(&direction)
                .map(|(b, d)| b + step * d)
                .collect();
            let (nll_new, grad_new) =
                objective_and_gradient(&xs, &y01, &train.w, cfg.lambda, &candidate);
            if nll_new <= nll + slack {
                beta = candidate;
                nll = nll_new;
                grad = grad_new;
                accepted = true;
                break;
            }
            step /= 2.0;
        }
        if !accepted {
            break;
        }
        gnorm = grad.iter().fold(0.0f64, |acc, g| acc.max(g.abs()));
    }
    if gnorm <= cfg.tol {
        return Ok((std, beta[1..].to_vec(), beta[0]));
    }
    Err(Error::NonConvergence {
        what: "logistic regression".into(),
        detail: format!("gradient norm {gnorm:.3e} > tol {:.1e} after {} iterations", cfg.tol, cfg.max_iter),
    })
}

pub(crate) fn decision(coef: &[f64], intercept: f64, x_std: &[f64]) -> f64 {
    intercept + coef.iter().zip(x_std).map(|(c, v)| c * v).sum::<f64>()
}
