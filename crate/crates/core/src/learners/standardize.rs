//! Per-feature standardization for the geometry-sensitive learners.
//!
//! Statistics are computed on training rows only and applied unchanged at
//! predict time; a prediction never leaks information back into the scaler.

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl Standardizer {
    /// Population mean/sd per column. A constant column gets sd 1 so it maps
    /// to exactly zero instead of NaN.
    pub fn fit(x: &[Vec<f64>]) -> Standardizer {
        let n = x.len().max(1) as f64;
        let m = x.first().map_or(0, |r| r.len());
        let mut means = vec![0.0; m];
        for row in x {
            for (j, &v) in row.iter().enumerate() {
                means[j] += v;
            }
        }
        for mj in &mut means {
            *mj /= n;
        }
        let mut sds = vec![0.0; m];
        for row in x {
            for (j, &v) in row.iter().enumerate() {
                let d = v - means[j];
                sds[j] += d * d;
            }
        }
        for sj in &mut sds {
            *sj = (*sj / n).sqrt();
            if *sj < 1e-12 {
                *sj = 1.0;
            }
        }
        Standardizer { means, sds }
    }

    /// Pass-through scaler (mean 0, sd 1 per column).
    pub fn identity(columns: usize) -> Standardizer {
        Standardizer {
            means: vec![0.0; columns],
            sds: vec![1.0; columns],
        }
    }

    pub fn transform_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(&v, (&m, &s))| (v - m) / s)
            .collect()
    }

    pub fn transform(&self, x: &[Vec<f64>]) -> Vec<Vec<f64>> {
        x.iter().map(|r| self.transform_row(r)).collect()
    }

    pub fn means(&self) -> &[f64] {
        &self.means
    }

    pub fn sds(&self) -> &[f64] {
        &self.sds
    }
}
