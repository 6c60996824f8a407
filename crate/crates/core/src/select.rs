//! Feature selection: univariate ANOVA ranking, recursive feature
//! elimination, stepwise search, and correlation pruning.
//!
//! Every selector returns a [`FeatureMask`]: the chosen feature names in
//! schema order plus enough provenance (method, parameters, seed) to rebuild
//! the same mask from the same dataset. Masks list features in schema order
//! no matter how the search visited them, so two selectors that pick the same
//! set produce byte-identical masks; search order lives in the params record.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use num_bigint::BigInt;
use num_rational::BigRational;
use serde::{Deserialize, Serialize};

use crate::data::{Dataset, Label};
use crate::error::{Error, Result};
use crate::eval::{loocv, EvalReport, SelectionMode};
use crate::learners::{LearnerFamily, LearnerSpec, ParamValue};

/// Applied when a selector that requires pruning is run without an explicit
/// correlation threshold.
pub const DEFAULT_CORRELATION_THRESHOLD: f64 = 0.9;

/// Greedy steps must beat the current score by more than this to count as an
/// improvement.
pub const STEPWISE_TOLERANCE: f64 = 1e-9;

/// Provenance tag on a mask: how its feature set was chosen.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionMethod {
    Univariate,
    Rfe,
    Stepwise,
    Manual,
}

impl SelectionMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectionMethod::Univariate => "univariate",
            SelectionMethod::Rfe => "rfe",
            SelectionMethod::Stepwise => "stepwise",
            SelectionMethod::Manual => "manual",
        }
    }
}

impl fmt::Display for SelectionMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A reproducible feature subset.
///
/// `selected` is ordered by the schema, is never empty, and downstream fits
/// consume columns in exactly this order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMask {
    method: SelectionMethod,
    selected: Vec<String>,
    params: BTreeMap<String, ParamValue>,
    seed: Option<u64>,
}

impl FeatureMask {
    /// A hand-specified mask. The names are trusted as given; fitting
    /// validates them against the dataset schema.
    pub fn manual(selected: Vec<String>) -> FeatureMask {
        FeatureMask {
            method: SelectionMethod::Manual,
            selected,
            params: BTreeMap::new(),
            seed: None,
        }
    }

    fn built(
        method: SelectionMethod,
        selected: Vec<String>,
        params: BTreeMap<String, ParamValue>,
        seed: Option<u64>,
    ) -> FeatureMask {
        FeatureMask {
            method,
            selected,
            params,
            seed,
        }
    }

    pub fn method(&self) -> SelectionMethod {
        self.method
    }

    pub fn selected(&self) -> &[String] {
        &self.selected
    }

    pub fn params(&self) -> &BTreeMap<String, ParamValue> {
        &self.params
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn contains(&self, name: &str) -> bool {
        self.selected.iter().any(|n| n == name)
    }

    pub fn set_param(&mut self, key: &str, value: ParamValue) {
        self.params.insert(key.to_string(), value);
    }
}

/// Resolves mask names to schema column indices, erroring on unknown names.
fn mask_indices(dataset: &Dataset, names: &[String]) -> Result<Vec<usize>> {
    names
        .iter()
        .map(|n| {
            dataset
                .schema()
                .index_of(n)
                .ok_or_else(|| Error::MissingColumn(n.clone()))
        })
        .collect()
}

fn column(dataset: &Dataset, j: usize) -> Vec<f64> {
    dataset.records().iter().map(|r| r.features[j]).collect()
}

/// One-way ANOVA F-statistic per feature, in schema order.
///
/// F = (between-class SS / 1) / (within-class SS / (n - 2)). A feature that
/// separates the class means with zero within-class scatter gets the
/// +infinity sentinel so it sorts ahead of every finite score; a feature
/// that is constant everywhere scores 0.
pub fn univariate_f_scores(dataset: &Dataset) -> Result<Vec<(String, f64)>> {
    let (n_td, n_ar) = dataset.class_counts();
    if n_td < 2 || n_ar < 2 {
        return Err(Error::DegenerateDataset(format!(
            "F-statistics need at least 2 samples per class, got {n_td} TD / {n_ar} AR"
        )));
    }
    let n = (n_td + n_ar) as f64;
    let df2 = n - 2.0;
    let mut scores = Vec::with_capacity(dataset.schema().len());
    for (j, name) in dataset.schema().names().iter().enumerate() {
        let mut sum_td = 0.0;
        let mut sum_ar = 0.0;
        for r in dataset.records() {
            match r.label {
                Label::Td => sum_td += r.features[j],
                Label::Ar => sum_ar += r.features[j],
            }
        }
        let mean_td = sum_td / n_td as f64;
        let mean_ar = sum_ar / n_ar as f64;
        let grand = (sum_td + sum_ar) / n;
        let ssb = n_td as f64 * (mean_td - grand).powi(2) + n_ar as f64 * (mean_ar - grand).powi(2);
        let mut ssw = 0.0;
        for r in dataset.records() {
            let mean = match r.label {
                Label::Td => mean_td,
                Label::Ar => mean_ar,
            };
            ssw += (r.features[j] - mean).powi(2);
        }
        // Scatter below this floor is float residue, not signal.
        let f = if ssw <= 1e-12 {
            if ssb <= 1e-12 {
                0.0
            } else {
                f64::INFINITY
            }
        } else {
            ssb * df2 / ssw
        };
        scores.push((name.clone(), f));
    }
    Ok(scores)
}

/// Feature indices ranked best-first by (F descending, schema order).
fn f_ranked_indices(scores: &[(String, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    // Stable sort keeps schema order within tied scores.
    order.sort_by(|&a, &b| scores[b].1.partial_cmp(&scores[a].1).unwrap());
    order
}

/// Top-k features by F-statistic. Ties go to the schema-earlier feature; the
/// returned mask lists the winners in schema order.
pub fn select_univariate(dataset: &Dataset, k: usize) -> Result<FeatureMask> {
    let d = dataset.schema().len();
    if k < 1 || k > d {
        return Err(Error::InvalidParam(format!(
            "univariate k = {k} out of range 1..={d}"
        )));
    }
    let scores = univariate_f_scores(dataset)?;
    let mut keep: Vec<usize> = f_ranked_indices(&scores).into_iter().take(k).collect();
    keep.sort_unstable();
    let selected = keep
        .iter()
        .map(|&j| dataset.schema().names()[j].clone())
        .collect();
    let mut params = BTreeMap::new();
    params.insert("k".to_string(), ParamValue::Int(k as i64));
    Ok(FeatureMask::built(
        SelectionMethod::Univariate,
        selected,
        params,
        None,
    ))
}

fn fit_on_names(dataset: &Dataset, names: &[String], base: &LearnerSpec) -> Result<crate::learners::Model> {
    let weights = crate::data::ClassWeights::balanced(dataset)?;
    let mask = FeatureMask::manual(names.to_vec());
    crate::learners::fit(dataset, &mask, &weights, base)
}

/// Recursive feature elimination: refit on the survivors and drop the single
/// least-important feature until k remain.
///
/// Importance ties drop the schema-later feature, mirroring the univariate
/// tie rule. The drop sequence is recorded under the `eliminated` param.
pub fn select_rfe(dataset: &Dataset, k: usize, base: &LearnerSpec) -> Result<FeatureMask> {
    let d = dataset.schema().len();
    if k < 1 || k > d {
        return Err(Error::InvalidParam(format!(
            "rfe k = {k} out of range 1..={d}"
        )));
    }
    let mut surviving: Vec<String> = dataset.schema().names().to_vec();
    let mut eliminated: Vec<String> = Vec::new();
    while surviving.len() > k {
        let model = fit_on_names(dataset, &surviving, base)?;
        let importances = model.importances()?;
        // <= prefers the later feature among equals.
        let mut drop = 0;
        for (i, &imp) in importances.iter().enumerate().skip(1) {
            if imp <= importances[drop] {
                drop = i;
            }
        }
        eliminated.push(surviving.remove(drop));
    }
    let mut params = BTreeMap::new();
    params.insert("k".to_string(), ParamValue::Int(k as i64));
    if !eliminated.is_empty() {
        params.insert(
            "eliminated".to_string(),
            ParamValue::Text(eliminated.join(",")),
        );
    }
    Ok(FeatureMask::built(
        SelectionMethod::Rfe,
        surviving,
        params,
        Some(base.seed()),
    ))
}

/// Search direction for stepwise selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl Direction {
    pub fn as_str(&self) -> &'static str {
        match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        }
    }
}

/// Class-balanced accuracy of a leave-one-out report: the mean of the two
/// class recalls, which equals accuracy under balanced sample weights.
fn balanced_accuracy(report: &EvalReport) -> f64 {
    let half = BigRational::new(BigInt::from(1), BigInt::from(2));
    let sum = report.td_row.recall.rational() + report.ar_row.recall.rational();
    crate::eval::Exact::from_rational(sum * half).as_f64()
}

/// Scores a candidate feature set by inner leave-one-out balanced accuracy.
/// Degenerate folds or a solver that refuses to converge disqualify the
/// candidate (None) instead of aborting the search.
fn inner_score(
    dataset: &Dataset,
    names: &[String],
    base: &LearnerSpec,
    warnings: &mut Vec<String>,
) -> Result<Option<f64>> {
    let mode = SelectionMode::MaskFixed {
        mask: FeatureMask::manual(names.to_vec()),
    };
    match loocv(dataset, base, &mode) {
        Ok(report) => Ok(Some(balanced_accuracy(&report))),
        Err(Error::DegenerateDataset(detail)) => {
            warnings.push(format!("candidate {{{}}} skipped: {detail}", names.join(",")));
            Ok(None)
        }
        Err(Error::NonConvergence { what, detail }) => {
            warnings.push(format!(
                "candidate {{{}}} skipped: {what} did not converge: {detail}",
                names.join(",")
            ));
            Ok(None)
        }
        Err(e) => Err(e),
    }
}

/// Greedy stepwise selection scored by inner leave-one-out balanced accuracy
/// of the base learner.
///
/// Forward starts empty and adds the best-scoring candidate while the best
/// addition improves the score by more than [`STEPWISE_TOLERANCE`]; ties go
/// to the schema-earlier feature. Backward starts full and removes the
/// best-scoring candidate while the best removal does not worsen the score
/// by more than the tolerance; ties remove the schema-later feature, and the
/// mask never shrinks below one feature.
pub fn select_stepwise(
    dataset: &Dataset,
    base: &LearnerSpec,
    direction: Direction,
) -> Result<FeatureMask> {
    let (n_td, n_ar) = dataset.class_counts();
    if n_td < 3 || n_ar < 3 {
        return Err(Error::DegenerateDataset(format!(
            "stepwise needs at least 3 samples per class, got {n_td} TD / {n_ar} AR"
        )));
    }
    let all: Vec<String> = dataset.schema().names().to_vec();
    let mut warnings = Vec::new();
    let mut trail: Vec<String> = Vec::new();
    let mut mask: Vec<String>;
    match direction {
        Direction::Forward => {
            mask = Vec::new();
            let mut current = 0.0_f64;
            loop {
                let mut best: Option<(usize, f64)> = None;
                for (j, name) in all.iter().enumerate() {
                    if mask.contains(name) {
                        continue;
                    }
                    let mut candidate = mask.clone();
                    candidate.push(name.clone());
                    candidate.sort_by_key(|n| all.iter().position(|a| a == n).unwrap());
                    if let Some(score) = inner_score(dataset, &candidate, base, &mut warnings)? {
                        // Strict > keeps the schema-earlier feature on ties.
                        if best.map_or(true, |(_, s)| score > s) {
                            best = Some((j, score));
                        }
                    }
                }
                match best {
                    Some((j, score)) if score > current + STEPWISE_TOLERANCE => {
                        mask.push(all[j].clone());
                        mask.sort_by_key(|n| all.iter().position(|a| a == n).unwrap());
                        trail.push(all[j].clone());
                        current = score;
                    }
                    _ => break,
                }
            }
            if mask.is_empty() {
                return Err(Error::DegenerateDataset(
                    "stepwise forward: no candidate feature could be evaluated".into(),
                ));
            }
        }
        Direction::Backward => {
            mask = all.clone();
            let mut current = match inner_score(dataset, &mask, base, &mut warnings)? {
                Some(s) => s,
                // If the full mask cannot be scored at all, any scoreable
                // removal is an improvement.
                None => f64::NEG_INFINITY,
            };
            while mask.len() > 1 {
                let mut best: Option<(usize, f64)> = None;
                for j in 0..mask.len() {
                    let mut candidate = mask.clone();
                    candidate.remove(j);
                    if let Some(score) = inner_score(dataset, &candidate, base, &mut warnings)? {
                        // >= prefers the schema-later feature on ties.
                        if best.map_or(true, |(_, s)| score >= s) {
                            best = Some((j, score));
                        }
                    }
                }
                match best {
                    Some((j, score)) if score >= current - STEPWISE_TOLERANCE => {
                        trail.push(mask.remove(j));
                        current = score;
                    }
                    _ => break,
                }
            }
        }
    }
    let mut params = BTreeMap::new();
    params.insert(
        "direction".to_string(),
        ParamValue::Text(direction.as_str().to_string()),
    );
    if !trail.is_empty() {
        let key = match direction {
            Direction::Forward => "added",
            Direction::Backward => "removed",
        };
        params.insert(key.to_string(), ParamValue::Text(trail.join(",")));
    }
    if !warnings.is_empty() {
        params.insert(
            "warnings".to_string(),
            ParamValue::Text(warnings.join("; ")),
        );
    }
    Ok(FeatureMask::built(
        SelectionMethod::Stepwise,
        mask,
        params,
        Some(base.seed()),
    ))
}

/// Pearson correlation of two columns; a column with (near-)zero scatter
/// correlates 0 with everything.
pub fn pearson(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len(), "pearson inputs differ in length");
    let n = xs.len() as f64;
    if xs.is_empty() {
        return 0.0;
    }
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let mut cov = 0.0;
    let mut vx = 0.0;
    let mut vy = 0.0;
    for (x, y) in xs.iter().zip(ys) {
        cov += (x - mx) * (y - my);
        vx += (x - mx).powi(2);
        vy += (y - my).powi(2);
    }
    let denom = (vx * vy).sqrt();
    if denom < 1e-12 {
        0.0
    } else {
        cov / denom
    }
}

/// Drops correlated features until no surviving pair exceeds the threshold.
///
/// Features are admitted greedily in (F descending, schema order) priority;
/// a feature is dropped when it correlates beyond the threshold with an
/// already-admitted one, so of any violating pair the lower-F member goes
/// (schema-later on ties). Survivors keep their original mask order.
pub fn prune_correlated(
    dataset: &Dataset,
    mask: &FeatureMask,
    threshold: f64,
) -> Result<FeatureMask> {
    if !(threshold > 0.0 && threshold <= 1.0) {
        return Err(Error::InvalidParam(format!(
            "correlation threshold {threshold} outside (0, 1]"
        )));
    }
    let indices = mask_indices(dataset, mask.selected())?;
    let scores = univariate_f_scores(dataset)?;
    let columns: Vec<Vec<f64>> = indices.iter().map(|&j| column(dataset, j)).collect();
    // Admission order: best F first, schema-earlier first among ties.
    let mut order: Vec<usize> = (0..indices.len()).collect();
    order.sort_by(|&a, &b| {
        scores[indices[b]]
            .1
            .partial_cmp(&scores[indices[a]].1)
            .unwrap()
            .then(indices[a].cmp(&indices[b]))
    });
    let mut admitted: Vec<usize> = Vec::new();
    for &i in &order {
        let clash = admitted
            .iter()
            .any(|&a| pearson(&columns[i], &columns[a]).abs() > threshold);
        if !clash {
            admitted.push(i);
        }
    }
    admitted.sort_unstable();
    let selected: Vec<String> = admitted
        .iter()
        .map(|&i| mask.selected()[i].clone())
        .collect();
    let pruned: Vec<String> = mask
        .selected()
        .iter()
        .filter(|n| !selected.contains(n))
        .cloned()
        .collect();
    let mut params = mask.params().clone();
    params.insert(
        "correlation_threshold".to_string(),
        ParamValue::Float(threshold),
    );
    if !pruned.is_empty() {
        params.insert("pruned".to_string(), ParamValue::Text(pruned.join(",")));
    }
    Ok(FeatureMask::built(
        mask.method(),
        selected,
        params,
        mask.seed(),
    ))
}

/// Which selection procedure a [`SelectorSpec`] runs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectorKind {
    Univariate,
    Rfe,
    StepwiseForward,
    StepwiseBackward,
    /// Runs univariate, RFE, and forward stepwise independently, prunes each
    /// winner, and keeps the mask with the best downstream leave-one-out
    /// accuracy under the base learner.
    Auto,
}

impl SelectorKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            SelectorKind::Univariate => "univariate",
            SelectorKind::Rfe => "rfe",
            SelectorKind::StepwiseForward => "stepwise_forward",
            SelectorKind::StepwiseBackward => "stepwise_backward",
            SelectorKind::Auto => "auto",
        }
    }
}

impl fmt::Display for SelectorKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SelectorKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<SelectorKind> {
        match s.trim().to_ascii_lowercase().as_str() {
            "univariate" => Ok(SelectorKind::Univariate),
            "rfe" => Ok(SelectorKind::Rfe),
            // Bare "stepwise" means the forward search.
            "stepwise" | "stepwise_forward" | "stepwise-forward" => {
                Ok(SelectorKind::StepwiseForward)
            }
            "stepwise_backward" | "stepwise-backward" => Ok(SelectorKind::StepwiseBackward),
            "auto" => Ok(SelectorKind::Auto),
            other => Err(Error::InvalidParam(format!(
                "unknown selection method `{other}`"
            ))),
        }
    }
}

/// A complete, serializable selection request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectorSpec {
    pub method: SelectorKind,
    /// Target mask size for univariate and RFE; ignored by stepwise.
    pub k: usize,
    /// Base learner for RFE importances, stepwise scoring, and auto ranking.
    pub learner: LearnerSpec,
    /// When set, the selected mask is pruned at this |Pearson r| threshold.
    /// Auto always prunes, falling back to the default threshold.
    pub correlation_threshold: Option<f64>,
}

impl SelectorSpec {
    pub fn new(method: SelectorKind) -> SelectorSpec {
        SelectorSpec {
            method,
            k: 8,
            learner: LearnerSpec::defaults(LearnerFamily::LogisticRegression),
            correlation_threshold: None,
        }
    }
}

/// Runs the requested selector and applies correlation pruning when asked.
pub fn run_selector(dataset: &Dataset, selector: &SelectorSpec) -> Result<FeatureMask> {
    let mask = match selector.method {
        SelectorKind::Univariate => select_univariate(dataset, selector.k)?,
        SelectorKind::Rfe => select_rfe(dataset, selector.k, &selector.learner)?,
        SelectorKind::StepwiseForward => {
            select_stepwise(dataset, &selector.learner, Direction::Forward)?
        }
        SelectorKind::StepwiseBackward => {
            select_stepwise(dataset, &selector.learner, Direction::Backward)?
        }
        SelectorKind::Auto => {
            return select_auto(
                dataset,
                selector.k,
                &selector.learner,
                selector
                    .correlation_threshold
                    .unwrap_or(DEFAULT_CORRELATION_THRESHOLD),
            )
        }
    };
    match selector.correlation_threshold {
        Some(t) => prune_correlated(dataset, &mask, t),
        None => Ok(mask),
    }
}

/// Runs univariate, RFE, and forward stepwise independently, prunes each
/// result, and returns the mask whose downstream leave-one-out accuracy with
/// the base learner is highest. Ties keep the earlier method in that fixed
/// order. A base learner without importances simply drops RFE from the race.
pub fn select_auto(
    dataset: &Dataset,
    k: usize,
    base: &LearnerSpec,
    correlation_threshold: f64,
) -> Result<FeatureMask> {
    let mut candidates: Vec<FeatureMask> = Vec::new();
    match select_univariate(dataset, k) {
        Ok(m) => candidates.push(m),
        Err(Error::DegenerateDataset(_)) => {}
        Err(e) => return Err(e),
    }
    match select_rfe(dataset, k, base) {
        Ok(m) => candidates.push(m),
        Err(Error::NoImportances { .. })
        | Err(Error::DegenerateDataset(_))
        | Err(Error::NonConvergence { .. }) => {}
        Err(e) => return Err(e),
    }
    match select_stepwise(dataset, base, Direction::Forward) {
        Ok(m) => candidates.push(m),
        Err(Error::DegenerateDataset(_)) | Err(Error::NonConvergence { .. }) => {}
        Err(e) => return Err(e),
    }
    let mut best: Option<(FeatureMask, f64)> = None;
    for mask in candidates {
        let pruned = prune_correlated(dataset, &mask, correlation_threshold)?;
        if pruned.is_empty() {
            continue;
        }
        let mode = SelectionMode::MaskFixed {
            mask: pruned.clone(),
        };
        let score = match loocv(dataset, base, &mode) {
            Ok(report) => report.average_row.accuracy.as_f64(),
            Err(Error::DegenerateDataset(_)) | Err(Error::NonConvergence { .. }) => continue,
            Err(e) => return Err(e),
        };
        // Strict > keeps the earlier method on ties.
        if best.as_ref().map_or(true, |(_, s)| score > *s) {
            best = Some((pruned, score));
        }
    }
    match best {
        Some((mut mask, score)) => {
            mask.set_param("auto", ParamValue::Flag(true));
            mask.set_param("auto_score", ParamValue::Float(score));
            Ok(mask)
        }
        None => Err(Error::DegenerateDataset(
            "auto selection: no candidate mask could be evaluated".into(),
        )),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{AgeBand, FeatureKind, FeatureSchema, SampleRecord};
    use crate::learners::LearnerFamily;

    fn dataset_from_columns(names: &[&str], columns: &[Vec<f64>], labels: &[Label]) -> Dataset {
        let n = labels.len();
        for c in columns {
            assert_eq!(c.len(), n);
        }
        let schema = FeatureSchema::new(
            names.iter().map(|s| s.to_string()).collect(),
            vec![FeatureKind::AccelG; names.len()],
        )
        .unwrap();
        let records: Vec<SampleRecord> = (0..n)
            .map(|i| SampleRecord {
                infant_id: format!("i{i:02}"),
                visit_index: 1,
                age_months: 3.0,
                label: labels[i],
                aims_score: None,
                awake_hours: None,
                features: columns.iter().map(|c| c[i]).collect(),
            })
            .collect();
        Dataset::new(schema, records, AgeBand::ZeroToSix).unwrap()
    }

    fn labels(n_td: usize, n_ar: usize) -> Vec<Label> {
        let mut l = vec![Label::Td; n_td];
        l.extend(vec![Label::Ar; n_ar]);
        l
    }

    fn knn1() -> LearnerSpec {
        LearnerSpec::defaults(LearnerFamily::Knn)
            .with_param("k", ParamValue::Int(1))
            .unwrap()
    }

    fn logreg() -> LearnerSpec {
        LearnerSpec::defaults(LearnerFamily::LogisticRegression)
    }

    #[test]
    fn f_statistic_matches_hand_computation() {
        // TD {0, 1}, AR {2, 3}: SSB = 4, SSW = 1, df2 = 2, F = 8.
        let d = dataset_from_columns(
            &["a"],
            &[vec![0.0, 1.0, 2.0, 3.0]],
            &labels(2, 2),
        );
        let scores = univariate_f_scores(&d).unwrap();
        assert_eq!(scores[0].0, "a");
        assert_eq!(scores[0].1, 8.0);
    }

    #[test]
    fn f_statistic_sentinels() {
        let d = dataset_from_columns(
            &["constant", "pure"],
            &[
                vec![5.0, 5.0, 5.0, 5.0],
                vec![1.0, 1.0, 2.0, 2.0],
            ],
            &labels(2, 2),
        );
        let scores = univariate_f_scores(&d).unwrap();
        assert_eq!(scores[0].1, 0.0);
        assert_eq!(scores[1].1, f64::INFINITY);
    }

    #[test]
    fn f_statistic_needs_two_per_class() {
        let d = dataset_from_columns(&["a"], &[vec![0.0, 1.0, 2.0]], &labels(1, 2));
        assert!(univariate_f_scores(&d).is_err());
    }

    #[test]
    fn univariate_full_k_returns_schema_order() {
        let d = dataset_from_columns(
            &["b_feat", "a_feat"],
            &[vec![0.0, 1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0, 0.0]],
            &labels(2, 2),
        );
        let mask = select_univariate(&d, 2).unwrap();
        assert_eq!(mask.selected(), ["b_feat", "a_feat"]);
        assert_eq!(mask.method(), SelectionMethod::Univariate);
    }

    #[test]
    fn univariate_picks_separating_feature_over_noise() {
        let d = dataset_from_columns(
            &["noise", "signal"],
            &[
                vec![1.0, 4.0, 2.0, 3.0, 2.5, 3.5],
                vec![1.0, 1.1, 1.2, 5.0, 5.1, 5.2],
            ],
            &labels(3, 3),
        );
        let mask = select_univariate(&d, 1).unwrap();
        assert_eq!(mask.selected(), ["signal"]);
    }

    #[test]
    fn univariate_tie_prefers_schema_earlier() {
        let col = vec![0.0, 1.0, 2.0, 3.0];
        let d = dataset_from_columns(&["first", "second"], &[col.clone(), col], &labels(2, 2));
        let mask = select_univariate(&d, 1).unwrap();
        assert_eq!(mask.selected(), ["first"]);
    }

    #[test]
    fn univariate_rejects_out_of_range_k() {
        let d = dataset_from_columns(&["a"], &[vec![0.0, 1.0, 2.0, 3.0]], &labels(2, 2));
        assert!(select_univariate(&d, 0).is_err());
        assert!(select_univariate(&d, 2).is_err());
    }

    #[test]
    fn univariate_is_record_order_invariant() {
        let d = dataset_from_columns(
            &["x", "y"],
            &[
                vec![1.0, 2.0, 6.0, 7.0, 1.5, 6.5],
                vec![4.0, 1.0, 3.0, 2.0, 2.5, 3.5],
            ],
            &labels(3, 3),
        );
        let mut reversed: Vec<SampleRecord> = d.records().to_vec();
        reversed.reverse();
        let d2 = Dataset::new(d.schema().clone(), reversed, d.band()).unwrap();
        assert_eq!(
            select_univariate(&d, 1).unwrap().selected(),
            select_univariate(&d2, 1).unwrap().selected()
        );
    }

    /// Labels depend on two features; the third is noise.
    fn two_signal_one_noise() -> Dataset {
        dataset_from_columns(
            &["sig_a", "sig_b", "noise"],
            &[
                vec![1.0, 1.2, 1.4, 1.1, 4.0, 4.2, 4.4, 4.1],
                vec![2.0, 2.2, 2.4, 2.1, 6.0, 6.2, 6.4, 6.1],
                vec![3.0, 9.0, 5.0, 4.0, 8.0, 2.0, 6.0, 5.5],
            ],
            &labels(4, 4),
        )
    }

    #[test]
    fn rfe_eliminates_noise_first() {
        let d = two_signal_one_noise();
        let mask = select_rfe(&d, 2, &logreg()).unwrap();
        assert_eq!(mask.selected(), ["sig_a", "sig_b"]);
        match mask.params().get("eliminated") {
            Some(ParamValue::Text(t)) => assert_eq!(t, "noise"),
            other => panic!("expected elimination trail, got {other:?}"),
        }
    }

    #[test]
    fn rfe_keeps_informative_feature_at_k1() {
        let d = two_signal_one_noise();
        let mask = select_rfe(&d, 1, &logreg()).unwrap();
        assert!(mask.selected()[0].starts_with("sig_"));
    }

    #[test]
    fn rfe_full_k_is_identity_even_without_importances() {
        let d = two_signal_one_noise();
        let mask = select_rfe(&d, 3, &knn1()).unwrap();
        assert_eq!(mask.selected(), ["sig_a", "sig_b", "noise"]);
    }

    #[test]
    fn rfe_requires_importances_when_eliminating() {
        let d = two_signal_one_noise();
        let err = select_rfe(&d, 2, &knn1()).unwrap_err();
        assert!(matches!(err, Error::NoImportances { .. }));
    }

    #[test]
    fn stepwise_forward_stops_after_perfect_feature() {
        let d = dataset_from_columns(
            &["noise", "perfect"],
            &[
                vec![1.0, 2.0, 3.0, 1.5, 2.5, 3.5],
                vec![1.0, 1.1, 1.2, 9.0, 9.1, 9.2],
            ],
            &labels(3, 3),
        );
        let mask = select_stepwise(&d, &knn1(), Direction::Forward).unwrap();
        assert_eq!(mask.selected(), ["perfect"]);
        match mask.params().get("added") {
            Some(ParamValue::Text(t)) => assert_eq!(t, "perfect"),
            other => panic!("expected addition trail, got {other:?}"),
        }
    }

    #[test]
    fn stepwise_forward_duplicate_column_adds_nothing_new() {
        // The twin column cannot change nearest-neighbor ordering, so the
        // second step never beats the first and the search stops at one.
        let col = vec![1.0, 1.2, 1.4, 5.0, 5.2, 5.4];
        let d = dataset_from_columns(&["one", "two"], &[col.clone(), col], &labels(3, 3));
        let mask = select_stepwise(&d, &knn1(), Direction::Forward).unwrap();
        assert_eq!(mask.selected(), ["one"]);
    }

    #[test]
    fn stepwise_backward_removes_redundant_copy_but_never_empties() {
        let col = vec![1.0, 1.2, 1.4, 5.0, 5.2, 5.4];
        let d = dataset_from_columns(&["one", "two"], &[col.clone(), col], &labels(3, 3));
        let mask = select_stepwise(&d, &knn1(), Direction::Backward).unwrap();
        // Both removals tie; the schema-later column goes first, and the
        // size-1 floor stops the search there.
        assert_eq!(mask.selected(), ["one"]);
        match mask.params().get("removed") {
            Some(ParamValue::Text(t)) => assert_eq!(t, "two"),
            other => panic!("expected removal trail, got {other:?}"),
        }
    }

    #[test]
    fn stepwise_needs_three_per_class() {
        let d = dataset_from_columns(
            &["a"],
            &[vec![1.0, 2.0, 3.0, 4.0, 5.0]],
            &labels(2, 3),
        );
        assert!(select_stepwise(&d, &knn1(), Direction::Forward).is_err());
    }

    #[test]
    fn pearson_basics() {
        let x = vec![1.0, 2.0, 3.0, 4.0];
        let up = vec![2.0, 4.0, 6.0, 8.0];
        let down = vec![9.0, 8.0, 7.0, 6.0];
        let flat = vec![5.0, 5.0, 5.0, 5.0];
        assert!((pearson(&x, &up) - 1.0).abs() < 1e-12);
        assert!((pearson(&x, &down) + 1.0).abs() < 1e-12);
        assert_eq!(pearson(&x, &flat), 0.0);
    }

    #[test]
    fn prune_drops_duplicate_keeping_schema_earlier() {
        let col = vec![0.0, 1.0, 2.0, 3.0];
        let d = dataset_from_columns(&["first", "second"], &[col.clone(), col], &labels(2, 2));
        let mask = FeatureMask::manual(d.schema().names().to_vec());
        let pruned = prune_correlated(&d, &mask, 0.9).unwrap();
        assert_eq!(pruned.selected(), ["first"]);
        match pruned.params().get("pruned") {
            Some(ParamValue::Text(t)) => assert_eq!(t, "second"),
            other => panic!("expected pruned trail, got {other:?}"),
        }
    }

    #[test]
    fn prune_leaves_uncorrelated_mask_unchanged() {
        let d = dataset_from_columns(
            &["x", "y"],
            &[
                vec![1.0, 2.0, 3.0, 4.0],
                vec![4.0, 1.0, 3.0, 2.0],
            ],
            &labels(2, 2),
        );
        let mask = FeatureMask::manual(d.schema().names().to_vec());
        let pruned = prune_correlated(&d, &mask, 0.9).unwrap();
        assert_eq!(pruned.selected(), ["x", "y"]);
    }

    #[test]
    fn prune_mutually_correlated_trio_keeps_highest_f() {
        // Three near-copies of one signal: every pair has |r| close to 1.
        // The jitter on `scaled` lowers its F below the other two, which tie
        // exactly (F is invariant under affine maps), so the survivor must
        // be the schema-earliest among the tied best.
        let x = vec![1.0, 1.4, 1.2, 3.0, 3.4, 3.2];
        let jitter = [-0.05, 0.05, 0.0, -0.05, 0.05, 0.0];
        let scaled: Vec<f64> = x.iter().zip(jitter).map(|(v, j)| 2.0 * v + j).collect();
        let flipped: Vec<f64> = x.iter().map(|v| 10.0 - v).collect();
        let d = dataset_from_columns(
            &["base", "scaled", "mirror"],
            &[x, scaled, flipped],
            &labels(3, 3),
        );
        // Brute-force expectation: argmax F, earlier feature on ties.
        let scores = univariate_f_scores(&d).unwrap();
        let mut best = 0;
        for i in 1..scores.len() {
            if scores[i].1 > scores[best].1 {
                best = i;
            }
        }
        assert_eq!(scores[best].0, "base");
        let mask = FeatureMask::manual(d.schema().names().to_vec());
        let pruned = prune_correlated(&d, &mask, 0.9).unwrap();
        assert_eq!(pruned.selected(), [scores[best].0.as_str()]);
    }

    #[test]
    fn prune_post_condition_holds() {
        let d = dataset_from_columns(
            &["a", "b", "c"],
            &[
                vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0],
                vec![1.1, 2.1, 3.1, 4.1, 5.1, 6.1],
                vec![6.0, 1.0, 5.0, 2.0, 4.0, 3.0],
            ],
            &labels(3, 3),
        );
        let mask = FeatureMask::manual(d.schema().names().to_vec());
        let pruned = prune_correlated(&d, &mask, 0.8).unwrap();
        let idx: Vec<usize> = pruned
            .selected()
            .iter()
            .map(|n| d.schema().index_of(n).unwrap())
            .collect();
        for (a, &i) in idx.iter().enumerate() {
            for &j in idx.iter().skip(a + 1) {
                let ci = column(&d, i);
                let cj = column(&d, j);
                assert!(pearson(&ci, &cj).abs() <= 0.8);
            }
        }
    }

    #[test]
    fn prune_rejects_bad_threshold_and_unknown_names() {
        let d = dataset_from_columns(&["a"], &[vec![0.0, 1.0, 2.0, 3.0]], &labels(2, 2));
        let mask = FeatureMask::manual(vec!["a".into()]);
        assert!(prune_correlated(&d, &mask, 0.0).is_err());
        assert!(prune_correlated(&d, &mask, 1.5).is_err());
        let ghost = FeatureMask::manual(vec!["ghost".into()]);
        assert!(matches!(
            prune_correlated(&d, &ghost, 0.9).unwrap_err(),
            Error::MissingColumn(_)
        ));
    }

    #[test]
    fn constant_feature_is_never_pruned_for_correlation() {
        let d = dataset_from_columns(
            &["live", "flat"],
            &[
                vec![0.0, 1.0, 2.0, 3.0],
                vec![7.0, 7.0, 7.0, 7.0],
            ],
            &labels(2, 2),
        );
        let mask = FeatureMask::manual(d.schema().names().to_vec());
        let pruned = prune_correlated(&d, &mask, 0.5).unwrap();
        assert_eq!(pruned.selected(), ["live", "flat"]);
    }

    #[test]
    fn run_selector_applies_optional_pruning() {
        let col = vec![1.0, 1.2, 1.4, 5.0, 5.2, 5.4];
        let near: Vec<f64> = col.iter().map(|v| v + 0.01).collect();
        let d = dataset_from_columns(&["one", "two"], &[col, near], &labels(3, 3));
        let mut spec = SelectorSpec::new(SelectorKind::Univariate);
        spec.k = 2;
        let unpruned = run_selector(&d, &spec).unwrap();
        assert_eq!(unpruned.selected().len(), 2);
        spec.correlation_threshold = Some(0.9);
        let pruned = run_selector(&d, &spec).unwrap();
        assert_eq!(pruned.selected().len(), 1);
    }

    #[test]
    fn auto_picks_a_mask_containing_the_signal() {
        let d = two_signal_one_noise();
        let mut spec = SelectorSpec::new(SelectorKind::Auto);
        spec.k = 2;
        spec.learner = knn1();
        // KNN has no importances, so RFE drops out of the race and the
        // univariate/stepwise winners are still compared.
        let mask = run_selector(&d, &spec).unwrap();
        assert!(mask.contains("sig_a") || mask.contains("sig_b"));
        assert!(mask.params().contains_key("auto"));
        let again = run_selector(&d, &spec).unwrap();
        assert_eq!(mask, again);
    }

    #[test]
    fn selector_kind_parses_cli_spellings() {
        assert_eq!(
            "stepwise".parse::<SelectorKind>().unwrap(),
            SelectorKind::StepwiseForward
        );
        assert_eq!(
            "stepwise-backward".parse::<SelectorKind>().unwrap(),
            SelectorKind::StepwiseBackward
        );
        assert!("pca".parse::<SelectorKind>().is_err());
    }

    #[test]
    fn mask_serializes_with_provenance() {
        let d = dataset_from_columns(
            &["a", "b"],
            &[vec![0.0, 1.0, 2.0, 3.0], vec![3.0, 2.0, 1.0, 0.0]],
            &labels(2, 2),
        );
        let mask = select_univariate(&d, 1).unwrap();
        let json = serde_json::to_string(&mask).unwrap();
        for key in ["method", "selected", "params", "seed"] {
            assert!(json.contains(&format!("\"{key}\"")), "missing {key}");
        }
        let back: FeatureMask = serde_json::from_str(&json).unwrap();
        assert_eq!(back, mask);
    }
}
