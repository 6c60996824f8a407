//! Learner families, their hyperparameters, and the single fit entry point.
//!
//! Every fit goes through the same assembly line: resolve the feature mask
//! against the dataset schema, order rows by record id so fits are invariant
//! to input order, expand class weights into per-sample weights normalized
//! to mean one (so doubling every weight changes nothing), and hand the
//! dense matrix to the family-specific trainer.

pub mod adaboost;
pub mod forest;
pub mod knn;
pub mod logreg;
pub mod split;
pub mod standardize;
pub mod svm;
pub mod tree;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::data::{ClassWeights, Dataset, Label};
use crate::error::{Error, Result};
use crate::select::FeatureMask;

use adaboost::BoostModel;
use forest::{FeatureSubset, ForestConfig, ForestModel};
use knn::KnnModel;
use logreg::LogRegConfig;
use split::SplitCriterion;
use standardize::Standardizer;
use svm::{Kernel, SvmConfig, SvmModel};
use tree::{TreeConfig, TreeNode};

pub const MODEL_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LearnerFamily {
    DecisionTree,
    LogisticRegression,
    Svm,
    Knn,
    RandomForest,
    Adaboost,
}

impl LearnerFamily {
    /// Canonical ordering, used wherever ties fall back to family order.
    pub const ALL: [LearnerFamily; 6] = [
        LearnerFamily::DecisionTree,
        LearnerFamily::LogisticRegression,
        LearnerFamily::Svm,
        LearnerFamily::Knn,
        LearnerFamily::RandomForest,
        LearnerFamily::Adaboost,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            LearnerFamily::DecisionTree => "decision_tree",
            LearnerFamily::LogisticRegression => "logistic_regression",
            LearnerFamily::Svm => "svm",
            LearnerFamily::Knn => "knn",
            LearnerFamily::RandomForest => "random_forest",
            LearnerFamily::Adaboost => "adaboost",
        }
    }

    fn allowed_keys(&self) -> &'static [&'static str] {
        match self {
            LearnerFamily::DecisionTree => {
                &["max_depth", "min_leaf_weight", "pruning_confidence", "criterion"]
            }
            LearnerFamily::LogisticRegression => &["lambda", "max_iter", "tol"],
            LearnerFamily::Svm => &["c", "kernel", "gamma", "tol", "max_passes"],
            LearnerFamily::Knn => &["k"],
            LearnerFamily::RandomForest => &["trees", "max_features", "max_depth", "bootstrap"],
            LearnerFamily::Adaboost => &["rounds", "criterion"],
        }
    }
}

impl fmt::Display for LearnerFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for LearnerFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<LearnerFamily> {
        LearnerFamily::ALL
            .iter()
            .copied()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::InvalidParam(format!("unknown learner family `{s}`")))
    }
}

/// One hyperparameter value. JSON numbers with a fractional part become
/// `Float`, whole numbers become `Int`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ParamValue {
    Flag(bool),
    Int(i64),
    Float(f64),
    Text(String),
}

impl fmt::Display for ParamValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ParamValue::Flag(b) => write!(f, "{b}"),
            ParamValue::Int(i) => write!(f, "{i}"),
            ParamValue::Float(v) => write!(f, "{v}"),
            ParamValue::Text(s) => f.write_str(s),
        }
    }
}

/// A learner family plus explicit hyperparameter overrides. Unknown keys are
/// rejected at construction, including when deserializing, so a typo in a
/// config file fails loudly instead of silently running defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawSpec")]
pub struct LearnerSpec {
    family: LearnerFamily,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    params: BTreeMap<String, ParamValue>,
    #[serde(skip_serializing_if = "is_zero", default)]
    seed: u64,
}

fn is_zero(v: &u64) -> bool {
    *v == 0
}

#[derive(Deserialize)]
struct RawSpec {
    family: LearnerFamily,
    #[serde(default)]
    params: BTreeMap<String, ParamValue>,
    #[serde(default)]
    seed: u64,
}

impl TryFrom<RawSpec> for LearnerSpec {
    type Error = Error;

    fn try_from(raw: RawSpec) -> Result<LearnerSpec> {
        let mut spec = LearnerSpec::new(raw.family, raw.params)?;
        spec.seed = raw.seed;
        Ok(spec)
    }
}

impl LearnerSpec {
    pub fn new(family: LearnerFamily, params: BTreeMap<String, ParamValue>) -> Result<LearnerSpec> {
        for key in params.keys() {
            if !family.allowed_keys().contains(&key.as_str()) {
                return Err(Error::UnknownHyperparameter {
                    family: family.as_str().into(),
                    key: key.clone(),
                });
            }
        }
        Ok(LearnerSpec {
            family,
            params,
            seed: 0,
        })
    }

    pub fn defaults(family: LearnerFamily) -> LearnerSpec {
        LearnerSpec {
            family,
            params: BTreeMap::new(),
            seed: 0,
        }
    }

    pub fn with_seed(mut self, seed: u64) -> LearnerSpec {
        self.seed = seed;
        self
    }

    pub fn with_param(mut self, key: &str, value: ParamValue) -> Result<LearnerSpec> {
        if !self.family.allowed_keys().contains(&key) {
            return Err(Error::UnknownHyperparameter {
                family: self.family.as_str().into(),
                key: key.into(),
            });
        }
        self.params.insert(key.into(), value);
        Ok(self)
    }

    pub fn family(&self) -> LearnerFamily {
        self.family
    }

    pub fn params(&self) -> &BTreeMap<String, ParamValue> {
        &self.params
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Compact human-readable identity, e.g. `svm{c=10,kernel=rbf}`.
    pub fn id(&self) -> String {
        if self.params.is_empty() {
            return self.family.as_str().to_string();
        }
        let inner: Vec<String> = self
            .params
            .iter()
            .map(|(k, v)| format!("{k}={v}"))
            .collect();
        format!("{}{{{}}}", self.family, inner.join(","))
    }

    fn get_f64(&self, key: &str, default: f64) -> Result<f64> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Float(v)) => Ok(*v),
            Some(ParamValue::Int(i)) => Ok(*i as f64),
            Some(other) => Err(Error::InvalidParam(format!(
                "{} {key} expects a number, got `{other}`",
                self.family
            ))),
        }
    }

    fn get_usize(&self, key: &str, default: usize) -> Result<usize> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Int(i)) if *i >= 0 => Ok(*i as usize),
            Some(other) => Err(Error::InvalidParam(format!(
                "{} {key} expects a nonnegative integer, got `{other}`",
                self.family
            ))),
        }
    }

    fn get_text(&self, key: &str, default: &str) -> Result<String> {
        match self.params.get(key) {
            None => Ok(default.to_string()),
            Some(ParamValue::Text(s)) => Ok(s.clone()),
            Some(other) => Err(Error::InvalidParam(format!(
                "{} {key} expects a string, got `{other}`",
                self.family
            ))),
        }
    }

    fn get_flag(&self, key: &str, default: bool) -> Result<bool> {
        match self.params.get(key) {
            None => Ok(default),
            Some(ParamValue::Flag(b)) => Ok(*b),
            Some(other) => Err(Error::InvalidParam(format!(
                "{} {key} expects true or false, got `{other}`",
                self.family
            ))),
        }
    }

    fn criterion(&self, default: SplitCriterion) -> Result<SplitCriterion> {
        let name = self.get_text(
            "criterion",
            match default {
                SplitCriterion::GainRatio => "gain_ratio",
                SplitCriterion::Gini => "gini",
            },
        )?;
        match name.as_str() {
            "gain_ratio" => Ok(SplitCriterion::GainRatio),
            "gini" => Ok(SplitCriterion::Gini),
            other => Err(Error::InvalidParam(format!(
                "{} criterion must be gain_ratio or gini, got `{other}`",
                self.family
            ))),
        }
    }
}

/// Dense, id-ordered training matrix handed to the family trainers.
#[derive(Debug, Clone)]
pub(crate) struct TrainSet {
    pub names: Vec<String>,
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Label>,
    pub w: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum ModelKind {
    DecisionTree {
        root: TreeNode,
        importances: Vec<f64>,
    },
    LogisticRegression {
        standardizer: Standardizer,
        coef: Vec<f64>,
        intercept: f64,
    },
    Svm(SvmModel),
    Knn(KnnModel),
    RandomForest(ForestModel),
    Adaboost(BoostModel),
}

/// A fitted classifier bound to the exact feature list it was trained on.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Model {
    feature_names: Vec<String>,
    /// Digest of the ordered feature list; checked when a model file is
    /// loaded so a model is never silently applied to reordered columns.
    fingerprint: String,
    #[serde(flatten)]
    kind: ModelKind,
}

#[derive(Serialize)]
struct SavedModelRef<'a> {
    version: u32,
    model: &'a Model,
}

#[derive(Deserialize)]
struct SavedModel {
    version: u32,
    model: Model,
}

pub fn feature_fingerprint(names: &[String]) -> String {
    let mut hasher = Sha256::new();
    for name in names {
        hasher.update(name.as_bytes());
        hasher.update([0u8]);
    }
    let digest = hasher.finalize();
    let mut hex = String::with_capacity(64);
    for byte in digest {
        hex.push_str(&format!("{byte:02x}"));
    }
    hex
}

pub fn fit(
    dataset: &Dataset,
    mask: &FeatureMask,
    weights: &ClassWeights,
    spec: &LearnerSpec,
) -> Result<Model> {
    let names = mask.selected();
    if names.is_empty() {
        return Err(Error::InvalidParam("feature mask selects no columns".into()));
    }
    let cols: Vec<usize> = names
        .iter()
        .map(|n| {
            dataset
                .schema()
                .index_of(n)
                .ok_or_else(|| Error::MissingColumn(n.clone()))
        })
        .collect::<Result<_>>()?;
    let (td_n, ar_n) = dataset.class_counts();
    if td_n == 0 || ar_n == 0 {
        return Err(Error::DegenerateDataset(
            "training data must contain both classes".into(),
        ));
    }

    let order = dataset.id_sorted_indices();
    let n = order.len();
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    let mut w = Vec::with_capacity(n);
    for &i in &order {
        let r = &dataset.records()[i];
        x.push(cols.iter().map(|&c| r.features[c]).collect());
        y.push(r.label);
        w.push(weights.weight_for(r.label));
    }
    let mean = w.iter().sum::<f64>() / n as f64;
    for wi in &mut w {
        *wi /= mean;
    }
    let train = TrainSet {
        names: names.to_vec(),
        x,
        y,
        w,
    };

    let kind = match spec.family {
        LearnerFamily::DecisionTree => {
            let depth = spec.get_usize("max_depth", 0)?;
            let cf = spec.get_f64("pruning_confidence", 0.25)?;
            if !(0.0..1.0).contains(&cf) {
                return Err(Error::InvalidParam(
                    "pruning_confidence must be in [0, 1); 0 disables pruning".into(),
                ));
            }
            let cfg = TreeConfig {
                max_depth: if depth == 0 { None } else { Some(depth) },
                min_leaf_weight: spec.get_f64("min_leaf_weight", 1.0)?.max(0.0),
                pruning_confidence: if cf == 0.0 { None } else { Some(cf) },
                criterion: spec.criterion(SplitCriterion::GainRatio)?,
            };
            let (root, importances) = tree::fit_tree(&train, &cfg, None);
            ModelKind::DecisionTree { root, importances }
        }
        LearnerFamily::LogisticRegression => {
            let cfg = LogRegConfig {
                lambda: spec.get_f64("lambda", 1.0)?,
                max_iter: spec.get_usize("max_iter", 100)?.max(1),
                tol: spec.get_f64("tol", 1e-8)?,
            };
            if cfg.lambda < 0.0 {
                return Err(Error::InvalidParam("lambda must be nonnegative".into()));
            }
            if cfg.tol <= 0.0 {
                return Err(Error::InvalidParam("tol must be positive".into()));
            }
            let (standardizer, coef, intercept) = logreg::fit_logreg(&train, &cfg)?;
            ModelKind::LogisticRegression {
                standardizer,
                coef,
                intercept,
            }
        }
        LearnerFamily::Svm => {
            let gamma = match spec.params.get("gamma") {
                None => None,
                Some(ParamValue::Text(s)) if s == "auto" => None,
                Some(ParamValue::Float(v)) => Some(*v),
                Some(ParamValue::Int(i)) => Some(*i as f64),
                Some(other) => {
                    return Err(Error::InvalidParam(format!(
                        "svm gamma expects a number or \"auto\", got `{other}`"
                    )))
                }
            };
            let kernel = match spec.get_text("kernel", "rbf")?.as_str() {
                "linear" => Kernel::Linear,
                "rbf" => Kernel::Rbf,
                other => {
                    return Err(Error::InvalidParam(format!(
                        "svm kernel must be linear or rbf, got `{other}`"
                    )))
                }
            };
            let cfg = SvmConfig {
                c: spec.get_f64("c", 1.0)?,
                kernel,
                gamma,
                tol: spec.get_f64("tol", 1e-3)?,
                max_passes: spec.get_usize("max_passes", 200)?.max(1),
            };
            ModelKind::Svm(svm::fit_svm(&train, &cfg)?)
        }
        LearnerFamily::Knn => ModelKind::Knn(knn::fit_knn(&train, spec.get_usize("k", 5)?)?),
        LearnerFamily::RandomForest => {
            let max_features = match spec.get_text("max_features", "sqrt")?.as_str() {
                "sqrt" => FeatureSubset::Sqrt,
                "all" => FeatureSubset::All,
                other => {
                    return Err(Error::InvalidParam(format!(
                        "random_forest max_features must be sqrt or all, got `{other}`"
                    )))
                }
            };
            let depth = spec.get_usize("max_depth", 0)?;
            let cfg = ForestConfig {
                trees: spec.get_usize("trees", 100)?,
                max_features,
                max_depth: if depth == 0 { None } else { Some(depth) },
                bootstrap: spec.get_flag("bootstrap", true)?,
            };
            ModelKind::RandomForest(forest::fit_forest(&train, &cfg, spec.seed)?)
        }
        LearnerFamily::Adaboost => {
            let rounds = spec.get_usize("rounds", 50)?.max(1);
            let criterion = spec.criterion(SplitCriterion::Gini)?;
            ModelKind::Adaboost(adaboost::fit_adaboost(&train, rounds, criterion)?)
        }
    };

    Ok(Model {
        fingerprint: feature_fingerprint(names),
        feature_names: names.to_vec(),
        kind,
    })
}

impl Model {
    pub fn family(&self) -> LearnerFamily {
        match &self.kind {
            ModelKind::DecisionTree { .. } => LearnerFamily::DecisionTree,
            ModelKind::LogisticRegression { .. } => LearnerFamily::LogisticRegression,
            ModelKind::Svm(_) => LearnerFamily::Svm,
            ModelKind::Knn(_) => LearnerFamily::Knn,
            ModelKind::RandomForest(_) => LearnerFamily::RandomForest,
            ModelKind::Adaboost(_) => LearnerFamily::Adaboost,
        }
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    /// Predicts from a row already laid out in this model's feature order.
    pub fn predict_row(&self, row: &[f64]) -> Label {
        assert_eq!(
            row.len(),
            self.feature_names.len(),
            "feature row length does not match the model"
        );
        match &self.kind {
            ModelKind::DecisionTree { root, .. } => root.predict(row),
            ModelKind::LogisticRegression {
                standardizer,
                coef,
                intercept,
            } => {
                let z = logreg::decision(coef, *intercept, &standardizer.transform_row(row));
                if z >= 0.0 {
                    Label::Ar
                } else {
                    Label::Td
                }
            }
            ModelKind::Svm(m) => m.predict(row),
            ModelKind::Knn(m) => m.predict(row),
            ModelKind::RandomForest(m) => m.predict(row),
            ModelKind::Adaboost(m) => m.predict(row),
        }
    }

    /// Gathers this model's features by name from the dataset's schema and
    /// predicts one record.
    pub fn predict_record(&self, dataset: &Dataset, index: usize) -> Result<Label> {
        let record = &dataset.records()[index];
        let mut row = Vec::with_capacity(self.feature_names.len());
        for name in &self.feature_names {
            let col = dataset
                .schema()
                .index_of(name)
                .ok_or_else(|| Error::MissingColumn(name.clone()))?;
            row.push(record.features[col]);
        }
        Ok(self.predict_row(&row))
    }

    pub fn predict_dataset(&self, dataset: &Dataset) -> Result<Vec<Label>> {
        (0..dataset.len())
            .map(|i| self.predict_record(dataset, i))
            .collect()
    }

    /// Per-feature importance aligned with `feature_names`, normalized to
    /// sum 1 when any signal exists. Not every family can rank its features.
    pub fn importances(&self) -> Result<Vec<f64>> {
        let raw: Vec<f64> = match &self.kind {
            ModelKind::DecisionTree { importances, .. } => importances.clone(),
            ModelKind::RandomForest(m) => m.importances().to_vec(),
            ModelKind::LogisticRegression { coef, .. } => coef.iter().map(|c| c.abs()).collect(),
            ModelKind::Svm(m) => match m.standardized_weights() {
                Some(w) => w.iter().map(|c| c.abs()).collect(),
                None => {
                    return Err(Error::NoImportances {
                        family: "svm (rbf kernel)".into(),
                    })
                }
            },
            ModelKind::Adaboost(m) => {
                let mut acc = vec![0.0; self.feature_names.len()];
                for stump in &m.stumps {
                    if let TreeNode::Split { feature_index, .. } = &stump.tree {
                        acc[*feature_index] += stump.alpha;
                    }
                }
                acc
            }
            ModelKind::Knn(_) => {
                return Err(Error::NoImportances {
                    family: "knn".into(),
                })
            }
        };
        let total: f64 = raw.iter().sum();
        if total > 0.0 {
            Ok(raw.iter().map(|v| v / total).collect())
        } else {
            Ok(raw)
        }
    }

    pub fn kind(&self) -> &ModelKind {
        &self.kind
    }

    pub fn as_svm(&self) -> Option<&SvmModel> {
        match &self.kind {
            ModelKind::Svm(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_tree(&self) -> Option<&TreeNode> {
        match &self.kind {
            ModelKind::DecisionTree { root, .. } => Some(root),
            _ => None,
        }
    }

    pub fn as_boost(&self) -> Option<&BoostModel> {
        match &self.kind {
            ModelKind::Adaboost(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_forest(&self) -> Option<&ForestModel> {
        match &self.kind {
            ModelKind::RandomForest(m) => Some(m),
            _ => None,
        }
    }

    pub fn to_json_string(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&SavedModelRef {
            version: MODEL_FORMAT_VERSION,
            model: self,
        })?)
    }

    pub fn from_json_str(json: &str) -> Result<Model> {
        let saved: SavedModel = serde_json::from_str(json)?;
        if saved.version != MODEL_FORMAT_VERSION {
            return Err(Error::Schema(format!(
                "unsupported model format version {} (this build reads version {})",
                saved.version, MODEL_FORMAT_VERSION
            )));
        }
        let expected = feature_fingerprint(&saved.model.feature_names);
        if expected != saved.model.fingerprint {
            return Err(Error::FingerprintMismatch {
                expected,
                actual: saved.model.fingerprint,
            });
        }
        Ok(saved.model)
    }
}
