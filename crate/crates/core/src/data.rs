//! Domain types: labels, feature schemas, visit records, datasets, class weights.
//!
//! A [`SampleRecord`] is one infant-visit worth of day-long leg-movement
//! features plus identifying metadata. Records only exist inside a
//! [`Dataset`], which pins the [`FeatureSchema`] the feature vectors are keyed
//! to and enforces every value-range invariant at construction. Downstream
//! code (selection, learners, evaluation) can therefore assume dense,
//! validated, consistently-ordered feature vectors and never re-checks.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Binary developmental outcome label.
///
/// `Ar` (at risk) is the positive class throughout the toolkit: confusion
/// matrices, F1, and every tie-break (vote ties, probability 0.5, decision
/// value 0) resolve toward `Ar`, because a missed at-risk infant costs more
/// than a false referral.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Label {
    #[serde(rename = "TD")]
    Td,
    #[serde(rename = "AR")]
    Ar,
}

impl Label {
    /// Parses a label cell. Case-insensitive, surrounding whitespace ignored.
    pub fn parse(s: &str) -> Result<Label> {
        match s.trim().to_ascii_lowercase().as_str() {
            "td" => Ok(Label::Td),
            "ar" => Ok(Label::Ar),
            other => Err(Error::InvalidParam(format!(
                "unrecognized label `{other}` (expected TD or AR)"
            ))),
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Label::Td => "TD",
            Label::Ar => "AR",
        }
    }
}

impl std::fmt::Display for Label {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Physical kind of a feature column. Determines the validation range and
/// whether [`crate::ingest::normalize_by_awake_time`] touches the column.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureKind {
    /// Events per awake hour. Non-negative.
    Rate,
    /// Raw event total for the recording; becomes `Rate` after normalization.
    Count,
    /// Percentage on the 0..=100 scale.
    Percent,
    /// Duration in seconds. Non-negative.
    DurationS,
    /// Acceleration magnitude in g. Non-negative.
    AccelG,
}

impl FeatureKind {
    fn check(&self, name: &str, v: f64) -> std::result::Result<(), String> {
        if !v.is_finite() {
            return Err(format!("feature `{name}` is not finite"));
        }
        match self {
            FeatureKind::Percent => {
                if !(0.0..=100.0).contains(&v) {
                    return Err(format!("feature `{name}` = {v} outside 0..=100"));
                }
            }
            _ => {
                if v < 0.0 {
                    return Err(format!("feature `{name}` = {v} is negative"));
                }
            }
        }
        Ok(())
    }
}

const LEG_FEATURES: [(&str, FeatureKind); 10] = [
    ("movements_per_awake_hour", FeatureKind::Rate),
    ("pct_unilateral", FeatureKind::Percent),
    ("pct_bilateral_sync", FeatureKind::Percent),
    ("pct_bilateral_async", FeatureKind::Percent),
    ("mean_duration", FeatureKind::DurationS),
    ("sd_duration", FeatureKind::DurationS),
    ("mean_avg_accel", FeatureKind::AccelG),
    ("sd_avg_accel", FeatureKind::AccelG),
    ("mean_peak_accel", FeatureKind::AccelG),
    ("sd_peak_accel", FeatureKind::AccelG),
];

/// Ordered feature name/kind table a dataset is keyed to.
///
/// The canonical layout is twenty slots, ten per leg (`_l` then `_r` suffix),
/// but schemas are data: ingest derives them from CSV headers, so alternate
/// column sets flow through the pipeline unchanged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureSchema {
    names: Vec<String>,
    kinds: Vec<FeatureKind>,
}

impl FeatureSchema {
    pub fn new(names: Vec<String>, kinds: Vec<FeatureKind>) -> Result<FeatureSchema> {
        if names.is_empty() {
            return Err(Error::Schema("schema has no features".into()));
        }
        if names.len() != kinds.len() {
            return Err(Error::Schema(format!(
                "{} names but {} kinds",
                names.len(),
                kinds.len()
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for n in &names {
            if !seen.insert(n.as_str()) {
                return Err(Error::Schema(format!("duplicate feature name `{n}`")));
            }
        }
        Ok(FeatureSchema { names, kinds })
    }

    /// The default twenty-slot per-leg layout, in rate form.
    pub fn canonical() -> FeatureSchema {
        let mut names = Vec::with_capacity(20);
        let mut kinds = Vec::with_capacity(20);
        for suffix in ["_l", "_r"] {
            for (base, kind) in LEG_FEATURES {
                names.push(format!("{base}{suffix}"));
                kinds.push(kind);
            }
        }
        FeatureSchema { names, kinds }
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn kinds(&self) -> &[FeatureKind] {
        &self.kinds
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    /// Infers a kind from a column name. Canonical names map exactly; other
    /// names fall back to substring heuristics, defaulting to `Rate`.
    pub fn infer_kind(name: &str) -> FeatureKind {
        for suffix in ["_l", "_r"] {
            for (base, kind) in LEG_FEATURES {
                if name == format!("{base}{suffix}") {
                    return kind;
                }
            }
        }
        if name.contains("total_movements") || name.starts_with("count_") {
            FeatureKind::Count
        } else if name.contains("pct") || name.contains("percent") {
            FeatureKind::Percent
        } else if name.contains("duration") {
            FeatureKind::DurationS
        } else if name.contains("accel") {
            FeatureKind::AccelG
        } else {
            FeatureKind::Rate
        }
    }

    /// Index triples (unilateral, bilateral-sync, bilateral-async) that must
    /// sum to 100 for one leg. Detected by name so header-driven schemas that
    /// lack a full triple simply skip the constraint.
    pub(crate) fn laterality_triples(&self) -> Vec<[usize; 3]> {
        let mut triples = Vec::new();
        for (i, name) in self.names.iter().enumerate() {
            if let Some(suffix) = name.strip_prefix("pct_unilateral") {
                let sync = self.index_of(&format!("pct_bilateral_sync{suffix}"));
                let async_ = self.index_of(&format!("pct_bilateral_async{suffix}"));
                if let (Some(s), Some(a)) = (sync, async_) {
                    triples.push([i, s, a]);
                }
            }
        }
        triples
    }
}

/// Stable identity of a visit: infant id plus 1-based visit number.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RecordId {
    pub infant_id: String,
    pub visit_index: u32,
}

impl std::fmt::Display for RecordId {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}/v{}", self.infant_id, self.visit_index)
    }
}

/// One infant-visit: metadata plus a dense feature vector keyed to the
/// owning dataset's schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub infant_id: String,
    pub visit_index: u32,
    pub age_months: f64,
    pub label: Label,
    /// Alberta Infant Motor Scale score, when the visit had one.
    pub aims_score: Option<f64>,
    /// Sensor-active awake time in hours. Required to normalize raw counts.
    pub awake_hours: Option<f64>,
    pub features: Vec<f64>,
}

impl SampleRecord {
    pub fn id(&self) -> RecordId {
        RecordId {
            infant_id: self.infant_id.clone(),
            visit_index: self.visit_index,
        }
    }
}

/// Age band a dataset has been restricted to, in months.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AgeBand {
    /// `[0, 6)` months.
    ZeroToSix,
    /// `[6, 12]` months. The 6.0 boundary belongs here, not in `ZeroToSix`.
    SixToTwelve,
    Unbanded,
}

impl AgeBand {
    pub fn contains(&self, age_months: f64) -> bool {
        match self {
            AgeBand::ZeroToSix => (0.0..6.0).contains(&age_months),
            AgeBand::SixToTwelve => (6.0..=12.0).contains(&age_months),
            AgeBand::Unbanded => age_months >= 0.0,
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            AgeBand::ZeroToSix => "0-6",
            AgeBand::SixToTwelve => "6-12",
            AgeBand::Unbanded => "unbanded",
        }
    }
}

/// Validated collection of records sharing one schema and age band.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    schema: FeatureSchema,
    records: Vec<SampleRecord>,
    band: AgeBand,
}

impl Dataset {
    /// Builds a dataset, checking every record invariant:
    /// vector length, value ranges per kind, laterality sums, band membership,
    /// metadata sanity, and visit-id uniqueness.
    pub fn new(schema: FeatureSchema, records: Vec<SampleRecord>, band: AgeBand) -> Result<Dataset> {
        let triples = schema.laterality_triples();
        let mut ids = std::collections::HashSet::new();
        for rec in &records {
            let whine = |message: String| Error::Record {
                record: rec.id().to_string(),
                message,
            };
            if !ids.insert(rec.id()) {
                return Err(whine("duplicate (infant_id, visit_index)".into()));
            }
            if rec.visit_index < 1 {
                return Err(whine("visit_index must be >= 1".into()));
            }
            if !rec.age_months.is_finite() || rec.age_months < 0.0 {
                return Err(whine(format!("age_months = {} invalid", rec.age_months)));
            }
            if !band.contains(rec.age_months) {
                return Err(whine(format!(
                    "age {} months outside band {}",
                    rec.age_months,
                    band.as_str()
                )));
            }
            if let Some(a) = rec.aims_score {
                if !a.is_finite() || a < 0.0 {
                    return Err(whine(format!("aims_score = {a} invalid")));
                }
            }
            if let Some(h) = rec.awake_hours {
                if !h.is_finite() || h <= 0.0 {
                    return Err(whine(format!("awake_hours = {h} must be positive")));
                }
            }
            if rec.features.len() != schema.len() {
                return Err(whine(format!(
                    "{} features, schema has {}",
                    rec.features.len(),
                    schema.len()
                )));
            }
            for (j, &v) in rec.features.iter().enumerate() {
                schema.kinds[j]
                    .check(&schema.names[j], v)
                    .map_err(&whine)?;
            }
            for t in &triples {
                let sum: f64 = t.iter().map(|&j| rec.features[j]).sum();
                if (sum - 100.0).abs() > 0.5 {
                    return Err(whine(format!(
                        "laterality percentages sum to {sum:.3}, expected 100 +/- 0.5"
                    )));
                }
            }
        }
        Ok(Dataset {
            schema,
            records,
            band,
        })
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[SampleRecord] {
        &self.records
    }

    pub fn band(&self) -> AgeBand {
        self.band
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// (n_td, n_ar)
    pub fn class_counts(&self) -> (usize, usize) {
        let ar = self.records.iter().filter(|r| r.label == Label::Ar).count();
        (self.records.len() - ar, ar)
    }

    /// Clones the selected records into a new dataset. Invariants are
    /// preserved by construction, so nothing is re-validated.
    pub fn subset(&self, indices: &[usize]) -> Dataset {
        Dataset {
            schema: self.schema.clone(),
            records: indices.iter().map(|&i| self.records[i].clone()).collect(),
            band: self.band,
        }
    }

    /// Record positions sorted by [`RecordId`]. Everything that iterates
    /// samples (folds, fits, resampling) walks this order so results never
    /// depend on file row order.
    pub fn id_sorted_indices(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.records.len()).collect();
        idx.sort_by(|&a, &b| self.records[a].id().cmp(&self.records[b].id()));
        idx
    }
}

/// Per-class sample weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassWeights {
    td: f64,
    ar: f64,
}

impl ClassWeights {
    pub fn new(td: f64, ar: f64) -> Result<ClassWeights> {
        if !(td.is_finite() && ar.is_finite()) || td <= 0.0 || ar <= 0.0 {
            return Err(Error::InvalidParam(format!(
                "class weights must be positive, got td={td} ar={ar}"
            )));
        }
        Ok(ClassWeights { td, ar })
    }

    /// Balanced weights `n / (2 * n_class)`: each class carries half the
    /// total weighted mass regardless of its head count.
    pub fn balanced(dataset: &Dataset) -> Result<ClassWeights> {
        let (n_td, n_ar) = dataset.class_counts();
        if n_td == 0 || n_ar == 0 {
            return Err(Error::DegenerateDataset(format!(
                "balanced weights need both classes, got {n_td} TD / {n_ar} AR"
            )));
        }
        let n = (n_td + n_ar) as f64;
        Ok(ClassWeights {
            td: n / (2.0 * n_td as f64),
            ar: n / (2.0 * n_ar as f64),
        })
    }

    pub fn weight_for(&self, label: Label) -> f64 {
        match label {
            Label::Td => self.td,
            Label::Ar => self.ar,
        }
    }

    pub fn td(&self) -> f64 {
        self.td
    }

    pub fn ar(&self) -> f64 {
        self.ar
    }
}
