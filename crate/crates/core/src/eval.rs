//! Leave-one-out evaluation, exact-rational metric reports, and the
//! weighted-random chance baseline.
//!
//! Every metric is kept as an exact rational for as long as possible.
//! Counts divided by counts never touch floating point, so a report can be
//! checked against an archived result cell by exact comparison instead of
//! epsilon guessing, and averaging thousands of baseline runs cannot drift.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{Signed, ToPrimitive, Zero};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::data::{ClassWeights, Dataset, Label, RecordId};
use crate::error::{Error, Result};
use crate::learners::{fit, LearnerSpec};
use crate::seeds::mix;
use crate::select::{run_selector, FeatureMask, SelectorSpec};

/// Exact rational metric value.
///
/// Serializes as `{"ratio": "13/16", "value": 0.8125}` so JSON consumers get
/// both the lossless form and a convenient float. The float is advisory; the
/// ratio is authoritative and survives a round trip bit for bit.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Exact(BigRational);

impl Exact {
    pub fn zero() -> Exact {
        Exact(BigRational::zero())
    }

    pub fn one() -> Exact {
        Exact(BigRational::from_integer(BigInt::from(1)))
    }

    /// Builds `numerator / denominator` from counts. Panics if the
    /// denominator is zero; callers handle that case before dividing.
    pub fn from_counts(numerator: u64, denominator: u64) -> Exact {
        assert!(denominator != 0, "zero denominator in exact ratio");
        Exact(BigRational::new(
            BigInt::from(numerator),
            BigInt::from(denominator),
        ))
    }

    pub fn from_rational(value: BigRational) -> Exact {
        Exact(value)
    }

    pub fn rational(&self) -> &BigRational {
        &self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0.to_f64().unwrap_or(f64::NAN)
    }

    /// Whether this exact value is consistent with a printed decimal cell.
    ///
    /// A cell with `d` decimal digits pins its value only to within one unit
    /// of the last printed place, and archived tables mix round-half-up with
    /// plain truncation. The test `|exact - printed| < 10^-d`, evaluated in
    /// exact arithmetic with a strict inequality, accepts every value that
    /// either convention could have printed and rejects everything else.
    pub fn matches_printed(&self, cell: &str) -> bool {
        let printed = match parse_printed(cell) {
            Some(p) => p,
            None => return false,
        };
        let diff = (&self.0 - &printed.value).abs();
        diff < printed.tolerance
    }

    /// Renders with three decimal digits, rounding half away from zero.
    /// The rounding happens in exact arithmetic.
    pub fn render_3dp(&self) -> String {
        let thousand = BigInt::from(1000);
        let scaled = &self.0 * BigRational::from_integer(thousand.clone())
            + BigRational::new(BigInt::from(1), BigInt::from(2));
        let milli = scaled.floor().to_integer();
        let whole = &milli / &thousand;
        let frac = &milli % &thousand;
        format!("{whole}.{frac:03}")
    }
}

struct PrintedCell {
    value: BigRational,
    tolerance: BigRational,
}

/// Parses decimal cells of the shape `1`, `0.83`, `.83`, or `0.903`.
fn parse_printed(cell: &str) -> Option<PrintedCell> {
    let cell = cell.trim();
    if cell.is_empty() {
        return None;
    }
    let (int_part, frac_part) = match cell.split_once('.') {
        Some((i, f)) => (i, f),
        None => (cell, ""),
    };
    if int_part.is_empty() && frac_part.is_empty() {
        return None;
    }
    if !int_part.chars().all(|c| c.is_ascii_digit())
        || !frac_part.chars().all(|c| c.is_ascii_digit())
    {
        return None;
    }
    let digits = format!(
        "{}{}",
        if int_part.is_empty() { "0" } else { int_part },
        frac_part
    );
    let numerator: BigInt = digits.parse().ok()?;
    let denominator = BigInt::from(10u32).pow(frac_part.len() as u32);
    Some(PrintedCell {
        value: BigRational::new(numerator, denominator.clone()),
        tolerance: BigRational::new(BigInt::from(1), denominator),
    })
}

impl fmt::Display for Exact {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl Serialize for Exact {
    fn serialize<S: Serializer>(&self, serializer: S) -> std::result::Result<S::Ok, S::Error> {
        use serde::ser::SerializeStruct;
        let mut s = serializer.serialize_struct("Exact", 2)?;
        s.serialize_field("ratio", &self.0.to_string())?;
        s.serialize_field("value", &self.as_f64())?;
        s.end()
    }
}

impl<'de> Deserialize<'de> for Exact {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> std::result::Result<Exact, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            ratio: String,
        }
        let raw = Raw::deserialize(deserializer)?;
        let value: BigRational = raw
            .ratio
            .parse()
            .map_err(|e| serde::de::Error::custom(format!("bad ratio `{}`: {e}", raw.ratio)))?;
        Ok(Exact(value))
    }
}

/// Two-class confusion counts. `td_correct + td_wrong` is the number of true
/// TD records; `ar_correct + ar_wrong` the number of true AR records.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    pub td_correct: u64,
    pub td_wrong: u64,
    pub ar_correct: u64,
    pub ar_wrong: u64,
}

impl ConfusionMatrix {
    pub fn add(&mut self, actual: Label, predicted: Label) {
        match (actual, predicted) {
            (Label::Td, Label::Td) => self.td_correct += 1,
            (Label::Td, Label::Ar) => self.td_wrong += 1,
            (Label::Ar, Label::Ar) => self.ar_correct += 1,
            (Label::Ar, Label::Td) => self.ar_wrong += 1,
        }
    }

    pub fn n_td(&self) -> u64 {
        self.td_correct + self.td_wrong
    }

    pub fn n_ar(&self) -> u64 {
        self.ar_correct + self.ar_wrong
    }

    pub fn total(&self) -> u64 {
        self.n_td() + self.n_ar()
    }

    pub fn merge(&mut self, other: &ConfusionMatrix) {
        self.td_correct += other.td_correct;
        self.td_wrong += other.td_wrong;
        self.ar_correct += other.ar_correct;
        self.ar_wrong += other.ar_wrong;
    }
}

/// One row of a metric table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub accuracy: Exact,
    pub precision: Exact,
    pub recall: Exact,
    pub f1: Exact,
}

impl MetricRow {
    fn zeros() -> MetricRow {
        MetricRow {
            accuracy: Exact::zero(),
            precision: Exact::zero(),
            recall: Exact::zero(),
            f1: Exact::zero(),
        }
    }
}

/// Held-out prediction from one leave-one-out fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FoldPrediction {
    pub record: RecordId,
    pub actual: Label,
    pub predicted: Label,
}

/// Full evaluation report: confusion counts, per-class and average metric
/// rows, the per-fold predictions that produced them, and any caveats hit
/// along the way (skipped folds, zero denominators, absent classes).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub confusion: ConfusionMatrix,
    pub td_row: MetricRow,
    pub ar_row: MetricRow,
    pub average_row: MetricRow,
    pub fold_predictions: Vec<FoldPrediction>,
    pub notes: Vec<String>,
}

/// Per-class accuracy equals recall: within one class's records, the correct
/// ones are exactly the ones recalled.
fn class_row(
    class: &str,
    correct: u64,
    class_total: u64,
    predicted_total: u64,
    notes: &mut Vec<String>,
) -> MetricRow {
    if class_total == 0 {
        notes.push(format!("{class} class absent; {class} row reported as zeros"));
        return MetricRow::zeros();
    }
    let accuracy = Exact::from_counts(correct, class_total);
    let recall = accuracy.clone();
    let precision = if predicted_total == 0 {
        notes.push(format!(
            "{class} precision denominator is zero (nothing predicted {class}); reported as 0"
        ));
        Exact::zero()
    } else {
        Exact::from_counts(correct, predicted_total)
    };
    let pr_sum = precision.rational() + recall.rational();
    let f1 = if pr_sum.is_zero() {
        Exact::zero()
    } else {
        let two = BigRational::from_integer(BigInt::from(2));
        Exact::from_rational(two * precision.rational() * recall.rational() / pr_sum)
    };
    MetricRow {
        accuracy,
        precision,
        recall,
        f1,
    }
}

/// The average row weights each class row by its record count, which makes
/// the average accuracy equal to plain accuracy over all records.
fn average_row(td: &MetricRow, ar: &MetricRow, n_td: u64, n_ar: u64) -> MetricRow {
    let n = n_td + n_ar;
    assert!(n > 0, "average row over an empty confusion matrix");
    let wt = BigRational::new(BigInt::from(n_td), BigInt::from(n));
    let wa = BigRational::new(BigInt::from(n_ar), BigInt::from(n));
    let avg = |t: &Exact, a: &Exact| {
        Exact::from_rational(&wt * t.rational() + &wa * a.rational())
    };
    MetricRow {
        accuracy: avg(&td.accuracy, &ar.accuracy),
        precision: avg(&td.precision, &ar.precision),
        recall: avg(&td.recall, &ar.recall),
        f1: avg(&td.f1, &ar.f1),
    }
}

/// Builds the three metric rows for a confusion matrix.
pub fn compute_report(confusion: ConfusionMatrix) -> Result<EvalReport> {
    if confusion.total() == 0 {
        return Err(Error::DegenerateDataset(
            "confusion matrix has no records".into(),
        ));
    }
    let mut notes = Vec::new();
    let predicted_td = confusion.td_correct + confusion.ar_wrong;
    let predicted_ar = confusion.ar_correct + confusion.td_wrong;
    let td_row = class_row(
        "TD",
        confusion.td_correct,
        confusion.n_td(),
        predicted_td,
        &mut notes,
    );
    let ar_row = class_row(
        "AR",
        confusion.ar_correct,
        confusion.n_ar(),
        predicted_ar,
        &mut notes,
    );
    let average_row = average_row(&td_row, &ar_row, confusion.n_td(), confusion.n_ar());
    Ok(EvalReport {
        confusion,
        td_row,
        ar_row,
        average_row,
        fold_predictions: Vec::new(),
        notes,
    })
}

/// How features are chosen inside each leave-one-out fold.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum SelectionMode {
    /// One mask, fixed up front, reused in every fold.
    MaskFixed { mask: FeatureMask },
    /// Selection reruns from scratch on each fold's training split, so the
    /// held-out record never influences which features are used on it.
    SelectPerFold { selector: SelectorSpec },
}

/// Leave-one-out cross-validation.
///
/// Folds run in record-id order regardless of row order in `dataset`. Each
/// fold rebalances class weights on its own training split. A fold whose
/// training split collapses to a single class is skipped and noted rather
/// than aborting the whole evaluation.
pub fn loocv(dataset: &Dataset, spec: &LearnerSpec, mode: &SelectionMode) -> Result<EvalReport> {
    let n = dataset.len();
    if n < 3 {
        return Err(Error::DegenerateDataset(format!(
            "leave-one-out needs at least 3 records, got {n}"
        )));
    }
    let (n_td, n_ar) = dataset.class_counts();
    if n_td == 0 || n_ar == 0 {
        return Err(Error::DegenerateDataset(format!(
            "leave-one-out needs both classes, got {n_td} TD / {n_ar} AR"
        )));
    }
    let order = dataset.id_sorted_indices();
    let mut confusion = ConfusionMatrix::default();
    let mut fold_predictions = Vec::with_capacity(n);
    let mut notes = Vec::new();
    for (pos, &held) in order.iter().enumerate() {
        let train_indices: Vec<usize> = order
            .iter()
            .enumerate()
            .filter(|(p, _)| *p != pos)
            .map(|(_, &i)| i)
            .collect();
        let train = dataset.subset(&train_indices);
        let (t_td, t_ar) = train.class_counts();
        if t_td == 0 || t_ar == 0 {
            notes.push(format!(
                "fold holding out {} skipped: training split has a single class",
                dataset.records()[held].id()
            ));
            continue;
        }
        let weights = ClassWeights::balanced(&train)?;
        let model = match mode {
            SelectionMode::MaskFixed { mask } => fit(&train, mask, &weights, spec)?,
            SelectionMode::SelectPerFold { selector } => {
                let mask = run_selector(&train, selector)?;
                fit(&train, &mask, &weights, spec)?
            }
        };
        let actual = dataset.records()[held].label;
        let predicted = model.predict_record(dataset, held)?;
        confusion.add(actual, predicted);
        fold_predictions.push(FoldPrediction {
            record: dataset.records()[held].id(),
            actual,
            predicted,
        });
    }
    let mut report = compute_report(confusion)?;
    report.fold_predictions = fold_predictions;
    notes.extend(report.notes);
    report.notes = notes;
    Ok(report)
}

fn baseline_priors(dataset: &Dataset) -> Result<(usize, usize)> {
    if dataset.is_empty() {
        return Err(Error::DegenerateDataset(
            "baseline needs at least one record".into(),
        ));
    }
    Ok(dataset.class_counts())
}

/// One full pass of the weighted-random guesser over the dataset.
///
/// Each prediction draws an integer in `0..n` and answers TD when the draw
/// falls below the TD count. Integer draws, not a float threshold, so the
/// class priors are honored exactly and the stream is stable across
/// platforms.
fn baseline_single_run(dataset: &Dataset, order: &[usize], run_seed: u64) -> ConfusionMatrix {
    let (n_td, n_ar) = dataset.class_counts();
    let n = n_td + n_ar;
    let mut rng = ChaCha8Rng::seed_from_u64(run_seed);
    let mut confusion = ConfusionMatrix::default();
    for &idx in order {
        let draw = rng.gen_range(0..n);
        let predicted = if draw < n_td { Label::Td } else { Label::Ar };
        confusion.add(dataset.records()[idx].label, predicted);
    }
    confusion
}

/// Chance baseline: guesses labels at random with probabilities equal to the
/// class priors, repeated `runs` times.
///
/// The returned report pools the confusion counts across runs and reports
/// each metric as the exact arithmetic mean of the per-run metric rows. Run
/// `r` seeds its own generator from `mix(seed, r)`, so any single run can be
/// reproduced without replaying the ones before it.
pub fn weighted_random_baseline(dataset: &Dataset, runs: u64, seed: u64) -> Result<EvalReport> {
    if runs == 0 {
        return Err(Error::InvalidParam("baseline needs at least 1 run".into()));
    }
    baseline_priors(dataset)?;
    let order = dataset.id_sorted_indices();
    let mut pooled = ConfusionMatrix::default();
    // Sums of each metric across runs, kept exact.
    let mut sums: Vec<BigRational> = vec![BigRational::zero(); 12];
    for run in 0..runs {
        let confusion = baseline_single_run(dataset, &order, mix(seed, run));
        pooled.merge(&confusion);
        let report = compute_report(confusion)?;
        for (slot, row) in [&report.td_row, &report.ar_row, &report.average_row]
            .iter()
            .enumerate()
        {
            sums[slot * 4] += row.accuracy.rational();
            sums[slot * 4 + 1] += row.precision.rational();
            sums[slot * 4 + 2] += row.recall.rational();
            sums[slot * 4 + 3] += row.f1.rational();
        }
    }
    let runs_rat = BigRational::from_integer(BigInt::from(runs));
    let mean = |slot: usize| Exact::from_rational(sums[slot].clone() / &runs_rat);
    let rows: Vec<MetricRow> = (0..3)
        .map(|r| MetricRow {
            accuracy: mean(r * 4),
            precision: mean(r * 4 + 1),
            recall: mean(r * 4 + 2),
            f1: mean(r * 4 + 3),
        })
        .collect();
    let mut report_rows = rows.into_iter();
    let (n_td, n_ar) = dataset.class_counts();
    let mut notes = vec![format!(
        "weighted-random baseline: {runs} run(s), priors {n_td} TD / {n_ar} AR, seed {seed}"
    )];
    if n_td == 0 || n_ar == 0 {
        notes.push("baseline priors are single-class; the guesser always answers that class".into());
    }
    Ok(EvalReport {
        confusion: pooled,
        td_row: report_rows.next().unwrap(),
        ar_row: report_rows.next().unwrap(),
        average_row: report_rows.next().unwrap(),
        fold_predictions: Vec::new(),
        notes,
    })
}

/// Per-run reports for the same protocol as [`weighted_random_baseline`].
/// Run `r` here is identical to run `r` of the averaged call.
pub fn weighted_random_baseline_runs(
    dataset: &Dataset,
    runs: u64,
    seed: u64,
) -> Result<Vec<EvalReport>> {
    if runs == 0 {
        return Err(Error::InvalidParam("baseline needs at least 1 run".into()));
    }
    baseline_priors(dataset)?;
    let order = dataset.id_sorted_indices();
    (0..runs)
        .map(|run| {
            let confusion = baseline_single_run(dataset, &order, mix(seed, run));
            let mut report = compute_report(confusion)?;
            report.notes.push(format!("baseline run {run} of {runs}"));
            Ok(report)
        })
        .collect()
}

/// Absolute gap between two average accuracies, in percentage points.
pub fn improvement_points(model_avg_accuracy: f64, baseline_avg_accuracy: f64) -> f64 {
    ((model_avg_accuracy - baseline_avg_accuracy) * 100.0).abs()
}

/// Gap between a model report and a baseline report: the absolute difference
/// of their average-row accuracies, in percentage points. Computed in exact
/// arithmetic and converted at the end.
pub fn improvement_over_baseline(model: &EvalReport, baseline: &EvalReport) -> f64 {
    let diff = (model.average_row.accuracy.rational()
        - baseline.average_row.accuracy.rational())
    .abs();
    let hundred = BigRational::from_integer(BigInt::from(100));
    Exact::from_rational(diff * hundred).as_f64()
}

/// Plain-text metric table: one row per class plus the weighted average,
/// three decimals, rounded half away from zero.
pub fn render_table(report: &EvalReport) -> String {
    let mut out = String::new();
    let line = |name: &str, row: &MetricRow| {
        format!(
            "{:<8}  {:>8}  {:>9}  {:>6}  {:>6}\n",
            name,
            row.accuracy.render_3dp(),
            row.precision.render_3dp(),
            row.recall.render_3dp(),
            row.f1.render_3dp(),
        )
    };
    out.push_str(&format!(
        "{:<8}  {:>8}  {:>9}  {:>6}  {:>6}\n",
        "Class", "Accuracy", "Precision", "Recall", "F1"
    ));
    out.push_str(&line("TD", &report.td_row));
    out.push_str(&line("AR", &report.ar_row));
    out.push_str(&line("Average", &report.average_row));
    out
}
