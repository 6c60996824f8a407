//! Model comparison and combination: default-parameter spot checks, grid
//! search, the top-3 majority-vote ensemble, and decision-tree export.
//!
//! Every comparison runs leave-one-out under the same mask and ranks by the
//! exact-rational key (average accuracy, AR recall, average F1), descending,
//! with the learner spec's canonical JSON as the final tiebreak. That makes rankings
//! a total order independent of enumeration order, so a rerun or a reordered
//! lattice serializes identically.

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::data::{ClassWeights, Dataset, Label};
use crate::error::{Error, Result};
use crate::eval::{compute_report, loocv, ConfusionMatrix, EvalReport, FoldPrediction, SelectionMode};
use crate::learners::tree::TreeNode;
use crate::learners::{fit, LearnerFamily, LearnerSpec, Model, ParamValue};
use crate::select::{run_selector, FeatureMask};

/// One evaluated grid cell: a spec plus either its report or the error that
/// stopped it. Errored cells stay in the ranking (last) so a sweep is never
/// silently missing a family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridEntry {
    pub spec: LearnerSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub report: Option<EvalReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl GridEntry {
    fn evaluated(dataset: &Dataset, mode: &SelectionMode, spec: LearnerSpec) -> GridEntry {
        match loocv(dataset, &spec, mode) {
            Ok(report) => GridEntry {
                spec,
                report: Some(report),
                error: None,
            },
            Err(e) => GridEntry {
                spec,
                report: None,
                error: Some(e.to_string()),
            },
        }
    }
}

/// Ranked evaluation results, best first.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub entries: Vec<GridEntry>,
}

fn spec_json(spec: &LearnerSpec) -> String {
    serde_json::to_string(spec).expect("LearnerSpec always serializes")
}

fn rank_entries(mut entries: Vec<GridEntry>) -> GridResult {
    entries.sort_by(|a, b| {
        match (&a.report, &b.report) {
            (Some(ra), Some(rb)) => {
                let ka = (
                    ra.average_row.accuracy.rational(),
                    ra.ar_row.recall.rational(),
                    ra.average_row.f1.rational(),
                );
                let kb = (
                    rb.average_row.accuracy.rational(),
                    rb.ar_row.recall.rational(),
                    rb.average_row.f1.rational(),
                );
                // Descending on the key, ascending on the serialized spec.
                kb.cmp(&ka)
                    .then_with(|| spec_json(&a.spec).cmp(&spec_json(&b.spec)))
            }
            (Some(_), None) => std::cmp::Ordering::Less,
            (None, Some(_)) => std::cmp::Ordering::Greater,
            (None, None) => spec_json(&a.spec).cmp(&spec_json(&b.spec)),
        }
    });
    GridResult { entries }
}

impl GridResult {
    pub fn best(&self) -> Option<&GridEntry> {
        self.entries.first()
    }

    /// The best-ranked evaluated entry of each family, in ranking order.
    pub fn family_leaders(&self) -> Vec<&GridEntry> {
        let mut seen = BTreeSet::new();
        self.entries
            .iter()
            .filter(|e| e.report.is_some() && seen.insert(e.spec.family().as_str()))
            .collect()
    }
}

/// Evaluates every family at its documented default parameters and ranks the
/// reports. A family whose evaluation fails is kept with the error attached.
pub fn spot_check(dataset: &Dataset, mask: &FeatureMask, seed: u64) -> GridResult {
    let mode = SelectionMode::MaskFixed { mask: mask.clone() };
    spot_check_mode(dataset, &mode, seed)
}

/// [`spot_check`] generalized over the feature-selection mode, so selection
/// can be re-run inside every fold instead of fixed up front.
pub fn spot_check_mode(dataset: &Dataset, mode: &SelectionMode, seed: u64) -> GridResult {
    let entries = LearnerFamily::ALL
        .iter()
        .map(|&family| {
            let spec = LearnerSpec::defaults(family).with_seed(seed);
            GridEntry::evaluated(dataset, mode, spec)
        })
        .collect();
    rank_entries(entries)
}

/// A parameter lattice for one family: the cross product of the axes. No
/// axes means a single cell with the family defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamGrid {
    pub family: LearnerFamily,
    pub axes: Vec<(String, Vec<ParamValue>)>,
}

impl ParamGrid {
    pub fn new(family: LearnerFamily) -> ParamGrid {
        ParamGrid {
            family,
            axes: Vec::new(),
        }
    }

    pub fn axis(mut self, key: &str, values: Vec<ParamValue>) -> ParamGrid {
        self.axes.push((key.to_string(), values));
        self
    }

    /// All specs in the lattice. Axis values vary fastest on the last axis,
    /// but ranking never depends on this enumeration order.
    fn specs(&self, seed: u64) -> Result<Vec<LearnerSpec>> {
        for (key, values) in &self.axes {
            if values.is_empty() {
                return Err(Error::InvalidParam(format!(
                    "grid axis `{key}` for {} has no values",
                    self.family
                )));
            }
        }
        let mut specs = vec![LearnerSpec::defaults(self.family).with_seed(seed)];
        for (key, values) in &self.axes {
            let mut next = Vec::with_capacity(specs.len() * values.len());
            for spec in &specs {
                for value in values {
                    next.push(spec.clone().with_param(key, value.clone())?);
                }
            }
            specs = next;
        }
        Ok(specs)
    }
}

/// Exhaustive leave-one-out evaluation of each family's parameter lattice,
/// ranked across all cells of all families.
pub fn grid_search(
    dataset: &Dataset,
    mask: &FeatureMask,
    grids: &[ParamGrid],
    seed: u64,
) -> Result<GridResult> {
    let mode = SelectionMode::MaskFixed { mask: mask.clone() };
    grid_search_mode(dataset, &mode, grids, seed)
}

/// [`grid_search`] generalized over the feature-selection mode.
pub fn grid_search_mode(
    dataset: &Dataset,
    mode: &SelectionMode,
    grids: &[ParamGrid],
    seed: u64,
) -> Result<GridResult> {
    if grids.is_empty() {
        return Err(Error::InvalidParam("grid search needs at least one lattice".into()));
    }
    let mut entries = Vec::new();
    for grid in grids {
        for spec in grid.specs(seed)? {
            entries.push(GridEntry::evaluated(dataset, mode, spec));
        }
    }
    Ok(rank_entries(entries))
}

/// The default search lattices: small log-spaced grids sized for datasets of
/// a few dozen records.
pub fn default_grids() -> Vec<ParamGrid> {
    let floats = |v: &[f64]| v.iter().map(|&x| ParamValue::Float(x)).collect::<Vec<_>>();
    let ints = |v: &[i64]| v.iter().map(|&x| ParamValue::Int(x)).collect::<Vec<_>>();
    vec![
        ParamGrid::new(LearnerFamily::Svm)
            .axis("c", floats(&[0.01, 0.1, 1.0, 10.0, 100.0]))
            .axis(
                "kernel",
                vec![
                    ParamValue::Text("linear".into()),
                    ParamValue::Text("rbf".into()),
                ],
            )
            .axis(
                "gamma",
                vec![
                    ParamValue::Float(0.01),
                    ParamValue::Float(0.1),
                    ParamValue::Text("auto".into()),
                    ParamValue::Float(1.0),
                ],
            ),
        ParamGrid::new(LearnerFamily::LogisticRegression)
            .axis("lambda", floats(&[0.001, 0.01, 0.1, 1.0, 10.0, 100.0])),
        ParamGrid::new(LearnerFamily::Knn).axis("k", ints(&[1, 3, 5, 7, 9])),
        // max_depth 0 means unlimited.
        ParamGrid::new(LearnerFamily::DecisionTree)
            .axis("max_depth", ints(&[1, 2, 3, 0]))
            .axis("pruning_confidence", floats(&[0.1, 0.25, 0.5])),
        ParamGrid::new(LearnerFamily::RandomForest).axis("trees", ints(&[50, 100, 200])),
        ParamGrid::new(LearnerFamily::Adaboost).axis("rounds", ints(&[25, 50, 100])),
    ]
}

/// Three specs of three distinct families that vote by simple majority. The
/// odd count means a binary vote can never tie.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawEnsemble")]
pub struct EnsembleSpec {
    members: Vec<LearnerSpec>,
}

#[derive(Deserialize)]
struct RawEnsemble {
    members: Vec<LearnerSpec>,
}

impl TryFrom<RawEnsemble> for EnsembleSpec {
    type Error = Error;

    fn try_from(raw: RawEnsemble) -> Result<EnsembleSpec> {
        EnsembleSpec::new(raw.members)
    }
}

impl EnsembleSpec {
    pub fn new(members: Vec<LearnerSpec>) -> Result<EnsembleSpec> {
        if members.len() != 3 {
            return Err(Error::InvalidParam(format!(
                "ensemble needs exactly 3 members, got {}",
                members.len()
            )));
        }
        let families: BTreeSet<&str> = members.iter().map(|m| m.family().as_str()).collect();
        if families.len() != 3 {
            return Err(Error::InvalidParam(
                "ensemble members must come from distinct families".into(),
            ));
        }
        Ok(EnsembleSpec { members })
    }

    pub fn members(&self) -> &[LearnerSpec] {
        &self.members
    }
}

/// Takes the best spec from each of the top three distinct families in the
/// ranking. A family's lower-ranked cells never block the next family.
pub fn build_ensemble(grid: &GridResult) -> Result<EnsembleSpec> {
    let leaders = grid.family_leaders();
    if leaders.len() < 3 {
        return Err(Error::InvalidParam(format!(
            "ensemble needs 3 distinct families with reports, ranking has {}",
            leaders.len()
        )));
    }
    EnsembleSpec::new(leaders.iter().take(3).map(|e| e.spec.clone()).collect())
}

/// Majority vote over an odd number of member specs, evaluated by
/// leave-one-out with every member retrained on each fold.
///
/// Folds whose training split is single-class are skipped with a note, the
/// same as single-model evaluation. Member fit errors abort the evaluation:
/// a vote with a missing member would silently change the quorum.
pub fn evaluate_members(
    dataset: &Dataset,
    mask: &FeatureMask,
    members: &[LearnerSpec],
) -> Result<EvalReport> {
    let mode = SelectionMode::MaskFixed { mask: mask.clone() };
    evaluate_members_mode(dataset, &mode, members)
}

/// [`evaluate_members`] generalized over the feature-selection mode. In
/// per-fold mode one mask is selected per fold and shared by all members,
/// so the vote compares learners on equal footing.
pub fn evaluate_members_mode(
    dataset: &Dataset,
    mode: &SelectionMode,
    members: &[LearnerSpec],
) -> Result<EvalReport> {
    if members.is_empty() || members.len() % 2 == 0 {
        return Err(Error::InvalidParam(format!(
            "majority voting needs an odd number of members, got {}",
            members.len()
        )));
    }
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
    let mut notes = vec![format!(
        "majority vote over: {}",
        members.iter().map(|m| m.id()).collect::<Vec<_>>().join(", ")
    )];
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
        let fold_mask = match mode {
            SelectionMode::MaskFixed { mask } => mask.clone(),
            SelectionMode::SelectPerFold { selector } => run_selector(&train, selector)?,
        };
        let mut ar_votes = 0usize;
        for member in members {
            let model = fit(&train, &fold_mask, &weights, member)?;
            if model.predict_record(dataset, held)? == Label::Ar {
                ar_votes += 1;
            }
        }
        let predicted = if 2 * ar_votes > members.len() {
            Label::Ar
        } else {
            Label::Td
        };
        let actual = dataset.records()[held].label;
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

/// Leave-one-out evaluation of a validated three-member ensemble.
pub fn evaluate_ensemble(
    dataset: &Dataset,
    mask: &FeatureMask,
    ensemble: &EnsembleSpec,
) -> Result<EvalReport> {
    evaluate_members(dataset, mask, ensemble.members())
}

/// [`evaluate_ensemble`] generalized over the feature-selection mode.
pub fn evaluate_ensemble_mode(
    dataset: &Dataset,
    mode: &SelectionMode,
    ensemble: &EnsembleSpec,
) -> Result<EvalReport> {
    evaluate_members_mode(dataset, mode, ensemble.members())
}

/// Output format for decision-tree export.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExportFormat {
    Text,
    Dot,
}

impl FromStr for ExportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<ExportFormat> {
        match s.trim().to_ascii_lowercase().as_str() {
            "text" => Ok(ExportFormat::Text),
            "dot" => Ok(ExportFormat::Dot),
            other => Err(Error::InvalidParam(format!(
                "unknown export format `{other}` (expected text or dot)"
            ))),
        }
    }
}

impl fmt::Display for ExportFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ExportFormat::Text => "text",
            ExportFormat::Dot => "dot",
        })
    }
}

/// Renders a decision-tree model. Only single trees export; a forest caller
/// picks one member via [`crate::learners::forest::ForestModel::trees`] and
/// uses [`export_tree_node`].
pub fn export_tree(model: &Model, format: ExportFormat) -> Result<String> {
    let root = model.as_tree().ok_or_else(|| {
        Error::Export(format!(
            "cannot export a {} model as a tree",
            model.family()
        ))
    })?;
    Ok(export_tree_node(root, format))
}

/// Renders any tree root, including a single tree extracted from a forest.
pub fn export_tree_node(root: &TreeNode, format: ExportFormat) -> String {
    match format {
        ExportFormat::Text => {
            let mut out = String::new();
            render_text(root, 0, &mut out);
            out
        }
        ExportFormat::Dot => {
            let mut out = String::from("digraph tree {\n  node [shape=box];\n");
            let mut counter = 0usize;
            render_dot(root, &mut counter, &mut out);
            out.push_str("}\n");
            out
        }
    }
}

fn render_text(node: &TreeNode, indent: usize, out: &mut String) {
    let pad = "  ".repeat(indent);
    match node {
        TreeNode::Leaf {
            label,
            td_weight,
            ar_weight,
        } => {
            out.push_str(&format!(
                "{pad}leaf: {} (w={td_weight}/{ar_weight})\n",
                label.as_str()
            ));
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            out.push_str(&format!("{pad}{feature} <= {threshold}\n"));
            render_text(left, indent + 1, out);
            out.push_str(&format!("{pad}{feature} > {threshold}\n"));
            render_text(right, indent + 1, out);
        }
    }
}

fn render_dot(node: &TreeNode, counter: &mut usize, out: &mut String) -> usize {
    let id = *counter;
    *counter += 1;
    match node {
        TreeNode::Leaf {
            label,
            td_weight,
            ar_weight,
        } => {
            out.push_str(&format!(
                "  n{id} [label=\"{} (w={td_weight}/{ar_weight})\"];\n",
                label.as_str()
            ));
        }
        TreeNode::Split {
            feature,
            threshold,
            left,
            right,
            ..
        } => {
            out.push_str(&format!("  n{id} [label=\"{feature} <= {threshold}\"];\n"));
            let l = render_dot(left, counter, out);
            let r = render_dot(right, counter, out);
            out.push_str(&format!("  n{id} -> n{l} [label=\"<=\"];\n"));
            out.push_str(&format!("  n{id} -> n{r} [label=\">\"];\n"));
        }
    }
    id
}

/// Parses the text export back into a tree. Feature names resolve to column
/// indices through `feature_names`, in mask order, so a parsed tree predicts
/// on the same masked rows as the original.
pub fn parse_tree_text(text: &str, feature_names: &[String]) -> Result<TreeNode> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .filter(|l| !l.trim().is_empty())
        .map(|l| {
            let trimmed = l.trim_start();
            let indent = (l.len() - trimmed.len()) / 2;
            (indent, trimmed.trim_end())
        })
        .collect();
    if lines.is_empty() {
        return Err(Error::Export("empty tree text".into()));
    }
    let mut pos = 0usize;
    let root = parse_node(&lines, &mut pos, 0, feature_names)?;
    if pos != lines.len() {
        return Err(Error::Export(format!(
            "trailing tree text from line {}",
            pos + 1
        )));
    }
    Ok(root)
}

fn parse_node(
    lines: &[(usize, &str)],
    pos: &mut usize,
    indent: usize,
    names: &[String],
) -> Result<TreeNode> {
    let bad = |msg: String| Error::Export(msg);
    let (line_indent, line) = lines
        .get(*pos)
        .copied()
        .ok_or_else(|| bad("unexpected end of tree text".into()))?;
    if line_indent != indent {
        return Err(bad(format!(
            "line {}: expected indent {indent}, found {line_indent}",
            *pos + 1
        )));
    }
    *pos += 1;
    if let Some(rest) = line.strip_prefix("leaf: ") {
        let (label_str, weights) = rest
            .split_once(" (w=")
            .ok_or_else(|| bad(format!("malformed leaf line `{line}`")))?;
        let label = Label::parse(label_str)
            .map_err(|_| bad(format!("unknown leaf label `{label_str}`")))?;
        let weights = weights
            .strip_suffix(')')
            .ok_or_else(|| bad(format!("malformed leaf weights in `{line}`")))?;
        let (td, ar) = weights
            .split_once('/')
            .ok_or_else(|| bad(format!("malformed leaf weights in `{line}`")))?;
        let td_weight: f64 = td
            .parse()
            .map_err(|_| bad(format!("bad TD weight `{td}`")))?;
        let ar_weight: f64 = ar
            .parse()
            .map_err(|_| bad(format!("bad AR weight `{ar}`")))?;
        return Ok(TreeNode::Leaf {
            label,
            td_weight,
            ar_weight,
        });
    }
    let (feature, threshold_str) = line
        .split_once(" <= ")
        .ok_or_else(|| bad(format!("expected a split condition, got `{line}`")))?;
    let threshold: f64 = threshold_str
        .parse()
        .map_err(|_| bad(format!("bad threshold `{threshold_str}`")))?;
    let feature_index = names
        .iter()
        .position(|n| n == feature)
        .ok_or_else(|| Error::MissingColumn(feature.to_string()))?;
    let left = parse_node(lines, pos, indent + 1, names)?;
    let (mirror_indent, mirror) = lines
        .get(*pos)
        .copied()
        .ok_or_else(|| bad("missing `>` branch".into()))?;
    let expected = format!("{feature} > {threshold_str}");
    if mirror_indent != indent || mirror != expected {
        return Err(bad(format!(
            "line {}: expected `{expected}`, got `{mirror}`",
            *pos + 1
        )));
    }
    *pos += 1;
    let right = parse_node(lines, pos, indent + 1, names)?;
    Ok(TreeNode::Split {
        feature: feature.to_string(),
        feature_index,
        threshold,
        left: Box::new(left),
        right: Box::new(right),
    })
}
