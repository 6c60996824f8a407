//! `export-tree`: fit a tree-based model on the whole table and write its
//! structure out as indented text and Graphviz DOT.

use std::path::Path;

use motordev_core::ensemble::{export_tree_node, ExportFormat};
use motordev_core::learners::tree::TreeNode;
use motordev_core::learners::{fit, LearnerFamily, LearnerSpec, Model};
use motordev_core::select::FeatureMask;
use motordev_core::{ClassWeights, Error, Result};

use crate::args::{ExportFormatArg, ExportTreeArgs};
use crate::output::{load_json, write_text};

use super::{full_mask, validate_mask, CommandOutcome};

/// The exportable root: a tree's own root, or the first tree of a forest.
pub fn exportable_root(model: &Model) -> Result<&TreeNode> {
    if let Some(root) = model.as_tree() {
        return Ok(root);
    }
    if let Some(forest) = model.as_forest() {
        return forest
            .trees()
            .first()
            .ok_or_else(|| Error::Export("forest has no trees".into()));
    }
    Err(Error::InvalidParam(format!(
        "export needs a decision_tree or random_forest model, got `{}`",
        model.family()
    )))
}

pub fn execute(args: &ExportTreeArgs, out: &Path) -> Result<CommandOutcome> {
    let dataset = super::load_input(&args.input)?;
    let mask = match &args.mask {
        Some(path) => load_json::<FeatureMask>(path)?,
        None => full_mask(&dataset),
    };
    validate_mask(&dataset, &mask)?;

    let mut spec = match &args.spec {
        Some(path) => load_json::<LearnerSpec>(path)?,
        None => LearnerSpec::defaults(LearnerFamily::DecisionTree),
    };
    match spec.family() {
        LearnerFamily::DecisionTree | LearnerFamily::RandomForest => {}
        other => {
            return Err(Error::InvalidParam(format!(
                "export needs a decision_tree or random_forest spec, got `{other}`"
            )))
        }
    }
    if let Some(seed) = args.seed {
        spec = spec.with_seed(seed);
    }

    let weights = ClassWeights::balanced(&dataset)?;
    let model = fit(&dataset, &mask, &weights, &spec)?;
    let root = exportable_root(&model)?;

    let mut outcome = CommandOutcome::default();
    if matches!(args.format, ExportFormatArg::Text | ExportFormatArg::Both) {
        outcome.push(write_text(out, "tree.txt", &export_tree_node(root, ExportFormat::Text))?);
    }
    if matches!(args.format, ExportFormatArg::Dot | ExportFormatArg::Both) {
        outcome.push(write_text(out, "tree.dot", &export_tree_node(root, ExportFormat::Dot))?);
    }
    outcome.summary = Some(serde_json::json!({
        "family": spec.family().as_str(),
        "depth": root.depth(),
        "leaves": root.leaf_count(),
    }));
    Ok(outcome)
}
