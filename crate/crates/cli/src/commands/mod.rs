//! One module per subcommand, plus the pieces they share.

use std::path::{Path, PathBuf};

use motordev_core::ensemble::GridResult;
use motordev_core::eval::render_table;
use motordev_core::ingest::{load_csv, SchemaMode};
use motordev_core::select::FeatureMask;
use motordev_core::{Dataset, Error, Result};
use serde_json::Value;

pub mod baseline;
pub mod export_tree;
pub mod preprocess;
pub mod run;
pub mod select;
pub mod spotcheck;
pub mod synth;

/// What a command produced: the files it wrote and a short machine-readable
/// summary for the manifest.
#[derive(Debug, Default)]
pub struct CommandOutcome {
    pub outputs: Vec<PathBuf>,
    pub summary: Option<Value>,
}

impl CommandOutcome {
    pub fn push(&mut self, path: PathBuf) {
        self.outputs.push(path);
    }

    /// Output file names relative to the output directory, in the order
    /// they were written.
    pub fn output_names(&self) -> Vec<String> {
        self.outputs
            .iter()
            .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
            .collect()
    }
}

/// Loads a labeled input CSV. The loader validates schema, cell values, and
/// non-emptiness, so commands downstream can assume a well-formed table.
pub fn load_input(path: &Path) -> Result<Dataset> {
    load_csv(path, SchemaMode::Auto)
}

/// Mask to use when no `--mask` is given: every feature, in schema order.
pub fn full_mask(dataset: &Dataset) -> FeatureMask {
    FeatureMask::manual(dataset.schema().names().to_vec())
}

/// Rejects a mask that is empty or names columns the dataset lacks, before
/// it gets buried inside per-fold fit errors.
pub fn validate_mask(dataset: &Dataset, mask: &FeatureMask) -> Result<()> {
    if mask.is_empty() {
        return Err(Error::InvalidParam("mask selects no features".into()));
    }
    for name in mask.selected() {
        if dataset.schema().index_of(name).is_none() {
            return Err(Error::MissingColumn(name.clone()));
        }
    }
    Ok(())
}

/// Human-readable ranking: one header and metric table (or error) per entry.
pub fn ranking_tables(result: &GridResult) -> String {
    let mut text = String::new();
    for (rank, entry) in result.entries.iter().enumerate() {
        text.push_str(&format!("# {}. {}\n", rank + 1, entry.spec.id()));
        match (&entry.report, &entry.error) {
            (Some(report), _) => text.push_str(&render_table(report)),
            (None, Some(error)) => text.push_str(&format!("evaluation failed: {error}\n")),
            (None, None) => text.push_str("not evaluated\n"),
        }
        text.push('\n');
    }
    text
}

/// Compact ranking summary for manifests: id and average accuracy (or the
/// error) per entry, in rank order.
pub fn ranking_summary(result: &GridResult) -> Value {
    let rows: Vec<Value> = result
        .entries
        .iter()
        .map(|entry| match (&entry.report, &entry.error) {
            (Some(report), _) => serde_json::json!({
                "id": entry.spec.id(),
                "average_accuracy": report.average_row.accuracy.as_f64(),
            }),
            (None, error) => serde_json::json!({
                "id": entry.spec.id(),
                "error": error.clone().unwrap_or_else(|| "not evaluated".into()),
            }),
        })
        .collect();
    Value::Array(rows)
}
