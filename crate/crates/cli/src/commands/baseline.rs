//! `baseline`: the weighted-random chance reference.

use std::path::Path;

use motordev_core::eval::{
    render_table, weighted_random_baseline, weighted_random_baseline_runs, EvalReport,
};
use motordev_core::Result;
use serde::Serialize;

use crate::args::BaselineArgs;
use crate::output::{write_json, write_text};

use super::CommandOutcome;

#[derive(Debug, Serialize)]
struct BaselineFile<'a> {
    runs: u64,
    seed: u64,
    report: &'a EvalReport,
    /// Average-row accuracy of each run, in run order; the report above
    /// averages these exactly.
    per_run_average_accuracy: Vec<f64>,
}

pub fn execute(args: &BaselineArgs, out: &Path) -> Result<CommandOutcome> {
    let dataset = super::load_input(&args.input)?;
    let report = weighted_random_baseline(&dataset, args.runs, args.seed)?;
    let per_run: Vec<f64> = weighted_random_baseline_runs(&dataset, args.runs, args.seed)?
        .iter()
        .map(|r| r.average_row.accuracy.as_f64())
        .collect();

    let mut outcome = CommandOutcome::default();
    outcome.push(write_json(
        out,
        "baseline.json",
        &BaselineFile {
            runs: args.runs,
            seed: args.seed,
            report: &report,
            per_run_average_accuracy: per_run,
        },
    )?);
    outcome.push(write_text(out, "baseline_table.txt", &render_table(&report))?);
    outcome.summary = Some(serde_json::json!({
        "runs": args.runs,
        "average_accuracy": report.average_row.accuracy.as_f64(),
    }));
    Ok(outcome)
}
