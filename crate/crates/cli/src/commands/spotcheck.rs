//! `spotcheck`: rank every learner family at default parameters.

use std::path::Path;

use motordev_core::ensemble::spot_check;
use motordev_core::select::FeatureMask;
use motordev_core::Result;

use crate::args::SpotcheckArgs;
use crate::output::{load_json, write_json, write_text};

use super::{full_mask, ranking_summary, ranking_tables, validate_mask, CommandOutcome};

pub fn execute(args: &SpotcheckArgs, out: &Path) -> Result<CommandOutcome> {
    let dataset = super::load_input(&args.input)?;
    let mask = match &args.mask {
        Some(path) => load_json::<FeatureMask>(path)?,
        None => full_mask(&dataset),
    };
    validate_mask(&dataset, &mask)?;

    let result = spot_check(&dataset, &mask, args.seed);

    let mut outcome = CommandOutcome::default();
    outcome.push(write_json(out, "spotcheck.json", &result)?);
    outcome.push(write_text(out, "spotcheck_table.txt", &ranking_tables(&result))?);
    outcome.summary = Some(serde_json::json!({ "ranking": ranking_summary(&result) }));
    Ok(outcome)
}
