//! `select`: run one feature-selection method and save the mask.

use std::path::Path;

use motordev_core::learners::{LearnerFamily, LearnerSpec};
use motordev_core::select::{run_selector, SelectorKind, SelectorSpec};
use motordev_core::Result;

use crate::args::SelectArgs;
use crate::output::write_json;

use super::CommandOutcome;

pub fn execute(args: &SelectArgs, out: &Path) -> Result<CommandOutcome> {
    let dataset = super::load_input(&args.input)?;
    let method: SelectorKind = args.method.parse()?;
    let family: LearnerFamily = args.learner.parse()?;

    let mut selector = SelectorSpec::new(method);
    selector.k = args.k;
    selector.learner = LearnerSpec::defaults(family).with_seed(args.seed);
    selector.correlation_threshold = args.corr_threshold;

    let mask = run_selector(&dataset, &selector)?;

    let mut outcome = CommandOutcome::default();
    outcome.push(write_json(out, "mask.json", &mask)?);
    outcome.summary = Some(serde_json::json!({
        "method": mask.method().as_str(),
        "selected": mask.selected(),
    }));
    Ok(outcome)
}
