//! `synth`: generate a labeled synthetic dataset.

use std::path::Path;

use motordev_core::ingest::write_csv;
use motordev_core::synth::{census_fixture, generate, GeneratorProfile};
use motordev_core::{Error, Result};

use crate::args::SynthArgs;
use crate::output::load_json;

use super::CommandOutcome;

pub fn execute(args: &SynthArgs, out: &Path) -> Result<CommandOutcome> {
    let dataset = match (&args.profile, args.band) {
        (Some(path), _) => generate(&load_json::<GeneratorProfile>(path)?)?,
        (None, Some(band)) => census_fixture(band.to_band(), args.separation, args.seed)?,
        (None, None) => {
            // clap enforces this; kept for programmatic callers.
            return Err(Error::InvalidParam(
                "synth needs either --profile or --band".into(),
            ));
        }
    };

    let path = out.join("synth.csv");
    write_csv(&dataset, &path)?;

    let (td, ar) = dataset.class_counts();
    let mut outcome = CommandOutcome::default();
    outcome.push(path);
    outcome.summary = Some(serde_json::json!({
        "band": dataset.band().as_str(),
        "records": dataset.len(),
        "td": td,
        "ar": ar,
    }));
    Ok(outcome)
}
