//! `preprocess`: validate, optionally normalize, and band a raw CSV.

use std::path::Path;

use motordev_core::ingest::{normalize_by_awake_time, split_age_bands, write_csv};
use motordev_core::{AgeBand, Dataset, Result};
use serde::Serialize;

use crate::args::PreprocessArgs;
use crate::output::write_json;

use super::CommandOutcome;

/// Class counts per band, the machine-readable half of the split.
#[derive(Debug, Serialize)]
struct Census {
    input_records: usize,
    normalized: bool,
    bands: Vec<BandCensus>,
    discarded: usize,
}

#[derive(Debug, Serialize)]
struct BandCensus {
    band: String,
    records: usize,
    td: usize,
    ar: usize,
}

impl BandCensus {
    fn of(dataset: &Dataset) -> BandCensus {
        let (td, ar) = dataset.class_counts();
        BandCensus {
            band: dataset.band().as_str().to_string(),
            records: dataset.len(),
            td,
            ar,
        }
    }
}

fn band_file(band: AgeBand) -> String {
    format!("{}.csv", band.as_str())
}

pub fn execute(args: &PreprocessArgs, out: &Path) -> Result<CommandOutcome> {
    let mut dataset = super::load_input(&args.input)?;
    if args.normalize {
        dataset = normalize_by_awake_time(&dataset)?;
    }

    let mut outcome = CommandOutcome::default();
    let mut census = Census {
        input_records: dataset.len(),
        normalized: args.normalize,
        bands: Vec::new(),
        discarded: 0,
    };

    match args.band {
        Some(choice) => {
            // Re-banding validates every age against the requested band.
            let band = choice.to_band();
            let banded = Dataset::new(dataset.schema().clone(), dataset.records().to_vec(), band)?;
            let name = band_file(band);
            write_csv(&banded, &out.join(&name))?;
            outcome.push(out.join(&name));
            census.bands.push(BandCensus::of(&banded));
        }
        None => {
            let (young, old, rest) = split_age_bands(&dataset)?;
            for d in [&young, &old] {
                let name = band_file(d.band());
                write_csv(d, &out.join(&name))?;
                outcome.push(out.join(name));
            }
            write_csv(&rest, &out.join("discarded.csv"))?;
            outcome.push(out.join("discarded.csv"));
            census.bands.push(BandCensus::of(&young));
            census.bands.push(BandCensus::of(&old));
            census.discarded = rest.len();
        }
    }

    outcome.push(write_json(out, "census.json", &census)?);
    outcome.summary = Some(serde_json::to_value(&census)?);
    Ok(outcome)
}
