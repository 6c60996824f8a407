//! CSV ingest, awake-time normalization, and age-band splitting.
//!
//! Input files carry one visit per row. Required columns: `infant_id`,
//! `visit_index`, `age_months`, `label`. Optional metadata: `aims_score`,
//! `awake_hours`. Every other column is a feature, taken in header order.
//! Movement volume may arrive either as raw totals (`total_movements_*`,
//! which require `awake_hours`) or as pre-normalized per-hour rates.
//!
//! Values are validated at the door and rejected with the row and column
//! named; there is no imputation. See `docs/data-format.md` for the format
//! contract.

use std::path::Path;

use crate::data::{AgeBand, Dataset, FeatureKind, FeatureSchema, Label, SampleRecord};
use crate::error::{Error, Result};

/// How `load_csv` decides the feature schema.
pub enum SchemaMode {
    /// Derive names from the header and kinds from name heuristics.
    Auto,
    /// Require exactly these features to be present; extra feature columns
    /// are ignored.
    Explicit(FeatureSchema),
}

const META_COLUMNS: [&str; 6] = [
    "infant_id",
    "visit_index",
    "age_months",
    "label",
    "aims_score",
    "awake_hours",
];

struct HeaderLayout {
    infant_id: usize,
    visit_index: usize,
    age_months: usize,
    label: usize,
    aims_score: Option<usize>,
    awake_hours: Option<usize>,
    /// (column index in file, slot in schema)
    features: Vec<(usize, usize)>,
    schema: FeatureSchema,
}

fn layout(header: &csv::StringRecord, mode: &SchemaMode) -> Result<HeaderLayout> {
    let names: Vec<String> = header
        .iter()
        .map(|h| h.trim().to_ascii_lowercase())
        .collect();
    let find = |want: &str| names.iter().position(|n| n == want);
    let require = |want: &str| find(want).ok_or_else(|| Error::MissingColumn(want.into()));

    let (schema, features) = match mode {
        SchemaMode::Auto => {
            let mut feat_names = Vec::new();
            let mut kinds = Vec::new();
            let mut features = Vec::new();
            for (col, name) in names.iter().enumerate() {
                if META_COLUMNS.contains(&name.as_str()) {
                    continue;
                }
                if name.is_empty() {
                    return Err(Error::Schema(format!("empty header in column {}", col + 1)));
                }
                features.push((col, feat_names.len()));
                kinds.push(FeatureSchema::infer_kind(name));
                feat_names.push(name.clone());
            }
            if feat_names.is_empty() {
                return Err(Error::Schema("no feature columns in header".into()));
            }
            (FeatureSchema::new(feat_names, kinds)?, features)
        }
        SchemaMode::Explicit(schema) => {
            let mut features = Vec::new();
            for (slot, name) in schema.names().iter().enumerate() {
                let col = require(name)?;
                features.push((col, slot));
            }
            (schema.clone(), features)
        }
    };

    // Raw counts are meaningless without the denominator.
    if schema.kinds().contains(&FeatureKind::Count) && find("awake_hours").is_none() {
        return Err(Error::MissingColumn("awake_hours".into()));
    }

    Ok(HeaderLayout {
        infant_id: require("infant_id")?,
        visit_index: require("visit_index")?,
        age_months: require("age_months")?,
        label: require("label")?,
        aims_score: find("aims_score"),
        awake_hours: find("awake_hours"),
        features,
        schema,
    })
}

/// Loads a visit CSV into an unbanded [`Dataset`].
///
/// Errors name the 1-based data row and the column, e.g.
/// `row 3, column `mean_duration_l`: not a number`.
pub fn load_csv(path: &Path, mode: SchemaMode) -> Result<Dataset> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)?;
    let layout = layout(reader.headers()?, &mode)?;

    let mut records = Vec::new();
    for (i, row) in reader.records().enumerate() {
        let row = row?;
        let rownum = i + 1;
        records.push(parse_row(&layout, &row, rownum)?);
    }
    if records.is_empty() {
        return Err(Error::DegenerateDataset(format!(
            "{} has a header but no data rows",
            path.display()
        )));
    }
    Dataset::new(layout.schema, records, AgeBand::Unbanded)
}

fn parse_row(layout: &HeaderLayout, row: &csv::StringRecord, rownum: usize) -> Result<SampleRecord> {
    let cell = |col: usize, name: &str| -> Result<&str> {
        row.get(col).ok_or_else(|| Error::CsvCell {
            row: rownum,
            column: name.into(),
            message: "missing cell".into(),
        })
    };
    let bad = |name: &str, message: String| Error::CsvCell {
        row: rownum,
        column: name.into(),
        message,
    };
    let number = |col: usize, name: &str| -> Result<f64> {
        let raw = cell(col, name)?;
        raw.parse::<f64>()
            .map_err(|_| bad(name, format!("`{raw}` is not a number")))
    };
    let optional = |col: Option<usize>, name: &str| -> Result<Option<f64>> {
        match col {
            None => Ok(None),
            Some(c) => {
                let raw = cell(c, name)?;
                if raw.is_empty() {
                    Ok(None)
                } else {
                    raw.parse::<f64>()
                        .map(Some)
                        .map_err(|_| bad(name, format!("`{raw}` is not a number")))
                }
            }
        }
    };

    let infant_id = cell(layout.infant_id, "infant_id")?.to_string();
    if infant_id.is_empty() {
        return Err(bad("infant_id", "empty id".into()));
    }
    let visit_raw = cell(layout.visit_index, "visit_index")?;
    let visit_index: u32 = visit_raw
        .parse()
        .map_err(|_| bad("visit_index", format!("`{visit_raw}` is not a positive integer")))?;
    let age_months = number(layout.age_months, "age_months")?;
    let label = Label::parse(cell(layout.label, "label")?)
        .map_err(|e| bad("label", e.to_string()))?;
    let aims_score = optional(layout.aims_score, "aims_score")?;
    let awake_hours = optional(layout.awake_hours, "awake_hours")?;
    if let Some(h) = awake_hours {
        if !h.is_finite() || h <= 0.0 {
            return Err(bad("awake_hours", format!("{h} must be positive")));
        }
    }

    let mut features = vec![0.0; layout.schema.len()];
    for &(col, slot) in &layout.features {
        let name = &layout.schema.names()[slot];
        let raw = cell(col, name)?;
        if raw.is_empty() {
            return Err(bad(name, "missing value (no imputation is performed)".into()));
        }
        let v: f64 = raw
            .parse()
            .map_err(|_| bad(name, format!("`{raw}` is not a number")))?;
        features[slot] = v;
    }

    Ok(SampleRecord {
        infant_id,
        visit_index,
        age_months,
        label,
        aims_score,
        awake_hours,
        features,
    })
}

/// Writes a dataset back to CSV in the stable column order:
/// metadata first, then features in schema order.
///
/// Floats are printed with the shortest round-trip representation, so
/// load -> write -> load is lossless and the bytes are stable across runs.
pub fn write_csv(dataset: &Dataset, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = META_COLUMNS.iter().map(|s| s.to_string()).collect();
    header.extend(dataset.schema().names().iter().cloned());
    w.write_record(&header)?;

    for rec in dataset.records() {
        let mut row: Vec<String> = vec![
            rec.infant_id.clone(),
            rec.visit_index.to_string(),
            format!("{}", rec.age_months),
            rec.label.as_str().to_string(),
            rec.aims_score.map(|v| format!("{v}")).unwrap_or_default(),
            rec.awake_hours.map(|v| format!("{v}")).unwrap_or_default(),
        ];
        row.extend(rec.features.iter().map(|v| format!("{v}")));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

/// Divides every `Count` feature by the record's awake hours, turning totals
/// into per-hour rates. `total_movements` columns are renamed to their
/// `movements_per_awake_hour` form so the output schema is in rate terms.
///
/// Datasets with no `Count` features pass through unchanged, which makes the
/// operation idempotent.
pub fn normalize_by_awake_time(dataset: &Dataset) -> Result<Dataset> {
    let count_slots: Vec<usize> = dataset
        .schema()
        .kinds()
        .iter()
        .enumerate()
        .filter(|(_, k)| **k == FeatureKind::Count)
        .map(|(j, _)| j)
        .collect();
    if count_slots.is_empty() {
        return Ok(dataset.clone());
    }

    let mut names = dataset.schema().names().to_vec();
    let mut kinds = dataset.schema().kinds().to_vec();
    for &j in &count_slots {
        if names[j].contains("total_movements") {
            names[j] = names[j].replace("total_movements", "movements_per_awake_hour");
        }
        kinds[j] = FeatureKind::Rate;
    }
    let schema = FeatureSchema::new(names, kinds)?;

    let mut records = dataset.records().to_vec();
    for rec in &mut records {
        let hours = match rec.awake_hours {
            Some(h) if h > 0.0 => h,
            _ => {
                return Err(Error::Record {
                    record: rec.id().to_string(),
                    message: "cannot normalize counts without positive awake_hours".into(),
                })
            }
        };
        for &j in &count_slots {
            rec.features[j] /= hours;
        }
    }
    Dataset::new(schema, records, dataset.band())
}

/// Partitions an unbanded dataset into `[0, 6)`, `[6, 12]`, and a discarded
/// remainder of visits older than 12 months. The three parts are disjoint
/// and jointly exhaustive.
pub fn split_age_bands(dataset: &Dataset) -> Result<(Dataset, Dataset, Dataset)> {
    if dataset.band() != AgeBand::Unbanded {
        return Err(Error::InvalidParam(
            "split_age_bands expects an unbanded dataset".into(),
        ));
    }
    let mut young = Vec::new();
    let mut old = Vec::new();
    let mut discarded = Vec::new();
    for rec in dataset.records() {
        if rec.age_months < 6.0 {
            young.push(rec.clone());
        } else if rec.age_months <= 12.0 {
            old.push(rec.clone());
        } else {
            discarded.push(rec.clone());
        }
    }
    Ok((
        Dataset::new(dataset.schema().clone(), young, AgeBand::ZeroToSix)?,
        Dataset::new(dataset.schema().clone(), old, AgeBand::SixToTwelve)?,
        Dataset::new(dataset.schema().clone(), discarded, AgeBand::Unbanded)?,
    ))
}
