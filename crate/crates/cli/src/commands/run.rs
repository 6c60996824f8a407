//! `run`: the full pipeline. Chance baseline, hyperparameter grid search,
//! per-family reports, optional top-3 ensemble, improvement summary, and
//! tree exports, all from one seeded, reproducible invocation.

use std::path::{Path, PathBuf};

use motordev_core::ensemble::{
    build_ensemble, default_grids, evaluate_members_mode, export_tree_node, grid_search_mode,
    ExportFormat, GridEntry, ParamGrid,
};
use motordev_core::eval::{
    improvement_over_baseline, render_table, weighted_random_baseline, EvalReport, SelectionMode,
};
use motordev_core::ingest::normalize_by_awake_time;
use motordev_core::learners::{fit, LearnerFamily, LearnerSpec, ParamValue};
use motordev_core::select::{
    run_selector, FeatureMask, SelectionMethod, SelectorKind, SelectorSpec,
};
use motordev_core::{ClassWeights, Dataset, Error, Result};
use serde::Serialize;

use crate::args::{BandChoice, Leakage, RunArgs, RunConfig};
use crate::output::{load_json, write_json, write_text};

use super::export_tree::exportable_root;
use super::{full_mask, ranking_summary, ranking_tables, validate_mask, CommandOutcome};

/// Effective `run` options after merging flags over the config file.
/// This is what the manifest records; the output directory is excluded so
/// reruns into different directories stay byte-identical.
#[derive(Debug, Serialize)]
pub struct ResolvedRun {
    pub input: PathBuf,
    pub band: Option<BandChoice>,
    pub normalize: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub selection: Option<SelectorSpec>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mask: Option<PathBuf>,
    pub leakage: Leakage,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub grids: Option<PathBuf>,
    pub ensemble: bool,
    pub baseline_runs: u64,
    pub baseline_only: bool,
    pub seed: u64,
    pub threads: usize,
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// Builds the in-pipeline selector from flags, or from the config block with
/// flag-level overrides applied.
fn resolve_selection(args: &RunArgs, config: &RunConfig, seed: u64) -> Result<Option<SelectorSpec>> {
    let has_mods =
        args.k.is_some() || args.corr_threshold.is_some() || args.select_learner.is_some();
    if let Some(method) = &args.method {
        let mut selector = SelectorSpec::new(method.parse::<SelectorKind>()?);
        if let Some(k) = args.k {
            selector.k = k;
        }
        let family = match &args.select_learner {
            Some(name) => name.parse()?,
            None => LearnerFamily::LogisticRegression,
        };
        selector.learner = LearnerSpec::defaults(family).with_seed(seed);
        selector.correlation_threshold = args.corr_threshold;
        return Ok(Some(selector));
    }
    match (&config.selection, has_mods) {
        (Some(block), _) => {
            let mut selector = block.clone();
            if let Some(k) = args.k {
                selector.k = k;
            }
            if let Some(t) = args.corr_threshold {
                selector.correlation_threshold = Some(t);
            }
            if let Some(name) = &args.select_learner {
                selector.learner = LearnerSpec::defaults(name.parse()?).with_seed(seed);
            }
            Ok(Some(selector))
        }
        (None, true) => Err(Error::InvalidParam(
            "--k/--corr-threshold/--select-learner need --method or a config `selection` block"
                .into(),
        )),
        (None, false) => Ok(None),
    }
}

/// Merges flags over the optional config file into one effective request.
pub fn resolve_run(args: &RunArgs) -> Result<ResolvedRun> {
    let config: RunConfig = match &args.config {
        Some(path) => load_json(path)?,
        None => RunConfig::default(),
    };

    let input = args
        .input
        .clone()
        .or_else(|| config.input.clone())
        .ok_or_else(|| Error::InvalidParam("run needs --input or a config `input`".into()))?;
    let seed = args.seed.or(config.seed).unwrap_or(0);
    let threads = args.threads.or(config.threads).unwrap_or(1);
    if threads == 0 {
        return Err(Error::InvalidParam("threads must be at least 1".into()));
    }

    // A concrete mask and an in-pipeline selector are alternatives, never
    // companions: a mask freezes the feature set a selector would choose.
    let has_selection_flags = args.method.is_some()
        || args.k.is_some()
        || args.corr_threshold.is_some()
        || args.select_learner.is_some();
    if args.mask.is_none() && args.method.is_none() && config.mask.is_some() && config.selection.is_some() {
        return Err(Error::InvalidParam(
            "config sets both `mask` and `selection`; keep one".into(),
        ));
    }
    let mask = if args.mask.is_some() {
        args.mask.clone()
    } else if args.method.is_some() {
        None
    } else {
        config.mask.clone()
    };
    if mask.is_some() && has_selection_flags {
        return Err(Error::InvalidParam(
            "a mask conflicts with selection flags (--method/--k/--corr-threshold/--select-learner)".into(),
        ));
    }
    let selection = if mask.is_some() {
        None
    } else {
        resolve_selection(args, &config, seed)?
    };

    Ok(ResolvedRun {
        input,
        band: args.band.or(config.band),
        normalize: args.normalize || config.normalize.unwrap_or(false),
        selection,
        mask,
        leakage: args.leakage.or(config.leakage).unwrap_or_default(),
        grids: args.grids.clone().or_else(|| config.grids.clone()),
        ensemble: args.ensemble || config.ensemble.unwrap_or(false),
        baseline_runs: args.baseline_runs.or(config.baseline_runs).unwrap_or(10),
        baseline_only: args.baseline_only || config.baseline_only.unwrap_or(false),
        seed,
        threads,
        out: args.out.clone().or_else(|| config.out.clone()),
    })
}

/// Rebuilds a selector from a mask's recorded provenance, where possible.
/// Univariate masks record everything the selector needs; the others do not
/// record their base learner, and guessing one would change the result.
fn selector_from_mask(mask: &FeatureMask) -> Result<SelectorSpec> {
    match mask.method() {
        SelectionMethod::Univariate => {
            let k = match mask.params().get("k") {
                Some(ParamValue::Int(k)) if *k >= 1 => *k as usize,
                _ => {
                    return Err(Error::InvalidParam(
                        "mask provenance lacks a usable `k`".into(),
                    ))
                }
            };
            let mut selector = SelectorSpec::new(SelectorKind::Univariate);
            selector.k = k;
            if let Some(ParamValue::Float(t)) = mask.params().get("correlation_threshold") {
                selector.correlation_threshold = Some(*t);
            }
            Ok(selector)
        }
        other => Err(Error::InvalidParam(format!(
            "per-fold selection cannot be rebuilt from a `{other}` mask: its provenance does \
             not record the base learner; pass --method or a config `selection` block"
        ))),
    }
}

/// The fold-selection mode, the mask used for full-data refits (exports),
/// and whether that mask was freshly selected here rather than loaded.
fn build_mode(r: &ResolvedRun, dataset: &Dataset) -> Result<(SelectionMode, FeatureMask, bool)> {
    match r.leakage {
        Leakage::Fixed => {
            let (mask, fresh) = match (&r.mask, &r.selection) {
                (Some(path), _) => (load_json::<FeatureMask>(path)?, false),
                (None, Some(selector)) => (run_selector(dataset, selector)?, true),
                (None, None) => (full_mask(dataset), false),
            };
            validate_mask(dataset, &mask)?;
            Ok((SelectionMode::MaskFixed { mask: mask.clone() }, mask, fresh))
        }
        Leakage::PerFold => {
            let selector = match (&r.selection, &r.mask) {
                (Some(s), _) => s.clone(),
                (None, Some(path)) => selector_from_mask(&load_json::<FeatureMask>(path)?)?,
                (None, None) => {
                    return Err(Error::InvalidParam(
                        "per-fold selection needs --method, a config `selection`, or a mask \
                         with selector provenance"
                            .into(),
                    ))
                }
            };
            // Exports refit on all rows, so their mask comes from selecting
            // on all rows: the per-fold masks exist only inside the folds.
            let mask = run_selector(dataset, &selector)?;
            validate_mask(dataset, &mask)?;
            Ok((SelectionMode::SelectPerFold { selector }, mask, true))
        }
    }
}

#[derive(Serialize)]
struct BaselineFile<'a> {
    runs: u64,
    seed: u64,
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct FamilyReportFile<'a> {
    spec: &'a LearnerSpec,
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct EnsembleFile<'a> {
    members: &'a [LearnerSpec],
    report: &'a EvalReport,
}

#[derive(Serialize)]
struct ImprovementEntry<'a> {
    #[serde(skip_serializing_if = "Option::is_none")]
    spec: Option<&'a LearnerSpec>,
    average_accuracy: f64,
    /// Absolute gap to the baseline's average accuracy, in percentage points.
    improvement_points: f64,
}

#[derive(Serialize)]
struct ImprovementFile<'a> {
    baseline_average_accuracy: f64,
    best: ImprovementEntry<'a>,
    #[serde(skip_serializing_if = "Option::is_none")]
    ensemble: Option<ImprovementEntry<'a>>,
}

pub fn execute(r: &ResolvedRun, out: &Path) -> Result<CommandOutcome> {
    let mut dataset = super::load_input(&r.input)?;
    if r.normalize {
        dataset = normalize_by_awake_time(&dataset)?;
    }
    if let Some(choice) = r.band {
        // Re-banding validates every age against the requested band.
        dataset = Dataset::new(
            dataset.schema().clone(),
            dataset.records().to_vec(),
            choice.to_band(),
        )?;
    }

    let mut outcome = CommandOutcome::default();
    let mut summary = serde_json::Map::new();
    let (n_td, n_ar) = dataset.class_counts();
    summary.insert("records".into(), dataset.len().into());
    summary.insert("td".into(), n_td.into());
    summary.insert("ar".into(), n_ar.into());

    // Chance baseline first: it anchors the improvement summary.
    let baseline = weighted_random_baseline(&dataset, r.baseline_runs, r.seed)?;
    outcome.push(write_json(
        out,
        "baseline.json",
        &BaselineFile {
            runs: r.baseline_runs,
            seed: r.seed,
            report: &baseline,
        },
    )?);
    outcome.push(write_text(out, "baseline_table.txt", &render_table(&baseline))?);
    let baseline_accuracy = baseline.average_row.accuracy.as_f64();
    summary.insert("baseline_average_accuracy".into(), baseline_accuracy.into());

    if r.baseline_only {
        outcome.summary = Some(summary.into());
        return Ok(outcome);
    }

    let (mode, export_mask, fresh_mask) = build_mode(r, &dataset)?;
    if fresh_mask {
        outcome.push(write_json(out, "mask.json", &export_mask)?);
    }

    let grids: Vec<ParamGrid> = match &r.grids {
        Some(path) => load_json(path)?,
        None => default_grids(),
    };
    let grid = grid_search_mode(&dataset, &mode, &grids, r.seed)?;
    outcome.push(write_json(out, "grid.json", &grid)?);
    outcome.push(write_text(out, "grid_table.txt", &ranking_tables(&grid))?);
    summary.insert("ranking".into(), ranking_summary(&grid));

    let leaders: Vec<&GridEntry> = grid.family_leaders();
    for entry in &leaders {
        let family = entry.spec.family().as_str();
        // family_leaders only returns evaluated entries.
        let report = entry.report.as_ref().expect("leader without report");
        outcome.push(write_json(
            out,
            &format!("report_{family}.json"),
            &FamilyReportFile {
                spec: &entry.spec,
                report,
            },
        )?);
        outcome.push(write_text(out, &format!("table_{family}.txt"), &render_table(report))?);
    }

    let best = grid
        .best()
        .filter(|e| e.report.is_some())
        .ok_or_else(|| {
            Error::DegenerateDataset("no grid cell evaluated successfully".into())
        })?;
    let best_report = best.report.as_ref().expect("checked above");
    summary.insert("best".into(), serde_json::json!({
        "id": best.spec.id(),
        "average_accuracy": best_report.average_row.accuracy.as_f64(),
    }));

    let mut ensemble_report = None;
    if r.ensemble {
        let spec = build_ensemble(&grid)?;
        let report = evaluate_members_mode(&dataset, &mode, spec.members())?;
        outcome.push(write_json(
            out,
            "ensemble.json",
            &EnsembleFile {
                members: spec.members(),
                report: &report,
            },
        )?);
        outcome.push(write_text(out, "ensemble_table.txt", &render_table(&report))?);
        summary.insert(
            "ensemble_average_accuracy".into(),
            report.average_row.accuracy.as_f64().into(),
        );
        ensemble_report = Some(report);
    }

    let improvement = ImprovementFile {
        baseline_average_accuracy: baseline_accuracy,
        best: ImprovementEntry {
            spec: Some(&best.spec),
            average_accuracy: best_report.average_row.accuracy.as_f64(),
            improvement_points: improvement_over_baseline(best_report, &baseline),
        },
        ensemble: ensemble_report.as_ref().map(|report| ImprovementEntry {
            spec: None,
            average_accuracy: report.average_row.accuracy.as_f64(),
            improvement_points: improvement_over_baseline(report, &baseline),
        }),
    };
    outcome.push(write_json(out, "improvement.json", &improvement)?);
    summary.insert(
        "improvement_points_best".into(),
        improvement.best.improvement_points.into(),
    );
    if let Some(e) = &improvement.ensemble {
        summary.insert(
            "improvement_points_ensemble".into(),
            e.improvement_points.into(),
        );
    }

    // Structure exports for tree-shaped leaders in the top three families:
    // refit on all rows so the exported tree is the deployable one.
    let weights = ClassWeights::balanced(&dataset)?;
    for entry in leaders.iter().take(3) {
        let family = entry.spec.family();
        if !matches!(family, LearnerFamily::DecisionTree | LearnerFamily::RandomForest) {
            continue;
        }
        let model = fit(&dataset, &export_mask, &weights, &entry.spec)?;
        let root = exportable_root(&model)?;
        let name = family.as_str();
        outcome.push(write_text(
            out,
            &format!("tree_{name}.txt"),
            &export_tree_node(root, ExportFormat::Text),
        )?);
        outcome.push(write_text(
            out,
            &format!("tree_{name}.dot"),
            &export_tree_node(root, ExportFormat::Dot),
        )?);
    }

    outcome.summary = Some(summary.into());
    Ok(outcome)
}
