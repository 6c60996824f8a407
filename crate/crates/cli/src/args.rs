//! Command-line surface: subcommands, flags, and the JSON run config.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use motordev_core::select::SelectorSpec;
use motordev_core::AgeBand;
use serde::{Deserialize, Serialize};
use serde_json::Value;

/// Day-long infant leg-movement classification: preprocess, select features,
/// compare classifiers, and report against a chance baseline.
#[derive(Debug, Parser)]
#[command(name = "motordev", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Validate a raw CSV, optionally normalize counts, and split into age bands
    Preprocess(PreprocessArgs),
    /// Choose a feature subset and save it as a reusable mask
    Select(SelectArgs),
    /// Evaluate every learner family at its default parameters
    Spotcheck(SpotcheckArgs),
    /// Grid search, chance baseline, ensemble, and reports in one pass
    Run(RunArgs),
    /// Weighted-random chance baseline for a labeled CSV
    Baseline(BaselineArgs),
    /// Fit a tree-based model and export its structure as text and DOT
    ExportTree(ExportTreeArgs),
    /// Generate a synthetic labeled dataset
    Synth(SynthArgs),
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Preprocess(_) => "preprocess",
            Command::Select(_) => "select",
            Command::Spotcheck(_) => "spotcheck",
            Command::Run(_) => "run",
            Command::Baseline(_) => "baseline",
            Command::ExportTree(_) => "export-tree",
            Command::Synth(_) => "synth",
        }
    }

    pub fn out_flag(&self) -> Option<&Path> {
        match self {
            Command::Preprocess(a) => a.out.as_deref(),
            Command::Select(a) => a.out.as_deref(),
            Command::Spotcheck(a) => a.out.as_deref(),
            Command::Run(a) => a.out.as_deref(),
            Command::Baseline(a) => a.out.as_deref(),
            Command::ExportTree(a) => a.out.as_deref(),
            Command::Synth(a) => a.out.as_deref(),
        }
    }

    /// The file the command reads, for the manifest digest. Synthesis reads
    /// only its profile, if any.
    pub fn input_path(&self) -> Option<PathBuf> {
        match self {
            Command::Preprocess(a) => Some(a.input.clone()),
            Command::Select(a) => Some(a.input.clone()),
            Command::Spotcheck(a) => Some(a.input.clone()),
            Command::Run(a) => a.input.clone(),
            Command::Baseline(a) => Some(a.input.clone()),
            Command::ExportTree(a) => Some(a.input.clone()),
            Command::Synth(a) => a.profile.clone(),
        }
    }

    /// Raw flag values for the manifest. Output paths are excluded so the
    /// same invocation into two directories leaves identical manifests.
    pub fn options_value(&self) -> Value {
        let serialized = match self {
            Command::Preprocess(a) => serde_json::to_value(a),
            Command::Select(a) => serde_json::to_value(a),
            Command::Spotcheck(a) => serde_json::to_value(a),
            Command::Run(a) => serde_json::to_value(a),
            Command::Baseline(a) => serde_json::to_value(a),
            Command::ExportTree(a) => serde_json::to_value(a),
            Command::Synth(a) => serde_json::to_value(a),
        };
        serialized.unwrap_or(Value::Null)
    }
}

/// Age band selectable from the command line. `Unbanded` is internal to the
/// pipeline and never a valid user choice.
#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
pub enum BandChoice {
    #[value(name = "0-6")]
    #[serde(rename = "0-6")]
    ZeroToSix,
    #[value(name = "6-12")]
    #[serde(rename = "6-12")]
    SixToTwelve,
}

impl BandChoice {
    pub fn to_band(self) -> AgeBand {
        match self {
            BandChoice::ZeroToSix => AgeBand::ZeroToSix,
            BandChoice::SixToTwelve => AgeBand::SixToTwelve,
        }
    }
}

/// Whether feature selection is fixed up front or re-run inside each fold.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Leakage {
    /// One mask, chosen once, reused in every fold.
    #[default]
    Fixed,
    /// Selection reruns on each fold's training split, so the held-out
    /// record never influences which features judge it.
    PerFold,
}

#[derive(Debug, Args, Serialize)]
pub struct PreprocessArgs {
    /// Raw CSV with metadata and feature columns
    #[arg(long)]
    pub input: PathBuf,
    /// Convert per-day movement counts to per-awake-hour rates
    #[arg(long)]
    pub normalize: bool,
    /// Validate against one band instead of splitting into all bands
    #[arg(long, value_enum)]
    pub band: Option<BandChoice>,
    /// Output directory (default: $MOTORDEV_OUT, then the current directory)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SelectArgs {
    /// Banded CSV from `preprocess`
    #[arg(long)]
    pub input: PathBuf,
    /// univariate | rfe | stepwise | stepwise-backward | auto
    #[arg(long)]
    pub method: String,
    /// Target subset size for univariate, rfe, and auto
    #[arg(long, default_value_t = 8)]
    pub k: usize,
    /// Drop features correlated above this |Pearson r| after selection
    #[arg(long)]
    pub corr_threshold: Option<f64>,
    /// Base learner family scoring rfe, stepwise, and auto
    #[arg(long, default_value = "logistic_regression")]
    pub learner: String,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: $MOTORDEV_OUT, then the current directory)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SpotcheckArgs {
    /// Banded CSV from `preprocess`
    #[arg(long)]
    pub input: PathBuf,
    /// Feature mask from `select` (default: every feature)
    #[arg(long)]
    pub mask: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: $MOTORDEV_OUT, then the current directory)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct RunArgs {
    /// Banded CSV (flags override the config file)
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// JSON config file mirroring these flags
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Validate the input against this band before evaluating
    #[arg(long, value_enum)]
    pub band: Option<BandChoice>,
    /// Convert per-day movement counts to per-awake-hour rates first
    #[arg(long)]
    pub normalize: bool,
    /// Feature mask from `select`; conflicts with --method
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Run selection in-pipeline: univariate | rfe | stepwise | auto
    #[arg(long)]
    pub method: Option<String>,
    /// Target subset size for in-pipeline selection
    #[arg(long)]
    pub k: Option<usize>,
    /// Correlation-pruning threshold for in-pipeline selection
    #[arg(long)]
    pub corr_threshold: Option<f64>,
    /// Base learner family for in-pipeline selection scoring
    #[arg(long)]
    pub select_learner: Option<String>,
    /// fixed: one mask for every fold; per-fold: reselect inside each fold
    #[arg(long, value_enum)]
    pub leakage: Option<Leakage>,
    /// Hyperparameter lattices JSON (default: built-in grids)
    #[arg(long, alias = "grid")]
    pub grids: Option<PathBuf>,
    /// Also evaluate the top-3 distinct-family majority vote
    #[arg(long)]
    pub ensemble: bool,
    /// Chance-baseline repetitions
    #[arg(long)]
    pub baseline_runs: Option<u64>,
    /// Stop after the chance baseline
    #[arg(long)]
    pub baseline_only: bool,
    /// Root seed for every stochastic component of the run
    #[arg(long)]
    pub seed: Option<u64>,
    /// Worker cap; results do not depend on it
    #[arg(long)]
    pub threads: Option<usize>,
    /// Output directory (default: config, then $MOTORDEV_OUT, then .)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

/// JSON config for `run`. Each field mirrors the flag of the same name;
/// explicit flags override config values. Unknown keys are rejected so a
/// typo fails loudly instead of silently running defaults.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub band: Option<BandChoice>,
    pub normalize: Option<bool>,
    /// Full selection request, including the base learner.
    pub selection: Option<SelectorSpec>,
    pub mask: Option<PathBuf>,
    pub leakage: Option<Leakage>,
    pub grids: Option<PathBuf>,
    pub ensemble: Option<bool>,
    pub baseline_runs: Option<u64>,
    pub baseline_only: Option<bool>,
    pub seed: Option<u64>,
    pub threads: Option<usize>,
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct BaselineArgs {
    /// Banded CSV from `preprocess`
    #[arg(long)]
    pub input: PathBuf,
    /// Number of random-guess repetitions to average
    #[arg(long, default_value_t = 10)]
    pub runs: u64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: $MOTORDEV_OUT, then the current directory)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum ExportFormatArg {
    Text,
    Dot,
    Both,
}

#[derive(Debug, Args, Serialize)]
pub struct ExportTreeArgs {
    /// Banded CSV to fit on
    #[arg(long)]
    pub input: PathBuf,
    /// Feature mask from `select` (default: every feature)
    #[arg(long)]
    pub mask: Option<PathBuf>,
    /// Learner spec JSON; must be a decision_tree or random_forest family
    #[arg(long)]
    pub spec: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = ExportFormatArg::Both)]
    pub format: ExportFormatArg,
    /// Overrides the learner spec's seed when set
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory (default: $MOTORDEV_OUT, then the current directory)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args, Serialize)]
pub struct SynthArgs {
    /// Generator profile JSON; conflicts with --band/--separation
    #[arg(long, conflicts_with_all = ["band", "separation"])]
    pub profile: Option<PathBuf>,
    /// Band for the built-in two-class fixture
    #[arg(long, value_enum, required_unless_present = "profile")]
    pub band: Option<BandChoice>,
    /// Class separation of the fixture, in within-class SD units
    #[arg(long, default_value_t = 3.0)]
    pub separation: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (default: $MOTORDEV_OUT, then the current directory)
    #[arg(long)]
    #[serde(skip)]
    pub out: Option<PathBuf>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_internally_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn band_values_parse_from_their_display_names() {
        let cli = Cli::parse_from(["motordev", "synth", "--band", "0-6", "--seed", "7"]);
        match cli.command {
            Command::Synth(a) => {
                assert_eq!(a.band, Some(BandChoice::ZeroToSix));
                assert_eq!(a.seed, 7);
                assert_eq!(a.separation, 3.0);
            }
            other => panic!("parsed wrong command {}", other.name()),
        }
    }

    #[test]
    fn leakage_uses_kebab_case_in_flags_and_config() {
        let cli = Cli::parse_from([
            "motordev", "run", "--input", "x.csv", "--leakage", "per-fold",
        ]);
        match cli.command {
            Command::Run(a) => assert_eq!(a.leakage, Some(Leakage::PerFold)),
            other => panic!("parsed wrong command {}", other.name()),
        }
        let parsed: Leakage = serde_json::from_str("\"per-fold\"").unwrap();
        assert_eq!(parsed, Leakage::PerFold);
    }

    #[test]
    fn run_config_rejects_unknown_keys() {
        let err = serde_json::from_str::<RunConfig>("{\"seeed\": 3}").unwrap_err();
        assert!(err.to_string().contains("seeed"));
    }

    #[test]
    fn options_value_excludes_the_output_directory() {
        let cli = Cli::parse_from([
            "motordev", "baseline", "--input", "b.csv", "--out", "/tmp/somewhere",
        ]);
        let options = cli.command.options_value();
        assert!(options.get("out").is_none());
        assert_eq!(options.get("runs"), Some(&serde_json::json!(10)));
    }
}
