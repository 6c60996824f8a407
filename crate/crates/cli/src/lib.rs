//! Command dispatch for the `motordev` binary.
//!
//! Every subcommand resolves its options, runs, and leaves a `manifest.json`
//! in the output directory recording what ran, what it read, what it wrote,
//! and how it ended. The manifest is written on failure too, as long as
//! argument parsing succeeded and the output directory is usable.
//!
//! Exit codes: 0 success, 1 runtime or model error, 2 usage or input
//! validation error (also used by argument parsing itself).

use motordev_core::Error;

pub mod args;
pub mod commands;
pub mod manifest;
pub mod output;

use args::Command;
use manifest::{InputDigest, Manifest};

/// Usage and validation failures exit 2; runtime failures exit 1. The split
/// follows blame: 2 means fix the invocation or the input file, 1 means the
/// computation itself gave out.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::CsvCell { .. }
        | Error::MissingColumn(_)
        | Error::Record { .. }
        | Error::Schema(_)
        | Error::DegenerateDataset(_)
        | Error::InvalidParam(_)
        | Error::UnknownHyperparameter { .. }
        | Error::NoImportances { .. }
        | Error::Csv(_) => 2,
        Error::NonConvergence { .. }
        | Error::FingerprintMismatch { .. }
        | Error::Export(_)
        | Error::Io(_)
        | Error::Json(_) => 1,
    }
}

/// Runs one parsed command to completion and returns the process exit code.
pub fn dispatch(command: &Command) -> i32 {
    match command {
        Command::Run(run_args) => dispatch_run(run_args),
        simple => dispatch_simple(simple),
    }
}

fn dispatch_simple(command: &Command) -> i32 {
    let out = match output::resolve_out_dir(command.out_flag()) {
        Ok(dir) => dir,
        Err(e) => return fail_without_manifest(&e),
    };
    let result = match command {
        Command::Preprocess(a) => commands::preprocess::execute(a, &out),
        Command::Select(a) => commands::select::execute(a, &out),
        Command::Spotcheck(a) => commands::spotcheck::execute(a, &out),
        Command::Baseline(a) => commands::baseline::execute(a, &out),
        Command::ExportTree(a) => commands::export_tree::execute(a, &out),
        Command::Synth(a) => commands::synth::execute(a, &out),
        Command::Run(_) => unreachable!("run has its own dispatch"),
    };
    finish(
        &out,
        command.name(),
        command.options_value(),
        command.input_path().map(|p| InputDigest::of(&p)),
        result,
    )
}

/// `run` resolves its config file before the output directory is knowable,
/// so a broken config still gets a manifest in the flag- or env-named
/// directory.
fn dispatch_run(run_args: &args::RunArgs) -> i32 {
    match commands::run::resolve_run(run_args) {
        Ok(resolved) => {
            let out = match output::resolve_out_dir(resolved.out.as_deref()) {
                Ok(dir) => dir,
                Err(e) => return fail_without_manifest(&e),
            };
            let input = InputDigest::of(&resolved.input);
            let options = serde_json::to_value(&resolved).unwrap_or(serde_json::Value::Null);
            let result = commands::run::execute(&resolved, &out);
            finish(&out, "run", options, Some(input), result)
        }
        Err(e) => {
            let out = match output::resolve_out_dir(run_args.out.as_deref()) {
                Ok(dir) => dir,
                Err(io) => return fail_without_manifest(&io),
            };
            let command = Command::Run(clone_run_args(run_args));
            finish(
                &out,
                "run",
                command.options_value(),
                run_args.input.as_ref().map(|p| InputDigest::of(p)),
                Err(e),
            )
        }
    }
}

// RunArgs holds only paths, scalars, and enums; clap does not derive Clone
// for us because the struct doubles as a serde type.
fn clone_run_args(a: &args::RunArgs) -> args::RunArgs {
    args::RunArgs {
        input: a.input.clone(),
        config: a.config.clone(),
        band: a.band,
        normalize: a.normalize,
        mask: a.mask.clone(),
        method: a.method.clone(),
        k: a.k,
        corr_threshold: a.corr_threshold,
        select_learner: a.select_learner.clone(),
        leakage: a.leakage,
        grids: a.grids.clone(),
        ensemble: a.ensemble,
        baseline_runs: a.baseline_runs,
        baseline_only: a.baseline_only,
        seed: a.seed,
        threads: a.threads,
        out: a.out.clone(),
    }
}

fn fail_without_manifest(error: &Error) -> i32 {
    eprintln!("error: {error}");
    exit_code(error)
}

/// Writes the manifest and converts the command result into an exit code.
fn finish(
    dir: &std::path::Path,
    name: &str,
    options: serde_json::Value,
    input: Option<InputDigest>,
    result: motordev_core::Result<commands::CommandOutcome>,
) -> i32 {
    let (outputs, summary, error, code) = match result {
        Ok(outcome) => (outcome.output_names(), outcome.summary, None, 0),
        Err(e) => {
            eprintln!("error: {e}");
            (Vec::new(), None, Some(e.to_string()), exit_code(&e))
        }
    };
    let manifest = Manifest {
        command: name.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        options,
        input,
        outputs,
        summary,
        error,
    };
    if let Err(e) = manifest.write(dir) {
        eprintln!("error: cannot write manifest: {e}");
        if code == 0 {
            return 1;
        }
    }
    code
}
