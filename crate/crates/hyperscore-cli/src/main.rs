//! Command-line front end for the multi-dimensional text-to-3D quality
//! evaluator. Runs are driven by a JSON config; every field is
//! overridable as `--section.key value`. Exit codes: 0 success, 1
//! usage/config, 2 data/format, 3 numerical failure.

mod annotations;
mod checkpoint;
mod commands;
mod config;
mod container;
mod error;
mod reports;
mod runner;

use std::path::PathBuf;
use std::process::ExitCode;

use error::{CliError, Result};

const USAGE: &str = "\
usage: hyperscore <command> [--config FILE] [--key value ...]

commands:
  synth      write a deterministic toy dataset (features, manifest,
             teacher labels, teacher checkpoint)
  mos        screen raw annotations (trapping + BT.500) and compute MOS
  train      fit one model on all labeled samples
  crossval   k-fold prompt-disjoint cross-validation with per-fold
             checkpoints and averaged PLCC/SRCC/KRCC
  score      score samples with a checkpoint (--ids a,b,c or all)
  stats      correlation reports and score tables (stats.source =
             file | baseline)
  gradcheck  finite-difference check of the backward pass (exit 3 on
             failure)

Any config field can be overridden: --train.epochs 5 --dims.feat_dim 32.
HS_THREADS caps the per-sample worker count.";

fn main() -> ExitCode {
    match dispatch() {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("hyperscore: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

struct Cli {
    command: String,
    config_path: Option<PathBuf>,
    ids: Option<String>,
    overrides: Vec<(String, String)>,
}

fn parse_args() -> Result<Cli> {
    let mut args = std::env::args().skip(1).peekable();
    let command = match args.next() {
        Some(c) if c == "--help" || c == "-h" => {
            println!("{USAGE}");
            std::process::exit(0);
        }
        Some(c) => c,
        None => return Err(CliError::Usage(format!("missing command\n{USAGE}"))),
    };
    let mut config_path = None;
    let mut ids = None;
    let mut overrides = Vec::new();
    while let Some(arg) = args.next() {
        let Some(key) = arg.strip_prefix("--") else {
            return Err(CliError::Usage(format!("unexpected argument '{arg}'")));
        };
        if key == "help" {
            println!("{USAGE}");
            std::process::exit(0);
        }
        let value = args
            .next()
            .ok_or_else(|| CliError::Usage(format!("--{key} needs a value")))?;
        match key {
            "config" => config_path = Some(PathBuf::from(value)),
            "ids" => ids = Some(value),
            _ => overrides.push((key.to_string(), value)),
        }
    }
    Ok(Cli {
        command,
        config_path,
        ids,
        overrides,
    })
}

fn dispatch() -> Result<()> {
    let cli = parse_args()?;
    let (config, hash) = config::load_config(cli.config_path.as_deref(), &cli.overrides)?;
    std::fs::create_dir_all(&config.paths.out_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", config.paths.out_dir)))?;
    match cli.command.as_str() {
        "synth" => commands::synth::run(&config, hash),
        "mos" => commands::mos::run(&config, hash),
        "train" => commands::train::run_train(&config, hash),
        "crossval" => commands::train::run_crossval(&config, hash),
        "score" => commands::score::run(&config, hash, cli.ids.as_deref()),
        "stats" => commands::stats::run(&config, hash),
        "gradcheck" => commands::gradcheck::run(&config, hash),
        other => Err(CliError::Usage(format!(
            "unknown command '{other}'\n{USAGE}"
        ))),
    }
}
