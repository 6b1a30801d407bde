//! `train` and `crossval`: fit the evaluator on labeled features.
//!
//! `train` fits one model on every labeled sample and writes the snapshot
//! with minimal training loss. `crossval` runs the k-fold prompt-disjoint
//! protocol, writing one checkpoint per fold plus the averaged
//! PLCC/SRCC/KRCC report.

use hyperscore_core::train::{fit, train_single, TrainSample};
use std::path::Path;

use crate::checkpoint::{save_checkpoint, CheckpointMeta};
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::reports::{training_log, write_json, write_text, Meta};
use crate::runner::ThreadedRunner;

pub fn run_train(config: &RunConfig, config_hash: u64) -> Result<()> {
    let (_, samples) = super::load_train_samples(config)?;
    let refs: Vec<&TrainSample<f32>> = samples.iter().collect();
    let model_cfg = config.dims.model_config();
    let tcfg = config.train.train_config(config.seed);
    let encoder = model_cfg
        .toy_encoder::<f32>(config.seed)
        .map_err(CliError::from)?;
    let runner = ThreadedRunner::from_env(config.threads);

    let run =
        train_single(&refs, &model_cfg, &tcfg, &encoder, &runner, 0).map_err(CliError::from)?;

    let meta = Meta::new("train", config_hash, config.seed);
    save_checkpoint(
        Path::new(&config.paths.checkpoint),
        &run.best_model,
        &CheckpointMeta {
            model: model_cfg,
            seed: config.seed,
            config_hash: format!("{config_hash:016x}"),
        },
    )?;
    let log_path = Path::new(&config.paths.out_dir).join("train_log.jsonl");
    let records: Vec<(usize, _)> = run.epochs.iter().map(|r| (0usize, *r)).collect();
    write_text(&log_path, &training_log(&meta, &records)?)?;

    let last = run.epochs.last().expect("at least one epoch");
    println!(
        "train: {} samples, {} epochs ({} threads); best epoch {} (loss {:.6}); final L_reg {:.6} L_dis {:.6}",
        samples.len(),
        run.epochs.len(),
        runner.threads(),
        run.best_epoch,
        run.epochs[run.best_epoch].loss,
        last.loss_reg,
        last.loss_dis
    );
    println!(
        "train: checkpoint {} log {}",
        config.paths.checkpoint,
        log_path.display()
    );
    Ok(())
}

pub fn run_crossval(config: &RunConfig, config_hash: u64) -> Result<()> {
    let (manifest, samples) = super::load_train_samples(config)?;
    let model_cfg = config.dims.model_config();
    let tcfg = config.train.train_config(config.seed);
    let encoder = model_cfg
        .toy_encoder::<f32>(config.seed)
        .map_err(CliError::from)?;
    let runner = ThreadedRunner::from_env(config.threads);

    let outcome = fit(&samples, &model_cfg, &tcfg, &encoder, &runner).map_err(CliError::from)?;

    let meta = Meta::new("crossval", config_hash, config.seed);
    let mut ckpt_paths = Vec::new();
    for (f, model) in outcome.fold_models.iter().enumerate() {
        let path = Path::new(&config.paths.out_dir).join(format!("fold{f}.ckpt"));
        save_checkpoint(
            &path,
            model,
            &CheckpointMeta {
                model: model_cfg.clone(),
                seed: config.seed,
                config_hash: format!("{config_hash:016x}"),
            },
        )?;
        ckpt_paths.push(path.display().to_string());
    }

    let log_path = Path::new(&config.paths.out_dir).join("train_log.jsonl");
    let mut records = Vec::new();
    for fold in &outcome.report.folds {
        for r in &fold.epochs {
            records.push((fold.fold, *r));
        }
    }
    write_text(&log_path, &training_log(&meta, &records)?)?;

    let report_path = Path::new(&config.paths.out_dir).join("crossval_report.json");
    let doc = serde_json::json!({
        "report": outcome.report,
        "checkpoints": ckpt_paths,
    });
    write_json(&report_path, &meta, "crossval", &doc)?;

    println!(
        "crossval: {} folds over {} samples ({} threads); report {}",
        outcome.report.folds.len(),
        samples.len(),
        runner.threads(),
        report_path.display()
    );
    for (dim, m) in manifest
        .dimension_names
        .iter()
        .zip(&outcome.report.mean_metrics)
    {
        println!(
            "crossval: {dim}: PLCC {} SRCC {} KRCC {}",
            fmt(m.plcc),
            fmt(m.srcc),
            fmt(m.krcc)
        );
    }
    Ok(())
}

fn fmt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.4}")).unwrap_or_else(|| "n/a".into())
}
