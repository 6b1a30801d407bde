//! `mos`: ingest annotations, screen subjects (trapping then BT.500), and
//! write labels plus a screening report naming who was rejected and why.

use hyperscore_core::stats::{compute_mos, screen_pipeline, Bt500Config, TrappingInfo};
use std::path::Path;

use crate::annotations::read_annotations;
use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::reports::{write_json, write_labels, Meta};

pub fn run(config: &RunConfig, config_hash: u64) -> Result<()> {
    let trapping_info = match (&config.mos.sentinel_id, &config.mos.duplicate_pair) {
        (Some(sentinel), Some(pair)) => Some(TrappingInfo {
            sentinel: sentinel.clone(),
            duplicate: pair.clone(),
        }),
        (None, None) => None,
        _ => {
            return Err(CliError::Config(
                "mos.sentinel_id and mos.duplicate_pair must be set together".into(),
            ))
        }
    };
    let matrix = read_annotations(
        Path::new(&config.paths.annotations),
        &config.dims.dimension_names,
        trapping_info.clone(),
    )?;

    let trapping_cfg = config.mos.trapping_config();
    let report = screen_pipeline(
        &matrix,
        trapping_info.as_ref().map(|_| &trapping_cfg),
        &Bt500Config::default(),
    )
    .map_err(CliError::from)?;

    let mut labels = compute_mos(&matrix, &report.retained).map_err(CliError::from)?;
    // trapping stimuli are screening devices, not dataset samples
    if let Some(info) = &trapping_info {
        labels.retain(|l| l.sample_id != info.sentinel && l.sample_id != info.duplicate.1);
    }

    let meta = Meta::new("mos", config_hash, config.seed);
    write_labels(
        Path::new(&config.paths.labels),
        &meta,
        &labels,
        &config.dims.dimension_names,
    )?;
    let screening_path = Path::new(&config.paths.out_dir).join("screening.json");
    write_json(&screening_path, &meta, "screening", &report)?;

    let rejected: Vec<String> = report
        .trapping
        .iter()
        .flat_map(|t| t.rejected.iter())
        .chain(report.bt500.rejected.iter())
        .map(|r| format!("{} ({})", r.subject_id, r.rule))
        .collect();
    println!(
        "mos: {} subjects retained of {}; labels {} ({} samples); screening {}",
        report.retained.len(),
        matrix.subject_count(),
        config.paths.labels,
        labels.len(),
        screening_path.display()
    );
    for r in rejected {
        println!("mos: rejected {r}");
    }
    Ok(())
}
