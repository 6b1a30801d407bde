//! `synth`: write a deterministic toy dataset (feature containers,
//! manifest, teacher-generated labels, and the teacher checkpoint).

use hyperscore_core::stats::SampleLabel;
use hyperscore_core::train::{synth_teacher_dataset, SynthSpec};
use std::path::Path;

use crate::checkpoint::{save_checkpoint, CheckpointMeta};
use crate::config::RunConfig;
use crate::container;
use crate::error::{CliError, Result};
use crate::reports::{write_labels, write_manifest, Meta};

pub fn run(config: &RunConfig, config_hash: u64) -> Result<()> {
    let model_cfg = config.dims.model_config();
    let spec = SynthSpec {
        prompt_count: config.synth.prompts,
        methods: config.synth.methods.clone(),
        feature_dims: config.dims.feature_dims(),
        seed: config.seed,
    };
    let data = synth_teacher_dataset::<f32>(&spec, &model_cfg).map_err(CliError::from)?;

    std::fs::create_dir_all(&config.paths.feature_dir)
        .map_err(|e| CliError::Data(format!("cannot create {}: {e}", config.paths.feature_dir)))?;
    for (bundle, entry) in data.bundles.iter().zip(&data.manifest.samples) {
        container::write_bundle(
            &Path::new(&config.paths.feature_dir).join(&entry.feature_path),
            bundle,
        )?;
    }

    let meta = Meta::new("synth", config_hash, config.seed);
    write_manifest(Path::new(&config.paths.manifest), &meta, &data.manifest)?;

    let labels: Vec<SampleLabel> = data
        .manifest
        .samples
        .iter()
        .zip(&data.labels)
        .map(|(entry, scores)| SampleLabel {
            sample_id: entry.sample_id.clone(),
            mos: scores.iter().map(|&v| v as f64).collect(),
            retained_subject_count: 1,
        })
        .collect();
    write_labels(
        Path::new(&config.paths.labels),
        &meta,
        &labels,
        &data.manifest.dimension_names,
    )?;

    // The checkpoint seed rebuilds the frozen encoder, which is shared by
    // teacher and student and keyed to the run seed.
    let teacher_path = Path::new(&config.paths.out_dir).join("teacher.ckpt");
    save_checkpoint(
        &teacher_path,
        &data.teacher,
        &CheckpointMeta {
            model: model_cfg,
            seed: config.seed,
            config_hash: format!("{config_hash:016x}"),
        },
    )?;

    println!(
        "synth: {} containers in {}, manifest {}, labels {}, teacher {}",
        data.bundles.len(),
        config.paths.feature_dir,
        config.paths.manifest,
        config.paths.labels,
        teacher_path.display()
    );
    Ok(())
}
