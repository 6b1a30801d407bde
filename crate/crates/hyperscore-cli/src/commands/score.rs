//! `score`: load a checkpoint and score samples, writing raw and
//! clamped-`[0, 10]` columns per dimension. With `score.dump_weights` the raw
//! fusion-weight vector of every (sample, dimension) goes to
//! `out_dir/weights/<sample_id>.csv`.

use std::path::Path;

use hyperscore_core::model::{condition_forward, score_sample, PreparedSample};

use crate::checkpoint::load_checkpoint;
use crate::config::RunConfig;
use crate::container;
use crate::error::{CliError, Result};
use crate::reports::{read_manifest, write_scores, write_text, Meta};

pub fn run(config: &RunConfig, config_hash: u64, ids: Option<&str>) -> Result<()> {
    let (model, ckpt_meta) = load_checkpoint(Path::new(&config.paths.checkpoint))?;
    let encoder = ckpt_meta
        .model
        .toy_encoder::<f32>(ckpt_meta.seed)
        .map_err(CliError::from)?;
    let manifest = read_manifest(Path::new(&config.paths.manifest))?;
    let cond = condition_forward(&model, &encoder).map_err(CliError::from)?;

    let wanted: Vec<String> = match ids {
        None | Some("all") => manifest
            .samples
            .iter()
            .map(|e| e.sample_id.clone())
            .collect(),
        Some(list) => list.split(',').map(|s| s.trim().to_string()).collect(),
    };

    let meta = Meta::new("score", config_hash, config.seed);
    let mut rows = Vec::with_capacity(wanted.len());
    for id in &wanted {
        let entry = manifest
            .samples
            .iter()
            .find(|e| &e.sample_id == id)
            .ok_or_else(|| CliError::Data(format!("sample {id} not in manifest")))?;
        let path = Path::new(&config.paths.feature_dir).join(&entry.feature_path);
        let bundle = container::read_bundle(&path, Some(id))?;
        if bundle.dims().feat_dim != ckpt_meta.model.feat_dim {
            return Err(CliError::Config(format!(
                "container {id} has feature width {}, checkpoint expects {}",
                bundle.dims().feat_dim,
                ckpt_meta.model.feat_dim
            )));
        }
        let prepared = PreparedSample::<f32>::from_bundle(&bundle).map_err(CliError::from)?;
        let (scores, trace) = score_sample(&prepared, &cond, &model.mlp).map_err(CliError::from)?;
        if config.score.dump_weights {
            let mut out = String::new();
            out.push_str(&meta.comment_line());
            out.push('\n');
            for (dim, weights) in ckpt_meta
                .model
                .dimension_names
                .iter()
                .zip(trace.fusion_weights())
            {
                out.push_str(dim);
                for w in weights {
                    out.push_str(&format!(",{w}"));
                }
                out.push('\n');
            }
            let wpath = Path::new(&config.paths.out_dir)
                .join("weights")
                .join(format!("{id}.csv"));
            write_text(&wpath, &out)?;
        }
        rows.push((id.clone(), scores));
    }

    write_scores(
        Path::new(&config.paths.predictions),
        &meta,
        &rows,
        &ckpt_meta.model.dimension_names,
    )?;
    println!(
        "score: {} samples x {} dimensions -> {}",
        rows.len(),
        ckpt_meta.model.dimension_names.len(),
        config.paths.predictions
    );
    Ok(())
}
