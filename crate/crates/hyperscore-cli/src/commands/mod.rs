//! Subcommand implementations.

pub mod gradcheck;
pub mod mos;
pub mod score;
pub mod stats;
pub mod synth;
pub mod train;

use std::collections::BTreeMap;
use std::path::Path;

use hyperscore_core::feature::{DatasetManifest, FeatureBundle};
use hyperscore_core::model::PreparedSample;
use hyperscore_core::train::TrainSample;

use crate::config::RunConfig;
use crate::error::{CliError, Result};
use crate::{container, reports};

/// Load every manifest sample's feature container, enforcing that the
/// containers match the configured dimensions.
pub(crate) fn load_bundles(config: &RunConfig) -> Result<(DatasetManifest, Vec<FeatureBundle>)> {
    let manifest = reports::read_manifest(Path::new(&config.paths.manifest))?;
    let want = config.dims.feature_dims();
    let mut bundles = Vec::with_capacity(manifest.samples.len());
    for entry in &manifest.samples {
        let path = Path::new(&config.paths.feature_dir).join(&entry.feature_path);
        let mut bundle = container::read_bundle(&path, Some(&entry.sample_id))?;
        bundle.prompt_id = entry.prompt_id.clone();
        bundle.method_id = entry.method_id.clone();
        let got = bundle.dims();
        if got != want {
            return Err(CliError::Config(format!(
                "container {} has dims {got:?}, config declares {want:?}",
                entry.sample_id
            )));
        }
        bundles.push(bundle);
    }
    Ok((manifest, bundles))
}

/// Join containers with the labels file into training samples.
pub(crate) fn load_train_samples(
    config: &RunConfig,
) -> Result<(DatasetManifest, Vec<TrainSample<f32>>)> {
    let (manifest, bundles) = load_bundles(config)?;
    let labels = reports::read_labels(Path::new(&config.paths.labels), &manifest.dimension_names)?;
    let by_id: BTreeMap<&str, &hyperscore_core::stats::SampleLabel> =
        labels.iter().map(|l| (l.sample_id.as_str(), l)).collect();
    let mut samples = Vec::with_capacity(bundles.len());
    for bundle in &bundles {
        let label = by_id
            .get(bundle.sample_id.as_str())
            .ok_or_else(|| CliError::Data(format!("no label for sample {}", bundle.sample_id)))?;
        samples.push(TrainSample {
            sample_id: bundle.sample_id.clone(),
            prompt_id: bundle.prompt_id.clone(),
            prepared: PreparedSample::<f32>::from_bundle(bundle).map_err(CliError::from)?,
            targets: label.mos.iter().map(|&v| v as f32).collect(),
        });
    }
    Ok((manifest, samples))
}
