//! `gradcheck`: finite-difference verification of the backward pass on the
//! configured (tiny) dimensions. Exit status 3 when any group fails.

use hyperscore_core::gradcheck::{format_report, gradient_check, GradCheckSettings};
use hyperscore_core::model::ModelParams;
use hyperscore_core::train::{synth_teacher_dataset, synth_train_samples, SynthSpec, TrainSample};
use hyperscore_core::Scalar;

use crate::config::RunConfig;
use crate::error::{CliError, Result};

pub fn run(config: &RunConfig, _config_hash: u64) -> Result<()> {
    match config.gradcheck.precision.as_str() {
        "f64" => check::<f64>(config, GradCheckSettings::<f64>::for_f64()),
        "f32" => check::<f32>(config, GradCheckSettings::<f32>::for_f32()),
        other => Err(CliError::Config(format!(
            "gradcheck.precision must be 'f64' or 'f32', got '{other}'"
        ))),
    }
}

fn check<T: Scalar>(config: &RunConfig, settings: GradCheckSettings<T>) -> Result<()> {
    let model_cfg = config.dims.model_config();
    let spec = SynthSpec {
        prompt_count: 2,
        methods: vec!["m0".into()],
        feature_dims: config.dims.feature_dims(),
        seed: config.seed,
    };
    let data = synth_teacher_dataset::<T>(&spec, &model_cfg).map_err(CliError::from)?;
    let samples = synth_train_samples(&data).map_err(CliError::from)?;
    let refs: Vec<&TrainSample<T>> = samples.iter().collect();

    let model = ModelParams::<T>::init(&model_cfg, config.seed).map_err(CliError::from)?;
    let encoder = model_cfg
        .toy_encoder::<T>(config.seed)
        .map_err(CliError::from)?;

    let report = gradient_check(&model, &encoder, &refs, &settings).map_err(CliError::from)?;
    for line in format_report(&report) {
        println!("gradcheck: {line}");
    }
    let worst = report
        .worst()
        .map(|t| format!("{} ({:.3e})", t.name, t.worst_rel_err))
        .unwrap_or_default();
    println!(
        "gradcheck: {} parameters across {} tensors, precision {}, tolerance {:.0e}, worst {}",
        model.param_count(),
        report.tensors.len(),
        config.gradcheck.precision,
        settings.tolerance,
        worst
    );
    if report.pass {
        println!("gradcheck: PASS");
        Ok(())
    } else {
        Err(CliError::Numerical(format!(
            "gradient check failed: worst relative error {:.3e} in {}",
            report.max_rel_err, worst
        )))
    }
}
