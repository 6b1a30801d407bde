//! Finite-difference verification of the analytic backward pass.
//!
//! Every trainable tensor entry is perturbed in turn and the loss is
//! re-evaluated; central differences are compared against the analytic
//! gradient. Intended for tiny configurations (the sweep re-runs the
//! forward pass twice per parameter).

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::condition::TextEncoder;
use crate::error::Result;
use crate::model::ModelParams;
use crate::scalar::Scalar;
use crate::train::{batch_loss, train_step, LossMode, SerialRunner, TrainSample};

#[derive(Clone, Copy, Debug)]
pub struct GradCheckSettings<T> {
    /// Central-difference step.
    pub step: T,
    /// Maximum accepted relative error.
    pub tolerance: f64,
    /// Relative-error denominator floor: entries smaller than this are
    /// compared on an absolute scale of `floor * tolerance`, keeping
    /// finite-difference noise from dominating near-zero gradients.
    pub denom_floor: f64,
    pub lambda: T,
    pub epsilon: T,
}

impl GradCheckSettings<f64> {
    pub fn for_f64() -> Self {
        Self {
            step: 1e-5,
            tolerance: 1e-4,
            denom_floor: 1e-6,
            lambda: 1.0,
            epsilon: 0.0,
        }
    }
}

impl GradCheckSettings<f32> {
    /// f32 mode: larger step against quantization noise, relaxed tolerance.
    pub fn for_f32() -> Self {
        Self {
            step: 2e-2,
            tolerance: 1e-2,
            denom_floor: 1e-3,
            lambda: 1.0,
            epsilon: 0.0,
        }
    }
}

/// Result for one parameter tensor.
#[derive(Clone, Debug, serde::Serialize)]
pub struct TensorReport {
    pub name: String,
    pub checked: usize,
    pub worst_rel_err: f64,
    pub worst_index: usize,
    pub pass: bool,
}

#[derive(Clone, Debug, serde::Serialize)]
pub struct GradCheckReport {
    pub tensors: Vec<TensorReport>,
    pub max_rel_err: f64,
    pub pass: bool,
}

impl GradCheckReport {
    pub fn worst(&self) -> Option<&TensorReport> {
        self.tensors
            .iter()
            .max_by(|a, b| a.worst_rel_err.total_cmp(&b.worst_rel_err))
    }
}

fn rel_err(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Check every trainable tensor of `model` on `batch`.
pub fn gradient_check<T: Scalar, E: TextEncoder<T>>(
    model: &ModelParams<T>,
    encoder: &E,
    batch: &[&TrainSample<T>],
    settings: &GradCheckSettings<T>,
) -> Result<GradCheckReport> {
    gradient_check_with(model, encoder, batch, settings, |_| {})
}

/// As [`gradient_check`], with a hook that may tamper with the analytic
/// gradients before comparison (negative-control testing).
pub fn gradient_check_with<T: Scalar, E: TextEncoder<T>>(
    model: &ModelParams<T>,
    encoder: &E,
    batch: &[&TrainSample<T>],
    settings: &GradCheckSettings<T>,
    tamper: impl FnOnce(&mut ModelParams<T>),
) -> Result<GradCheckReport> {
    let out = train_step(
        model,
        encoder,
        batch,
        settings.lambda,
        settings.epsilon,
        LossMode::Full,
        &SerialRunner,
    )?;
    let mut analytic = out.grads;
    tamper(&mut analytic);

    let mut working = model.clone();
    let h = settings.step;
    let names: Vec<String> = model.tensors().into_iter().map(|(n, _, _)| n).collect();
    let mut reports = Vec::with_capacity(names.len());
    let mut max_rel = 0.0f64;

    for (ti, name) in names.iter().enumerate() {
        let len = model.tensors()[ti].2.len();
        let mut worst = 0.0f64;
        let mut worst_index = 0usize;
        for j in 0..len {
            let orig = working.tensors()[ti].2.data()[j];
            set_entry(&mut working, ti, j, orig + h);
            let plus = batch_loss(
                &working,
                encoder,
                batch,
                settings.lambda,
                settings.epsilon,
                LossMode::Full,
            )?;
            set_entry(&mut working, ti, j, orig - h);
            let minus = batch_loss(
                &working,
                encoder,
                batch,
                settings.lambda,
                settings.epsilon,
                LossMode::Full,
            )?;
            set_entry(&mut working, ti, j, orig);
            let numeric = (plus.to_f64() - minus.to_f64()) / (2.0 * h.to_f64());
            let an = analytic.tensors()[ti].2.data()[j].to_f64();
            let e = rel_err(an, numeric, settings.denom_floor);
            if e > worst {
                worst = e;
                worst_index = j;
            }
        }
        max_rel = max_rel.max(worst);
        reports.push(TensorReport {
            name: name.clone(),
            checked: len,
            worst_rel_err: worst,
            worst_index,
            pass: worst < settings.tolerance,
        });
    }
    let pass = reports.iter().all(|r| r.pass);
    Ok(GradCheckReport {
        tensors: reports,
        max_rel_err: max_rel,
        pass,
    })
}

fn set_entry<T: Scalar>(model: &mut ModelParams<T>, tensor_index: usize, entry: usize, value: T) {
    let mut tensors = model.tensors_mut();
    tensors[tensor_index].2.data_mut()[entry] = value;
}

/// Human-readable one-line summary per tensor.
pub fn format_report(report: &GradCheckReport) -> Vec<String> {
    report
        .tensors
        .iter()
        .map(|t| {
            format!(
                "{} {:>10} entries={} worst_rel_err={:.3e} at {}",
                if t.pass { "ok " } else { "FAIL" },
                t.name,
                t.checked,
                t.worst_rel_err,
                t.worst_index
            )
        })
        .collect()
}
