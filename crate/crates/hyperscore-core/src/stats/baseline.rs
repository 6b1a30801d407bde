//! Zero-shot view-averaged cosine baseline.
//!
//! Per view: cosine between the mean patch feature and the raw EOT text
//! token, rescaled as `2.5 * max(cos, 0)`; the per-view scores are then
//! averaged. This is the single-score reference the learned evaluator is
//! compared against.

// Needed for f64 math in no_std builds; the test harness links std,
// whose inherent methods shadow these.
use alloc::vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};
use crate::feature::FeatureBundle;

const RESCALE: f64 = 2.5;

pub fn baseline_cosine_score(bundle: &FeatureBundle) -> Result<f64> {
    bundle.validate()?;
    let eot: alloc::vec::Vec<f64> = bundle.eot().iter().map(|&v| v as f64).collect();
    let eot_norm = eot.iter().map(|v| v * v).sum::<f64>().sqrt();
    if eot_norm < 1e-12 {
        return Err(Error::Degenerate("EOT token has near-zero norm".into()));
    }
    let d = bundle.text_tokens.cols();
    let mut acc = 0.0;
    for view in &bundle.views {
        let mut mean = vec![0.0f64; d];
        for p in 0..view.rows() {
            for (m, &v) in mean.iter_mut().zip(view.row(p)) {
                *m += v as f64;
            }
        }
        let inv = 1.0 / view.rows() as f64;
        for m in &mut mean {
            *m *= inv;
        }
        let mean_norm = mean.iter().map(|v| v * v).sum::<f64>().sqrt();
        if mean_norm < 1e-12 {
            return Err(Error::Degenerate(
                "view mean feature has near-zero norm".into(),
            ));
        }
        let cos = mean.iter().zip(&eot).map(|(a, b)| a * b).sum::<f64>() / (mean_norm * eot_norm);
        acc += RESCALE * cos.max(0.0);
    }
    Ok(acc / bundle.views.len() as f64)
}
