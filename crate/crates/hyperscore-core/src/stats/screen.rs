//! Subjective-score screening and MOS computation.
//!
//! Screening runs in two consecutive stages, mirroring how the annotation
//! sessions are built:
//!
//! 1. **Trapping screen**: every session plants one extremely low-quality
//!    sentinel and one duplicated sample. A subject scoring the sentinel
//!    above `T_low`, or scoring the duplicate pair more than `T_dup` apart
//!    in any dimension, is rejected. This stage catches one-sidedly biased
//!    or inattentive raters.
//! 2. **BT.500 screen**: per stimulus, scores outside kurtosis-dependent
//!    bounds are counted per subject (`P` above, `Q` below, strict
//!    inequalities); a subject is rejected iff
//!    `(P + Q) / (N * K) > 0.05` and `|P - Q| / (P + Q) < 0.3`.
//!    The balance clause means this stage targets erratic raters whose
//!    deviations go both ways; consistently one-sided raters are left to
//!    the trapping stage.
//!
//! MOS is the per-sample, per-dimension arithmetic mean over the retained
//! subjects.

// Needed for f64 math in no_std builds; the test harness links std,
// whose inherent methods shadow these.
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
#[cfg_attr(test, allow(unused_imports))]
use num_traits::Float;

use crate::error::{Error, Result};

/// Raw subject scores on the 11-level scale: `S x N x K` integers in 0..=10.
#[derive(Clone, Debug, PartialEq)]
pub struct AnnotationMatrix {
    pub subject_ids: Vec<String>,
    pub sample_ids: Vec<String>,
    pub dimension_names: Vec<String>,
    /// Flattened `[subject][sample][dimension]`.
    pub scores: Vec<u8>,
    pub trapping: Option<TrappingInfo>,
}

/// Which samples are trapping stimuli.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrappingInfo {
    /// The extremely low-quality sentinel.
    pub sentinel: String,
    /// The duplicated pair (original, repeat).
    pub duplicate: (String, String),
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrappingConfig {
    /// Reject when the sentinel is scored strictly above this.
    pub low_threshold: u8,
    /// Reject when the duplicate pair differs by strictly more than this.
    pub dup_threshold: u8,
}

impl Default for TrappingConfig {
    fn default() -> Self {
        Self {
            low_threshold: 3,
            dup_threshold: 3,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Bt500Config {
    pub exceed_ratio: f64,
    pub balance_threshold: f64,
    /// Bound width when the kurtosis looks normal.
    pub normal_sigma: f64,
    /// Bound width otherwise (sqrt 20).
    pub other_sigma: f64,
    pub kurtosis_low: f64,
    pub kurtosis_high: f64,
}

impl Default for Bt500Config {
    fn default() -> Self {
        Self {
            exceed_ratio: 0.05,
            balance_threshold: 0.3,
            normal_sigma: 2.0,
            other_sigma: libm::sqrt(20.0),
            kurtosis_low: 2.0,
            kurtosis_high: 4.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct RejectedSubject {
    pub subject_id: String,
    pub rule: String,
}

/// Result of one screening stage: retained subject indices plus who was
/// rejected and why.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ScreeningOutcome {
    pub retained: Vec<usize>,
    pub rejected: Vec<RejectedSubject>,
}

impl AnnotationMatrix {
    pub fn subject_count(&self) -> usize {
        self.subject_ids.len()
    }

    pub fn sample_count(&self) -> usize {
        self.sample_ids.len()
    }

    pub fn dim_count(&self) -> usize {
        self.dimension_names.len()
    }

    #[inline]
    pub fn score(&self, subject: usize, sample: usize, dim: usize) -> u8 {
        self.scores[(subject * self.sample_count() + sample) * self.dim_count() + dim]
    }

    pub fn validate(&self) -> Result<()> {
        let want = self.subject_count() * self.sample_count() * self.dim_count();
        if self.scores.len() != want {
            return Err(Error::Dimension {
                context: "annotation matrix payload",
                expected: want,
                got: self.scores.len(),
            });
        }
        if let Some(bad) = self.scores.iter().find(|&&s| s > 10) {
            return Err(Error::Data(format!(
                "score {bad} outside the 11-level scale"
            )));
        }
        if let Some(info) = &self.trapping {
            for id in [&info.sentinel, &info.duplicate.0, &info.duplicate.1] {
                if !self.sample_ids.iter().any(|s| s == id) {
                    return Err(Error::Config(format!("trapping sample {id} not in matrix")));
                }
            }
        }
        Ok(())
    }

    fn sample_index(&self, id: &str) -> Result<usize> {
        self.sample_ids
            .iter()
            .position(|s| s == id)
            .ok_or_else(|| Error::Config(format!("sample {id} not in matrix")))
    }
}

/// Stage 1: trapping-sample screen over all subjects.
pub fn screen_trapping(
    matrix: &AnnotationMatrix,
    cfg: &TrappingConfig,
) -> Result<ScreeningOutcome> {
    matrix.validate()?;
    let info = matrix
        .trapping
        .as_ref()
        .ok_or_else(|| Error::Config("annotation matrix carries no trapping flags".into()))?;
    let sentinel = matrix.sample_index(&info.sentinel)?;
    let dup_a = matrix.sample_index(&info.duplicate.0)?;
    let dup_b = matrix.sample_index(&info.duplicate.1)?;

    let mut retained = Vec::new();
    let mut rejected = Vec::new();
    for s in 0..matrix.subject_count() {
        let mut rule = None;
        for k in 0..matrix.dim_count() {
            let low = matrix.score(s, sentinel, k);
            if low > cfg.low_threshold {
                rule = Some(format!(
                    "sentinel scored {low} > {} in {}",
                    cfg.low_threshold, matrix.dimension_names[k]
                ));
                break;
            }
            let gap = matrix
                .score(s, dup_a, k)
                .abs_diff(matrix.score(s, dup_b, k));
            if gap > cfg.dup_threshold {
                rule = Some(format!(
                    "duplicate gap {gap} > {} in {}",
                    cfg.dup_threshold, matrix.dimension_names[k]
                ));
                break;
            }
        }
        match rule {
            Some(rule) => rejected.push(RejectedSubject {
                subject_id: matrix.subject_ids[s].clone(),
                rule,
            }),
            None => retained.push(s),
        }
    }
    Ok(ScreeningOutcome { retained, rejected })
}

/// Stage 2: the BT.500 screen, evaluated over `subjects` (bounds are
/// computed from exactly those subjects' scores).
pub fn screen_bt500(
    matrix: &AnnotationMatrix,
    subjects: &[usize],
    cfg: &Bt500Config,
) -> Result<ScreeningOutcome> {
    matrix.validate()?;
    if subjects.len() < 3 {
        return Err(Error::Config(format!(
            "BT.500 screening needs at least 3 subjects, got {}",
            subjects.len()
        )));
    }
    let n = matrix.sample_count();
    let k = matrix.dim_count();

    // Per-stimulus bounds.
    let mut bounds = Vec::with_capacity(n * k);
    for sample in 0..n {
        for dim in 0..k {
            let vals: Vec<f64> = subjects
                .iter()
                .map(|&s| matrix.score(s, sample, dim) as f64)
                .collect();
            let count = vals.len() as f64;
            let mean = vals.iter().sum::<f64>() / count;
            let m2 = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / count;
            let m4 = vals.iter().map(|v| (v - mean).powi(4)).sum::<f64>() / count;
            let sample_var = vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (count - 1.0);
            let std = sample_var.sqrt();
            let kurtosis = if m2 > 0.0 { m4 / (m2 * m2) } else { 0.0 };
            let width = if kurtosis >= cfg.kurtosis_low && kurtosis <= cfg.kurtosis_high {
                cfg.normal_sigma
            } else {
                cfg.other_sigma
            };
            bounds.push((mean - width * std, mean + width * std));
        }
    }

    let total = (n * k) as f64;
    let mut retained = Vec::new();
    let mut rejected = Vec::new();
    for &s in subjects {
        let mut above = 0usize;
        let mut below = 0usize;
        for sample in 0..n {
            for dim in 0..k {
                let (lo, hi) = bounds[sample * k + dim];
                let v = matrix.score(s, sample, dim) as f64;
                if v > hi {
                    above += 1;
                } else if v < lo {
                    below += 1;
                }
            }
        }
        let exceed = (above + below) as f64 / total;
        let balance = if above + below > 0 {
            (above as f64 - below as f64).abs() / (above + below) as f64
        } else {
            1.0
        };
        if exceed > cfg.exceed_ratio && balance < cfg.balance_threshold {
            rejected.push(RejectedSubject {
                subject_id: matrix.subject_ids[s].clone(),
                rule: format!(
                    "exceedance {:.3} > {} with balance {:.3} < {} (P={above}, Q={below})",
                    exceed, cfg.exceed_ratio, balance, cfg.balance_threshold
                ),
            });
        } else {
            retained.push(s);
        }
    }
    Ok(ScreeningOutcome { retained, rejected })
}

/// Both stages in order. The trapping stage is skipped (with a note) when
/// no trapping configuration is supplied.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct ScreeningReport {
    pub trapping: Option<ScreeningOutcome>,
    pub bt500: ScreeningOutcome,
    pub retained: Vec<usize>,
}

pub fn screen_pipeline(
    matrix: &AnnotationMatrix,
    trapping: Option<&TrappingConfig>,
    bt500: &Bt500Config,
) -> Result<ScreeningReport> {
    let (trapping_outcome, survivors): (Option<ScreeningOutcome>, Vec<usize>) = match trapping {
        Some(cfg) => {
            let outcome = screen_trapping(matrix, cfg)?;
            let survivors = outcome.retained.clone();
            (Some(outcome), survivors)
        }
        None => (None, (0..matrix.subject_count()).collect()),
    };
    let bt = screen_bt500(matrix, &survivors, bt500)?;
    let retained = bt.retained.clone();
    Ok(ScreeningReport {
        trapping: trapping_outcome,
        bt500: bt,
        retained,
    })
}

/// Screened per-sample labels.
#[derive(Clone, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SampleLabel {
    pub sample_id: String,
    /// Per-dimension mean opinion score, in rating-scale units.
    pub mos: Vec<f64>,
    pub retained_subject_count: usize,
}

/// Arithmetic mean over the retained subjects, per sample and dimension.
pub fn compute_mos(matrix: &AnnotationMatrix, retained: &[usize]) -> Result<Vec<SampleLabel>> {
    matrix.validate()?;
    if retained.is_empty() {
        return Err(Error::Config("no subjects retained".into()));
    }
    if let Some(&bad) = retained.iter().find(|&&s| s >= matrix.subject_count()) {
        return Err(Error::Config(format!("subject index {bad} out of range")));
    }
    let count = retained.len() as f64;
    Ok((0..matrix.sample_count())
        .map(|sample| {
            let mos = (0..matrix.dim_count())
                .map(|dim| {
                    retained
                        .iter()
                        .map(|&s| matrix.score(s, sample, dim) as f64)
                        .sum::<f64>()
                        / count
                })
                .collect();
            SampleLabel {
                sample_id: matrix.sample_ids[sample].clone(),
                mos,
                retained_subject_count: retained.len(),
            }
        })
        .collect())
}
