//! Training: batched forward/backward steps, the prompt-disjoint
//! cross-validation harness, and the synthetic teacher dataset.
//!
//! Single-threaded training with a fixed seed is bit-reproducible. An
//! opt-in runner may evaluate per-sample forward/backward concurrently;
//! gradients are always reduced in sample order, so the result does not
//! depend on the worker count.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::adam::{adam_step, lr_at_epoch, AdamConfig, AdamState, GroupLr};
use crate::condition::TextEncoder;
use crate::error::{Error, Result};
use crate::feature::{
    synth_toy_bundle, DatasetManifest, FeatureBundle, FeatureDims, ManifestEntry, PROMPT_CATEGORIES,
};
use crate::loss::{disentangle_grad, loss_disentangle, loss_regression, loss_total};
use crate::model::{
    condition_backward, condition_forward, predict_all, predict_prepared, sample_backward,
    score_sample, ModelConfig, ModelParams, PreparedSample, SampleGrad,
};
use crate::rng::SeqRng;
use crate::scalar::Scalar;
use crate::stats::{krcc, plcc, srcc};

/// Which terms drive the gradient.
#[derive(Clone, Copy, Debug, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LossMode {
    /// `L = L_reg + lambda * L_dis`.
    Full,
    /// Disentangling term only (the lambda-to-infinity limit).
    DisentangleOnly,
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct TrainConfig<T> {
    pub batch_size: usize,
    pub epochs: usize,
    pub lr_main: T,
    pub lr_encoder: T,
    pub lr_decay: T,
    pub decay_every: usize,
    pub lambda: T,
    pub epsilon: T,
    pub folds: usize,
    pub seed: u64,
    pub loss_mode: LossMode,
    pub adam: AdamConfig<T>,
}

impl<T: Scalar> TrainConfig<T> {
    /// The reference training recipe: 30 epochs, batch 8, Adam at 2e-4
    /// (2e-6 for an encoder adapter), decayed by 0.9 every 5 epochs,
    /// lambda 1, epsilon 0, 5 folds.
    pub fn reference_defaults(seed: u64) -> Self {
        Self {
            batch_size: 8,
            epochs: 30,
            lr_main: T::from_f64(2e-4),
            lr_encoder: T::from_f64(2e-6),
            lr_decay: T::from_f64(0.9),
            decay_every: 5,
            lambda: T::one(),
            epsilon: T::zero(),
            folds: 5,
            seed,
            loss_mode: LossMode::Full,
            adam: AdamConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.batch_size == 0 {
            return Err(Error::Argument("batch_size must be >= 1".into()));
        }
        if self.lr_main <= T::zero() || self.lr_encoder <= T::zero() {
            return Err(Error::Argument("learning rates must be positive".into()));
        }
        Ok(())
    }

    fn group_lr(&self, epoch: usize) -> GroupLr<T> {
        GroupLr {
            main: lr_at_epoch(self.lr_main, self.lr_decay, self.decay_every, epoch),
            encoder: lr_at_epoch(self.lr_encoder, self.lr_decay, self.decay_every, epoch),
        }
    }
}

/// One labeled training sample.
pub struct TrainSample<T> {
    pub sample_id: String,
    pub prompt_id: String,
    pub prepared: PreparedSample<T>,
    pub targets: Vec<T>,
}

/// Strategy for evaluating independent per-sample jobs. Results come back
/// in job order regardless of scheduling.
pub trait BatchRunner: Sync {
    fn run<O: Send>(&self, jobs: usize, f: &(dyn Fn(usize) -> O + Sync)) -> Vec<O>;
}

/// Evaluates jobs in order on the calling thread.
pub struct SerialRunner;

impl BatchRunner for SerialRunner {
    fn run<O: Send>(&self, jobs: usize, f: &(dyn Fn(usize) -> O + Sync)) -> Vec<O> {
        (0..jobs).map(f).collect()
    }
}

/// Losses, predictions, and parameter gradients of one batch.
pub struct StepOutput<T> {
    pub grads: ModelParams<T>,
    pub loss_reg: T,
    pub loss_dis: T,
    pub loss: T,
    pub preds: Vec<Vec<T>>,
    pub dis_warned: bool,
}

/// Forward + analytic backward over one batch.
pub fn train_step<T: Scalar, E: TextEncoder<T>, R: BatchRunner>(
    model: &ModelParams<T>,
    encoder: &E,
    batch: &[&TrainSample<T>],
    lambda: T,
    epsilon: T,
    mode: LossMode,
    runner: &R,
) -> Result<StepOutput<T>> {
    if batch.is_empty() {
        return Err(Error::Argument("empty batch".into()));
    }
    let k = model.dim_count();
    let b = batch.len();
    let cond = condition_forward(model, encoder)?;

    let per_sample: Vec<Result<(Vec<T>, SampleGrad<T>)>> = runner.run(b, &|idx| {
        let sample = batch[idx];
        if sample.targets.len() != k {
            return Err(Error::Dimension {
                context: "sample targets",
                expected: k,
                got: sample.targets.len(),
            });
        }
        let (scores, trace) = score_sample(&sample.prepared, &cond, &model.mlp)?;
        let d_scores: Vec<T> = match mode {
            LossMode::Full => {
                let denom = T::from_usize(b * k);
                let two = T::from_f64(2.0);
                scores
                    .iter()
                    .zip(&sample.targets)
                    .map(|(&p, &t)| two * (p - t) / denom)
                    .collect()
            }
            LossMode::DisentangleOnly => alloc::vec![T::zero(); k],
        };
        let grad = sample_backward(&sample.prepared, &cond, &model.mlp, &trace, &d_scores);
        Ok((scores, grad))
    });

    let mut grads = model.zeros_like();
    let mut preds = Vec::with_capacity(b);
    let mut head_grads: Vec<crate::hypernet::MappingHeadParams<T>> = cond
        .heads
        .iter()
        .map(|h| {
            let mut dims: Vec<usize> = h.weights.iter().map(|w| w.rows()).collect();
            dims.push(1);
            crate::hypernet::MappingHeadParams::zeros(&dims)
        })
        .collect();
    let d = model.prompts.feat_dim();
    let mut cond_norm_grads = alloc::vec![alloc::vec![T::zero(); d]; k];

    // Fixed-order reduction keeps results independent of the runner.
    for result in per_sample {
        let (scores, grad) = result?;
        preds.push(scores);
        add_mlp(&mut grads.mlp, &grad.mlp);
        for (acc, g) in head_grads.iter_mut().zip(&grad.heads) {
            acc.add(g);
        }
        for (acc, g) in cond_norm_grads.iter_mut().zip(&grad.cond_norm) {
            for (a, &v) in acc.iter_mut().zip(g) {
                *a = *a + v;
            }
        }
    }

    let targets: Vec<Vec<T>> = batch.iter().map(|s| s.targets.clone()).collect();
    let loss_reg = loss_regression(&preds, &targets)?;
    let dis = loss_disentangle(&cond.features, epsilon)?;
    let mut cond_raw_grads = disentangle_grad(&cond.features, epsilon)?;
    let loss = match mode {
        LossMode::Full => {
            for g in cond_raw_grads.iter_mut().flatten() {
                *g = *g * lambda;
            }
            loss_total(loss_reg, dis.value, lambda)
        }
        LossMode::DisentangleOnly => dis.value,
    };

    condition_backward(
        model,
        encoder,
        &cond,
        &head_grads,
        &cond_norm_grads,
        &cond_raw_grads,
        &mut grads,
    )?;

    if let Some(name) = grads.first_non_finite() {
        return Err(Error::Numerical {
            tensor: name,
            reason: "non-finite gradient",
        });
    }

    Ok(StepOutput {
        grads,
        loss_reg,
        loss_dis: dis.value,
        loss,
        preds,
        dis_warned: dis.warned,
    })
}

/// Loss of one batch without gradients (finite-difference probes).
pub fn batch_loss<T: Scalar, E: TextEncoder<T>>(
    model: &ModelParams<T>,
    encoder: &E,
    batch: &[&TrainSample<T>],
    lambda: T,
    epsilon: T,
    mode: LossMode,
) -> Result<T> {
    let cond = condition_forward(model, encoder)?;
    let mut preds = Vec::with_capacity(batch.len());
    for sample in batch {
        let (scores, _) = score_sample(&sample.prepared, &cond, &model.mlp)?;
        preds.push(scores);
    }
    let targets: Vec<Vec<T>> = batch.iter().map(|s| s.targets.clone()).collect();
    let loss_reg = loss_regression(&preds, &targets)?;
    let dis = loss_disentangle(&cond.features, epsilon)?;
    Ok(match mode {
        LossMode::Full => loss_total(loss_reg, dis.value, lambda),
        LossMode::DisentangleOnly => dis.value,
    })
}

/// Gradient of the disentangling loss alone with respect to the learnable
/// tokens (the lambda-to-infinity mode, no samples involved).
pub fn disentangle_only_grads<T: Scalar, E: TextEncoder<T>>(
    model: &ModelParams<T>,
    encoder: &E,
    epsilon: T,
) -> Result<ModelParams<T>> {
    let features = crate::condition::encode_conditions(&model.prompts, encoder)?;
    let feature_grads = disentangle_grad(&features, epsilon)?;
    let token_grads =
        crate::condition::condition_token_grads(&model.prompts, encoder, &feature_grads)?;
    let mut grads = model.zeros_like();
    grads
        .prompts
        .learnable
        .data_mut()
        .copy_from_slice(token_grads.data());
    Ok(grads)
}

fn add_mlp<T: Scalar>(acc: &mut crate::fusion::FusionMlp<T>, g: &crate::fusion::FusionMlp<T>) {
    for (a, b) in [
        (&mut acc.w1, &g.w1),
        (&mut acc.b1, &g.b1),
        (&mut acc.w2, &g.w2),
        (&mut acc.b2, &g.b2),
    ] {
        for (x, &y) in a.data_mut().iter_mut().zip(b.data()) {
            *x = *x + y;
        }
    }
}

/// One cross-validation fold: disjoint train/test prompt sets.
#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct Fold {
    pub train_prompts: Vec<String>,
    pub test_prompts: Vec<String>,
}

/// Split prompts into `k` folds with no overlap: every prompt appears in
/// exactly one test fold; the remainder is distributed one per fold.
pub fn crossval_split(prompt_ids: &[String], k: usize, seed: u64) -> Result<Vec<Fold>> {
    let mut unique: Vec<String> = Vec::new();
    let mut seen = alloc::collections::BTreeSet::new();
    for p in prompt_ids {
        if seen.insert(p.clone()) {
            unique.push(p.clone());
        }
    }
    let n = unique.len();
    if k < 2 || k > n {
        return Err(Error::Argument(format!(
            "fold count {k} invalid for {n} prompts"
        )));
    }
    let mut rng = SeqRng::new(seed ^ 0x5157_F01D);
    rng.shuffle(&mut unique);

    let base = n / k;
    let rem = n % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0usize;
    for f in 0..k {
        let take = base + usize::from(f < rem);
        let test: Vec<String> = unique[start..start + take].to_vec();
        let train: Vec<String> = unique[..start]
            .iter()
            .chain(&unique[start + take..])
            .cloned()
            .collect();
        folds.push(Fold {
            train_prompts: train,
            test_prompts: test,
        });
        start += take;
    }
    Ok(folds)
}

/// Per-epoch training record.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct EpochRecord<T> {
    pub epoch: usize,
    pub loss_reg: T,
    pub loss_dis: T,
    pub loss: T,
    pub lr_main: T,
    pub lr_encoder: T,
}

/// Correlations between predictions and targets for one dimension.
/// `None` marks an undefined coefficient (degenerate variance in the fold).
#[derive(Clone, Copy, Debug, Default, PartialEq, serde::Serialize)]
pub struct DimMetrics {
    pub plcc: Option<f64>,
    pub srcc: Option<f64>,
    pub krcc: Option<f64>,
}

/// Outcome of one training run.
pub struct SingleRun<T> {
    pub final_model: ModelParams<T>,
    /// Snapshot at the epoch with minimal training loss.
    pub best_model: ModelParams<T>,
    pub best_epoch: usize,
    pub epochs: Vec<EpochRecord<T>>,
}

/// Train one model on the given samples. `shuffle_salt` decorrelates epoch
/// shuffles across folds while keeping the run deterministic.
pub fn train_single<T: Scalar, E: TextEncoder<T>, R: BatchRunner>(
    samples: &[&TrainSample<T>],
    cfg: &ModelConfig,
    tcfg: &TrainConfig<T>,
    encoder: &E,
    runner: &R,
    shuffle_salt: u64,
) -> Result<SingleRun<T>> {
    tcfg.validate()?;
    if samples.is_empty() {
        return Err(Error::Config("no training samples".into()));
    }
    let mut model = ModelParams::init(cfg, tcfg.seed)?;
    let mut state = AdamState::new(&model);
    let mut best: Option<(T, usize, ModelParams<T>)> = None;
    let mut records = Vec::with_capacity(tcfg.epochs);

    for epoch in 0..tcfg.epochs {
        let lr = tcfg.group_lr(epoch);
        let mut order: Vec<usize> = (0..samples.len()).collect();
        let mut rng = SeqRng::new(
            tcfg.seed ^ shuffle_salt.wrapping_mul(0x9E37_79B9) ^ ((epoch as u64) << 20),
        );
        rng.shuffle(&mut order);

        let (mut reg_acc, mut dis_acc, mut tot_acc) = (T::zero(), T::zero(), T::zero());
        for chunk in order.chunks(tcfg.batch_size) {
            let batch: Vec<&TrainSample<T>> = chunk.iter().map(|&i| samples[i]).collect();
            let out = train_step(
                &model,
                encoder,
                &batch,
                tcfg.lambda,
                tcfg.epsilon,
                tcfg.loss_mode,
                runner,
            )?;
            adam_step(&mut model, &out.grads, &mut state, &tcfg.adam, lr)?;
            let w = T::from_usize(chunk.len());
            reg_acc = reg_acc + out.loss_reg * w;
            dis_acc = dis_acc + out.loss_dis * w;
            tot_acc = tot_acc + out.loss * w;
        }
        let n = T::from_usize(samples.len());
        let record = EpochRecord {
            epoch,
            loss_reg: reg_acc / n,
            loss_dis: dis_acc / n,
            loss: tot_acc / n,
            lr_main: lr.main,
            lr_encoder: lr.encoder,
        };
        records.push(record);
        let better = match &best {
            Some((loss, _, _)) => record.loss < *loss,
            None => true,
        };
        if better {
            best = Some((record.loss, epoch, model.clone()));
        }
    }
    let (_, best_epoch, best_model) = best.expect("at least one epoch");
    Ok(SingleRun {
        final_model: model,
        best_model,
        best_epoch,
        epochs: records,
    })
}

/// Predictions and per-dimension correlations on an evaluation set.
pub fn evaluate<T: Scalar, E: TextEncoder<T>>(
    model: &ModelParams<T>,
    encoder: &E,
    samples: &[&TrainSample<T>],
) -> Result<(Vec<Vec<T>>, Vec<DimMetrics>)> {
    if samples.is_empty() {
        return Err(Error::Config("empty evaluation set".into()));
    }
    let k = model.dim_count();
    let mut preds = Vec::with_capacity(samples.len());
    for sample in samples {
        preds.push(predict_prepared(&sample.prepared, model, encoder)?);
    }
    let mut metrics = Vec::with_capacity(k);
    for dim in 0..k {
        let x: Vec<f64> = preds.iter().map(|p| p[dim].to_f64()).collect();
        let y: Vec<f64> = samples.iter().map(|s| s.targets[dim].to_f64()).collect();
        metrics.push(DimMetrics {
            plcc: plcc(&x, &y).ok(),
            srcc: srcc(&x, &y).ok(),
            krcc: krcc(&x, &y).ok(),
        });
    }
    Ok((preds, metrics))
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FoldReport<T> {
    pub fold: usize,
    pub best_epoch: usize,
    pub epochs: Vec<EpochRecord<T>>,
    pub test_metrics: Vec<DimMetrics>,
}

#[derive(Clone, Debug, PartialEq, serde::Serialize)]
pub struct FitReport<T> {
    pub folds: Vec<FoldReport<T>>,
    /// Per-dimension metrics averaged over folds where they are defined.
    pub mean_metrics: Vec<DimMetrics>,
}

pub struct FitOutcome<T> {
    pub report: FitReport<T>,
    /// Per-fold snapshot at minimal training loss.
    pub fold_models: Vec<ModelParams<T>>,
}

/// K-fold prompt-disjoint cross-validation. Per fold: train, snapshot the
/// model at minimal training loss, evaluate that snapshot on the fold's
/// test set; the report averages fold metrics.
pub fn fit<T: Scalar, E: TextEncoder<T>, R: BatchRunner>(
    samples: &[TrainSample<T>],
    cfg: &ModelConfig,
    tcfg: &TrainConfig<T>,
    encoder: &E,
    runner: &R,
) -> Result<FitOutcome<T>> {
    if samples.is_empty() {
        return Err(Error::Config("dataset is empty".into()));
    }
    let k = cfg.dim_count();
    for s in samples {
        if s.targets.len() != k {
            return Err(Error::Config(format!(
                "sample {} has {} labels, expected {k}",
                s.sample_id,
                s.targets.len()
            )));
        }
    }
    let prompts: Vec<String> = samples.iter().map(|s| s.prompt_id.clone()).collect();
    let folds = crossval_split(&prompts, tcfg.folds, tcfg.seed)?;

    let mut fold_reports = Vec::with_capacity(folds.len());
    let mut fold_models = Vec::with_capacity(folds.len());
    for (f, fold) in folds.iter().enumerate() {
        let test_set: alloc::collections::BTreeSet<&str> =
            fold.test_prompts.iter().map(|s| s.as_str()).collect();
        let train: Vec<&TrainSample<T>> = samples
            .iter()
            .filter(|s| !test_set.contains(s.prompt_id.as_str()))
            .collect();
        let test: Vec<&TrainSample<T>> = samples
            .iter()
            .filter(|s| test_set.contains(s.prompt_id.as_str()))
            .collect();
        if train.is_empty() || test.is_empty() {
            return Err(Error::Config(format!("fold {f} has an empty split")));
        }
        let run = train_single(&train, cfg, tcfg, encoder, runner, f as u64)?;
        let (_, metrics) = evaluate(&run.best_model, encoder, &test)?;
        fold_reports.push(FoldReport {
            fold: f,
            best_epoch: run.best_epoch,
            epochs: run.epochs,
            test_metrics: metrics,
        });
        fold_models.push(run.best_model);
    }

    let mean_metrics = (0..k)
        .map(|dim| DimMetrics {
            plcc: mean_defined(fold_reports.iter().map(|r| r.test_metrics[dim].plcc)),
            srcc: mean_defined(fold_reports.iter().map(|r| r.test_metrics[dim].srcc)),
            krcc: mean_defined(fold_reports.iter().map(|r| r.test_metrics[dim].krcc)),
        })
        .collect();

    Ok(FitOutcome {
        report: FitReport {
            folds: fold_reports,
            mean_metrics,
        },
        fold_models,
    })
}

fn mean_defined(values: impl Iterator<Item = Option<f64>>) -> Option<f64> {
    let defined: Vec<f64> = values.flatten().collect();
    if defined.is_empty() {
        None
    } else {
        Some(defined.iter().sum::<f64>() / defined.len() as f64)
    }
}

/// Synthetic dataset request.
#[derive(Clone, Debug)]
pub struct SynthSpec {
    pub prompt_count: usize,
    pub methods: Vec<String>,
    pub feature_dims: FeatureDims,
    pub seed: u64,
}

/// A toy dataset labeled by a frozen random teacher of the same family.
/// Labels are the teacher's raw scores.
pub struct SynthDataset<T> {
    pub manifest: DatasetManifest,
    pub bundles: Vec<FeatureBundle>,
    pub labels: Vec<Vec<T>>,
    pub teacher: ModelParams<T>,
}

/// Seed used for the teacher's parameters; derived so the teacher differs
/// from a student initialized with the run seed.
pub fn teacher_seed(seed: u64) -> u64 {
    seed ^ 0x7EAC_4E5D_0000_0001
}

pub fn synth_teacher_dataset<T: Scalar>(
    spec: &SynthSpec,
    cfg: &ModelConfig,
) -> Result<SynthDataset<T>> {
    if spec.prompt_count == 0 || spec.methods.is_empty() {
        return Err(Error::Argument(
            "need at least one prompt and method".into(),
        ));
    }
    if spec.feature_dims.feat_dim != cfg.feat_dim {
        return Err(Error::Config(format!(
            "feature width {} does not match model feat_dim {}",
            spec.feature_dims.feat_dim, cfg.feat_dim
        )));
    }
    let teacher = ModelParams::<T>::init(cfg, teacher_seed(spec.seed))?;
    let encoder = cfg.toy_encoder::<T>(spec.seed)?;

    let mut manifest = DatasetManifest {
        samples: Vec::new(),
        prompt_categories: alloc::collections::BTreeMap::new(),
        dimension_names: cfg.dimension_names.clone(),
    };
    let mut bundles = Vec::new();
    let mut labels = Vec::new();
    for p in 0..spec.prompt_count {
        let prompt_id = format!("p{p:03}");
        manifest.prompt_categories.insert(
            prompt_id.clone(),
            String::from(PROMPT_CATEGORIES[p % PROMPT_CATEGORIES.len()]),
        );
        for method in &spec.methods {
            let sample_id = format!("{prompt_id}-{method}");
            let sample_seed = spec
                .seed
                .wrapping_add((bundles.len() as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15));
            let mut bundle = synth_toy_bundle(sample_seed, &spec.feature_dims)?;
            bundle.sample_id = sample_id.clone();
            bundle.prompt_id = prompt_id.clone();
            bundle.method_id = method.clone();
            let scores = predict_all(&bundle, &teacher, &encoder)?;
            manifest.samples.push(ManifestEntry {
                sample_id: sample_id.clone(),
                prompt_id: prompt_id.clone(),
                method_id: method.clone(),
                feature_path: format!("{sample_id}.hsf"),
            });
            bundles.push(bundle);
            labels.push(scores);
        }
    }
    manifest.validate()?;
    Ok(SynthDataset {
        manifest,
        bundles,
        labels,
        teacher,
    })
}

/// Turn a synthetic dataset into training samples.
pub fn synth_train_samples<T: Scalar>(data: &SynthDataset<T>) -> Result<Vec<TrainSample<T>>> {
    data.bundles
        .iter()
        .zip(&data.labels)
        .map(|(b, l)| {
            Ok(TrainSample {
                sample_id: b.sample_id.clone(),
                prompt_id: b.prompt_id.clone(),
                prepared: PreparedSample::from_bundle(b)?,
                targets: l.clone(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::string::ToString;
    use alloc::vec;

    fn prompt_ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("p{i:03}")).collect()
    }

    #[test]
    fn folds_partition_the_prompt_set() {
        let prompts = prompt_ids(23);
        let folds = crossval_split(&prompts, 5, 9).unwrap();
        let mut seen = alloc::collections::BTreeSet::new();
        for fold in &folds {
            for p in &fold.test_prompts {
                assert!(seen.insert(p.clone()), "{p} tested twice");
                assert!(!fold.train_prompts.contains(p));
            }
            assert_eq!(fold.train_prompts.len() + fold.test_prompts.len(), 23);
        }
        assert_eq!(seen.len(), 23);
        // 23 = 5 folds of 4/5: remainder spread one per fold
        let sizes: Vec<usize> = folds.iter().map(|f| f.test_prompts.len()).collect();
        assert_eq!(sizes, vec![5, 5, 5, 4, 4]);
    }

    #[test]
    fn paper_split_shape() {
        let folds = crossval_split(&prompt_ids(160), 5, 3).unwrap();
        for fold in &folds {
            assert_eq!(fold.train_prompts.len(), 128);
            assert_eq!(fold.test_prompts.len(), 32);
        }
    }

    #[test]
    fn leave_one_out_allowed_and_oversized_k_rejected() {
        let prompts = prompt_ids(6);
        let folds = crossval_split(&prompts, 6, 1).unwrap();
        assert!(folds.iter().all(|f| f.test_prompts.len() == 1));
        assert!(crossval_split(&prompts, 7, 1).is_err());
        assert!(crossval_split(&prompts, 1, 1).is_err());
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let prompts = prompt_ids(30);
        assert_eq!(
            crossval_split(&prompts, 5, 4).unwrap(),
            crossval_split(&prompts, 5, 4).unwrap()
        );
        assert_ne!(
            crossval_split(&prompts, 5, 4).unwrap(),
            crossval_split(&prompts, 5, 5).unwrap()
        );
    }

    fn tiny_dataset(n_prompts: usize) -> (ModelConfig, SynthDataset<f64>) {
        let cfg = ModelConfig::tiny();
        let spec = SynthSpec {
            prompt_count: n_prompts,
            methods: vec!["m0".to_string(), "m1".to_string()],
            feature_dims: FeatureDims {
                views: 2,
                patches: 4,
                text_len: 3,
                feat_dim: cfg.feat_dim,
            },
            seed: 21,
        };
        let data = synth_teacher_dataset::<f64>(&spec, &cfg).unwrap();
        (cfg, data)
    }

    #[test]
    fn teacher_labels_are_reproducible() {
        let (cfg, data) = tiny_dataset(4);
        let encoder = cfg.toy_encoder::<f64>(21).unwrap();
        for (bundle, label) in data.bundles.iter().zip(&data.labels) {
            let again = predict_all(bundle, &data.teacher, &encoder).unwrap();
            assert_eq!(&again, label);
        }
    }

    #[test]
    fn zero_lr_rejected_but_tiny_lr_keeps_losses_finite() {
        let (cfg, data) = tiny_dataset(4);
        let samples = synth_train_samples(&data).unwrap();
        let refs: Vec<&TrainSample<f64>> = samples.iter().collect();
        let encoder = cfg.toy_encoder::<f64>(21).unwrap();
        let mut tcfg = TrainConfig::<f64>::reference_defaults(21);
        tcfg.epochs = 2;
        tcfg.lr_main = 0.0;
        assert!(train_single(&refs, &cfg, &tcfg, &encoder, &SerialRunner, 0).is_err());
    }

    #[test]
    fn frozen_parts_never_move_during_training() {
        let (cfg, data) = tiny_dataset(4);
        let samples = synth_train_samples(&data).unwrap();
        let refs: Vec<&TrainSample<f64>> = samples.iter().collect();
        let encoder = cfg.toy_encoder::<f64>(21).unwrap();
        let mut tcfg = TrainConfig::<f64>::reference_defaults(21);
        tcfg.epochs = 2;
        tcfg.lr_main = 1e-2;
        let run = train_single(&refs, &cfg, &tcfg, &encoder, &SerialRunner, 0).unwrap();
        let fresh = ModelParams::<f64>::init(&cfg, 21).unwrap();
        // meta tokens are frozen: bit-identical after training
        assert_eq!(
            run.final_model.prompts.meta_tokens,
            fresh.prompts.meta_tokens
        );
        // learnable tokens did move
        assert_ne!(run.final_model.prompts.learnable, fresh.prompts.learnable);
    }

    #[test]
    fn training_is_bit_reproducible() {
        let (cfg, data) = tiny_dataset(5);
        let samples = synth_train_samples(&data).unwrap();
        let refs: Vec<&TrainSample<f64>> = samples.iter().collect();
        let encoder = cfg.toy_encoder::<f64>(21).unwrap();
        let mut tcfg = TrainConfig::<f64>::reference_defaults(21);
        tcfg.epochs = 3;
        tcfg.lr_main = 1e-2;
        let a = train_single(&refs, &cfg, &tcfg, &encoder, &SerialRunner, 0).unwrap();
        let b = train_single(&refs, &cfg, &tcfg, &encoder, &SerialRunner, 0).unwrap();
        for (ra, rb) in a.epochs.iter().zip(&b.epochs) {
            assert_eq!(ra.loss.to_bits(), rb.loss.to_bits());
        }
        assert_eq!(a.final_model, b.final_model);
    }

    #[test]
    fn fit_produces_fold_reports_and_disjoint_metrics() {
        let (cfg, data) = tiny_dataset(8);
        let samples = synth_train_samples(&data).unwrap();
        let encoder = cfg.toy_encoder::<f64>(21).unwrap();
        let mut tcfg = TrainConfig::<f64>::reference_defaults(21);
        tcfg.epochs = 2;
        tcfg.folds = 4;
        tcfg.lr_main = 1e-2;
        let out = fit(&samples, &cfg, &tcfg, &encoder, &SerialRunner).unwrap();
        assert_eq!(out.report.folds.len(), 4);
        assert_eq!(out.fold_models.len(), 4);
        assert_eq!(out.report.mean_metrics.len(), cfg.dim_count());
        for fold in &out.report.folds {
            assert_eq!(fold.epochs.len(), 2);
            assert!(fold.best_epoch < 2);
        }
    }

    #[test]
    fn step_gradient_is_linear_in_lambda_for_the_dis_term() {
        let (cfg, data) = tiny_dataset(3);
        let samples = synth_train_samples(&data).unwrap();
        let refs: Vec<&TrainSample<f64>> = samples.iter().collect();
        let encoder = cfg.toy_encoder::<f64>(21).unwrap();
        let model = ModelParams::<f64>::init(&cfg, 99).unwrap();

        let out0 = train_step(
            &model,
            &encoder,
            &refs,
            0.0,
            0.0,
            LossMode::Full,
            &SerialRunner,
        )
        .unwrap();
        let out1 = train_step(
            &model,
            &encoder,
            &refs,
            1.0,
            0.0,
            LossMode::Full,
            &SerialRunner,
        )
        .unwrap();
        let out2 = train_step(
            &model,
            &encoder,
            &refs,
            2.0,
            0.0,
            LossMode::Full,
            &SerialRunner,
        )
        .unwrap();
        // Doubling lambda doubles the dis-attributable token gradient.
        let g0 = out0.grads.prompts.learnable.data();
        let g1 = out1.grads.prompts.learnable.data();
        let g2 = out2.grads.prompts.learnable.data();
        for i in 0..g0.len() {
            let dis1 = g1[i] - g0[i];
            let dis2 = g2[i] - g0[i];
            assert!(
                (dis2 - 2.0 * dis1).abs() < 1e-10 * dis1.abs().max(1e-6),
                "entry {i}: {dis1} vs {dis2}"
            );
        }
    }
}
