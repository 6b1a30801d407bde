//! Acceptance suite: one test per release criterion, each printing a
//! single pass/fail line (run with `--nocapture` to see them).

use std::time::Instant;

use hyperscore_core::adam::{adam_step, AdamConfig, AdamState, GroupLr};
use hyperscore_core::condition::encode_conditions;
use hyperscore_core::feature::{synth_toy_bundle, FeatureDims};
use hyperscore_core::fusion::{fuse_conditional, normalize_rows, patch_token_correlation, softmax};
use hyperscore_core::gradcheck::{gradient_check, GradCheckSettings};
use hyperscore_core::loss::loss_disentangle;
use hyperscore_core::model::{predict_all, ModelConfig, ModelParams};
use hyperscore_core::rng::SeqRng;
use hyperscore_core::stats::{
    baseline_cosine_score, compute_mos, krcc, plcc, screen_bt500, screen_pipeline, screen_trapping,
    srcc, AnnotationMatrix, Bt500Config, TrappingConfig, TrappingInfo,
};
use hyperscore_core::tensor::Tensor;
use hyperscore_core::train::{
    crossval_split, disentangle_only_grads, synth_teacher_dataset, synth_train_samples,
    train_single, SerialRunner, SynthSpec, TrainConfig, TrainSample,
};

fn verdict(name: &str, pass: bool, detail: &str) {
    println!("[{}] {name}: {detail}", if pass { "PASS" } else { "FAIL" });
    assert!(pass, "{name}: {detail}");
}

fn tiny_feature_dims() -> FeatureDims {
    FeatureDims {
        views: 2,
        patches: 4,
        text_len: 3,
        feat_dim: 16,
    }
}

#[test]
fn acceptance_gradient_suite() {
    // Tiny config: D=16, D_q=8, M=2, N_v=4, N_t=3, K=3, L=2, grid 2x2x2.
    let started = Instant::now();
    let cfg = ModelConfig::tiny();
    let spec = SynthSpec {
        prompt_count: 2,
        methods: vec!["m0".into()],
        feature_dims: tiny_feature_dims(),
        seed: 2024,
    };
    let data = synth_teacher_dataset::<f64>(&spec, &cfg).unwrap();
    let samples = synth_train_samples(&data).unwrap();
    let refs: Vec<&TrainSample<f64>> = samples.iter().collect();
    let model = ModelParams::<f64>::init(&cfg, 7).unwrap();
    let encoder = cfg.toy_encoder::<f64>(2024).unwrap();
    let report = gradient_check(&model, &encoder, &refs, &GradCheckSettings::for_f64()).unwrap();
    let elapsed = started.elapsed();
    let pass = report.pass && elapsed.as_secs() < 60;
    verdict(
        "gradient suite",
        pass,
        &format!(
            "{} params, max rel err {:.3e} (tol 1e-4), {:.2}s",
            model.param_count(),
            report.max_rel_err,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn acceptance_architecture_shapes_at_full_scale() {
    let cfg = ModelConfig::full_scale();
    let model = ModelParams::<f32>::init(&cfg, 1).unwrap();
    let encoder = cfg.toy_encoder::<f32>(1).unwrap();
    let cond = vec![0.05f32; 512];
    let head = model.hyper.generate(&cond).unwrap();

    let transform_ok = model.hyper.transform_out() == 5488;
    let fc1_ok = head.weights[0].shape() == [224, 112] && head.biases[0].len() == 112;
    let chain: Vec<usize> = head
        .weights
        .iter()
        .map(|w| w.rows())
        .chain(std::iter::once(1))
        .collect();
    let chain_ok = chain == [224, 112, 56, 28, 1];

    let bundle = synth_toy_bundle(
        9,
        &FeatureDims {
            views: 6,
            patches: 196,
            text_len: 77,
            feat_dim: 512,
        },
    )
    .unwrap();
    let started = Instant::now();
    let scores = predict_all(&bundle, &model, &encoder).unwrap();
    let elapsed = started.elapsed();
    let forward_ok = scores.len() == 4 && elapsed.as_secs_f64() < 1.0;

    verdict(
        "architecture shapes at full scale",
        transform_ok && fc1_ok && chain_ok && forward_ok,
        &format!(
            "transform {} fc1 {:?}+{} chain {:?} forward {:.3}s",
            model.hyper.transform_out(),
            head.weights[0].shape(),
            head.biases[0].len(),
            chain,
            elapsed.as_secs_f64()
        ),
    );
}

#[test]
fn acceptance_teacher_student_closure() {
    let cfg = ModelConfig::tiny();
    let spec = SynthSpec {
        prompt_count: 16,
        methods: vec!["m0".into(), "m1".into()],
        feature_dims: tiny_feature_dims(),
        seed: 11,
    };
    let data = synth_teacher_dataset::<f64>(&spec, &cfg).unwrap();
    let samples = synth_train_samples(&data).unwrap();
    assert_eq!(samples.len(), 32);
    let refs: Vec<&TrainSample<f64>> = samples.iter().collect();
    let encoder = cfg.toy_encoder::<f64>(11).unwrap();

    // The reference schedule shape (30 epochs, batch 8, decay 0.9/5) with a
    // desk-scale learning rate; 2e-4 is tuned for the full dataset.
    let mut tcfg = TrainConfig::<f64>::reference_defaults(11);
    tcfg.lr_main = 1e-2;

    let initial = mse_on(
        &refs,
        &ModelParams::<f64>::init(&cfg, 11).unwrap(),
        &encoder,
    );
    let run_a = train_single(&refs, &cfg, &tcfg, &encoder, &SerialRunner, 0).unwrap();
    let run_b = train_single(&refs, &cfg, &tcfg, &encoder, &SerialRunner, 0).unwrap();
    let final_lreg = mse_on(&refs, &run_a.final_model, &encoder);

    let bit_identical = run_a.epochs.iter().zip(&run_b.epochs).all(|(a, b)| {
        a.loss.to_bits() == b.loss.to_bits()
            && a.loss_reg.to_bits() == b.loss_reg.to_bits()
            && a.loss_dis.to_bits() == b.loss_dis.to_bits()
    });
    let ratio = final_lreg / initial;
    verdict(
        "teacher-student closure",
        ratio <= 0.10 && bit_identical,
        &format!(
            "L_reg {initial:.5} -> {final_lreg:.5} (ratio {ratio:.4}, target <= 0.10), logs bit-identical: {bit_identical}"
        ),
    );
}

fn mse_on(
    samples: &[&TrainSample<f64>],
    model: &ModelParams<f64>,
    encoder: &hyperscore_core::condition::ToyTextEncoder<f64>,
) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for s in samples {
        let preds = hyperscore_core::model::predict_prepared(&s.prepared, model, encoder).unwrap();
        for (p, t) in preds.iter().zip(&s.targets) {
            acc += (p - t) * (p - t);
            n += 1;
        }
    }
    acc / n as f64
}

#[test]
fn acceptance_disentangling_behavior() {
    // Start from near-identical conditions (all pairwise cosines > 0.9)
    // and optimize the disentangling term alone.
    let cfg = ModelConfig::tiny();
    let mut model = ModelParams::<f64>::init(&cfg, 5).unwrap();
    let encoder = cfg.toy_encoder::<f64>(5).unwrap();

    // Same meta token and near-identical learnable tokens for all prompts.
    let d = cfg.feat_dim;
    let l = cfg.prompt_len;
    let k = cfg.dim_count();
    let meta0 = model.prompts.meta_tokens.row(0).to_vec();
    for i in 1..k {
        model.prompts.meta_tokens.row_mut(i).copy_from_slice(&meta0);
    }
    let base: Vec<f64> = model.prompts.learnable.data()[..l * d].to_vec();
    for i in 1..k {
        for (j, &v) in base.iter().enumerate() {
            model.prompts.learnable.data_mut()[i * l * d + j] = v + 1e-4 * (i as f64 + j as f64);
        }
    }
    let initial = mean_clipped_cos(&model, &encoder);
    assert!(initial > 0.9, "initial mean cosine {initial}");
    let min_pair = min_pair_cos(&model, &encoder);
    assert!(min_pair > 0.9, "initial min pairwise cosine {min_pair}");

    let mut state = AdamState::new(&model);
    let adam = AdamConfig::<f64>::default();
    let lr = GroupLr {
        main: 1e-2,
        encoder: 1e-2,
    };
    let mut reached = None;
    for step in 0..500 {
        let grads = disentangle_only_grads(&model, &encoder, 0.0).unwrap();
        adam_step(&mut model, &grads, &mut state, &adam, lr).unwrap();
        let mean = mean_clipped_cos(&model, &encoder);
        if mean < 0.05 {
            reached = Some((step + 1, mean));
            break;
        }
    }
    verdict(
        "disentangling behavior",
        reached.is_some(),
        &format!(
            "initial mean clipped cosine {initial:.4}; reached {:?} (target < 0.05 within 500 steps)",
            reached
        ),
    );
}

fn mean_clipped_cos(
    model: &ModelParams<f64>,
    encoder: &hyperscore_core::condition::ToyTextEncoder<f64>,
) -> f64 {
    let feats = encode_conditions(&model.prompts, encoder).unwrap();
    loss_disentangle(&feats, 0.0).unwrap().value
}

fn min_pair_cos(
    model: &ModelParams<f64>,
    encoder: &hyperscore_core::condition::ToyTextEncoder<f64>,
) -> f64 {
    let feats = encode_conditions(&model.prompts, encoder).unwrap();
    let mut min = f64::INFINITY;
    for i in 0..feats.len() {
        for j in (i + 1)..feats.len() {
            let ni: f64 = feats[i].iter().map(|v| v * v).sum::<f64>().sqrt();
            let nj: f64 = feats[j].iter().map(|v| v * v).sum::<f64>().sqrt();
            let dot: f64 = feats[i].iter().zip(&feats[j]).map(|(a, b)| a * b).sum();
            min = min.min(dot / (ni * nj));
        }
    }
    min
}

#[test]
fn acceptance_correlation_oracles() {
    // Brute-force O(N^2) oracles, independent of the implementations.
    fn brute_ranks(x: &[f64]) -> Vec<f64> {
        x.iter()
            .map(|&v| {
                let less = x.iter().filter(|&&u| u < v).count() as f64;
                let equal = x.iter().filter(|&&u| u == v).count() as f64;
                less + (equal - 1.0) / 2.0 + 1.0
            })
            .collect()
    }
    fn brute_pearson(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len() as f64;
        let mx = x.iter().sum::<f64>() / n;
        let my = y.iter().sum::<f64>() / n;
        let num: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
        let dx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
        let dy: f64 = y.iter().map(|b| (b - my) * (b - my)).sum();
        if dx <= 0.0 || dy <= 0.0 {
            None
        } else {
            Some(num / (dx * dy).sqrt())
        }
    }
    fn brute_tau_b(x: &[f64], y: &[f64]) -> Option<f64> {
        let n = x.len();
        let (mut c, mut d, mut tx, mut ty) = (0f64, 0f64, 0f64, 0f64);
        for i in 0..n {
            for j in (i + 1)..n {
                let a = x[i] - x[j];
                let b = y[i] - y[j];
                if a == 0.0 && b == 0.0 {
                } else if a == 0.0 {
                    tx += 1.0;
                } else if b == 0.0 {
                    ty += 1.0;
                } else if (a > 0.0) == (b > 0.0) {
                    c += 1.0;
                } else {
                    d += 1.0;
                }
            }
        }
        let denom = (c + d + tx) * (c + d + ty);
        if denom <= 0.0 {
            None
        } else {
            Some((c - d) / denom.sqrt())
        }
    }

    let mut rng = SeqRng::new(404);
    let mut compared = 0usize;
    let mut worst = 0.0f64;
    let mut fixtures = 0usize;
    while compared < 1000 {
        fixtures += 1;
        let n = 3 + rng.next_below(10); // N <= 12
        let x: Vec<f64> = (0..n).map(|_| rng.next_below(6) as f64).collect();
        let y: Vec<f64> = (0..n).map(|_| rng.next_below(6) as f64).collect();

        let s_oracle = brute_pearson(&brute_ranks(&x), &brute_ranks(&y));
        match (srcc(&x, &y), s_oracle) {
            (Ok(s), Some(o)) => {
                worst = worst.max((s - o).abs());
                assert!((s - o).abs() < 1e-12, "srcc {s} vs {o} on {x:?} {y:?}");
            }
            (Err(_), None) => {}
            (a, b) => panic!("srcc definedness disagrees: {a:?} vs {b:?}"),
        }
        let k_oracle = brute_tau_b(&x, &y);
        match (krcc(&x, &y), k_oracle) {
            (Ok(k), Some(o)) => {
                worst = worst.max((k - o).abs());
                assert!((k - o).abs() < 1e-12, "krcc {k} vs {o} on {x:?} {y:?}");
                compared += 1;
            }
            (Err(_), None) => {}
            (a, b) => panic!("krcc definedness disagrees: {a:?} vs {b:?}"),
        }
    }

    let hand = plcc(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap();
    let plcc_ok = (hand - 0.5).abs() < 1e-12;
    verdict(
        "correlation oracles",
        plcc_ok,
        &format!(
            "{compared} tied fixtures across {fixtures} draws, worst |diff| {worst:.2e}; plcc hand fixture = {hand}"
        ),
    );
}

#[test]
fn acceptance_screening_fixtures() {
    // Planted outlier: one subject at a constant 10 among raters uniform
    // around 2, with the session's trapping samples present. BT.500's
    // balance clause leaves strictly one-sided raters in place, so the
    // screening pipeline's trapping stage is what rejects them.
    let subjects = 11usize;
    let samples = 10usize;
    let mut scores = Vec::new();
    for s in 0..subjects {
        for n in 0..samples {
            let v = if s == 10 {
                10
            } else if n == 0 {
                0 // honest raters score the broken sentinel at 0
            } else {
                1 + ((s + n) % 3) as u8
            };
            scores.push(v);
        }
    }
    let matrix = AnnotationMatrix {
        subject_ids: (0..subjects).map(|s| format!("subj{s}")).collect(),
        sample_ids: (0..samples).map(|n| format!("smp{n}")).collect(),
        dimension_names: vec!["overall".into()],
        scores,
        trapping: Some(TrappingInfo {
            sentinel: "smp0".into(),
            duplicate: ("smp1".into(), "smp2".into()),
        }),
    };
    let report = screen_pipeline(
        &matrix,
        Some(&TrappingConfig::default()),
        &Bt500Config::default(),
    )
    .unwrap();
    let outlier_rejected = !report.retained.contains(&10);
    let honest_kept = report.retained.len() == 10;
    let stage = report
        .trapping
        .as_ref()
        .map(|t| t.rejected.iter().any(|r| r.subject_id == "subj10"))
        .unwrap_or(false);

    // All-identical fixture retains everyone under BT.500.
    let identical = AnnotationMatrix {
        subject_ids: (0..5).map(|s| format!("s{s}")).collect(),
        sample_ids: (0..6).map(|n| format!("n{n}")).collect(),
        dimension_names: vec!["overall".into()],
        scores: vec![7; 5 * 6],
        trapping: None,
    };
    let all = screen_bt500(&identical, &[0, 1, 2, 3, 4], &Bt500Config::default()).unwrap();
    let identical_ok = all.retained.len() == 5 && all.rejected.is_empty();

    // Trapping thresholds: strictly above T_low rejects, boundary retains.
    let trap = |sentinel_score: u8, gap_hi: u8| -> bool {
        let m = AnnotationMatrix {
            subject_ids: vec!["a".into()],
            sample_ids: vec!["x0".into(), "x1".into(), "x2".into()],
            dimension_names: vec!["overall".into()],
            scores: vec![sentinel_score, gap_hi, 0],
            trapping: Some(TrappingInfo {
                sentinel: "x0".into(),
                duplicate: ("x1".into(), "x2".into()),
            }),
        };
        screen_trapping(&m, &TrappingConfig::default())
            .unwrap()
            .retained
            .is_empty()
    };
    let trapping_ok = trap(9, 0) && !trap(3, 0) && !trap(0, 3) && trap(0, 4);

    // MOS excludes the rejected rater.
    let labels = compute_mos(&matrix, &report.retained).unwrap();
    let mos_ok = labels.iter().all(|l| l.retained_subject_count == 10);

    verdict(
        "screening fixtures",
        outlier_rejected && honest_kept && stage && identical_ok && trapping_ok && mos_ok,
        &format!(
            "planted outlier rejected by screening pipeline (trapping stage: {stage}); all-identical retained {}; trapping boundaries per thresholds: {trapping_ok}",
            all.retained.len()
        ),
    );
}

#[test]
fn acceptance_crossval_protocol() {
    let prompts: Vec<String> = (0..160).map(|i| format!("p{i:03}")).collect();
    let folds = crossval_split(&prompts, 5, 77).unwrap();
    let sizes_ok = folds
        .iter()
        .all(|f| f.train_prompts.len() == 128 && f.test_prompts.len() == 32);
    let mut tested = std::collections::BTreeSet::new();
    let mut disjoint = true;
    let mut once = true;
    for fold in &folds {
        for p in &fold.test_prompts {
            if fold.train_prompts.contains(p) {
                disjoint = false;
            }
            if !tested.insert(p.clone()) {
                once = false;
            }
        }
    }
    let coverage = tested.len() == 160;
    verdict(
        "cross-validation protocol",
        sizes_ok && disjoint && once && coverage,
        &format!(
            "5 folds of 128:32, prompt-disjoint {disjoint}, each prompt tested exactly once {once}"
        ),
    );
}

#[test]
fn acceptance_fusion_invariants() {
    let mut rng = SeqRng::new(31);
    let mut sums_ok = true;
    let mut shift_ok = true;
    for _ in 0..50 {
        let logits: Vec<f64> = (0..9).map(|_| rng.gaussian() * 3.0).collect();
        let w = softmax(&logits);
        let sum: f64 = w.iter().sum();
        sums_ok &= (sum - 1.0).abs() <= 1e-6;
        let c = rng.gaussian() * 25.0;
        let shifted: Vec<f64> = logits.iter().map(|z| z + c).collect();
        let w2 = softmax(&shifted);
        shift_ok &= w.iter().zip(&w2).all(|(a, b)| (a - b).abs() <= 1e-6);
    }

    // All-identical patches return the patch vector exactly.
    let patch = [0.3f64, -0.7, 1.1];
    let visual = Tensor::from_vec(&[4, 3], patch.repeat(4)).unwrap();
    let text = Tensor::from_vec(&[2, 3], vec![0.2, -0.4, 0.9, 1.0, 0.3, -0.2]).unwrap();
    let visual_norm = normalize_rows(&visual).unwrap();
    let text_norm = normalize_rows(&text).unwrap();
    let corr_vt = patch_token_correlation(&visual_norm, &text_norm).unwrap();
    let (w, fused) = fuse_conditional(&corr_vt, &[0.6, -0.3], &visual).unwrap();
    let identical_ok = fused == patch.to_vec() && w.weights == vec![0.25; 4];

    verdict(
        "fusion invariants",
        sums_ok && shift_ok && identical_ok,
        &format!(
            "weights sum to 1 +/- 1e-6: {sums_ok}; shift invariance 1e-6: {shift_ok}; identical patches exact: {identical_ok}"
        ),
    );
}

#[test]
fn acceptance_baseline_cosine() {
    use hyperscore_core::feature::default_viewpoints;

    let mk = |views: Vec<Vec<f32>>, eot: Vec<f32>| -> hyperscore_core::feature::FeatureBundle {
        let d = eot.len();
        let tensors: Vec<Tensor<f32>> = views
            .iter()
            .map(|v| Tensor::from_vec(&[1, d], v.clone()).unwrap())
            .collect();
        let m = tensors.len();
        hyperscore_core::feature::FeatureBundle {
            sample_id: "fixture".into(),
            prompt_id: String::new(),
            method_id: String::new(),
            views: tensors,
            text_tokens: Tensor::from_vec(&[1, d], eot).unwrap(),
            eot_index: 0,
            viewpoints: default_viewpoints(m),
        }
    };

    let same = mk(vec![vec![0.6, 0.8]], vec![0.6, 0.8]);
    let identical = baseline_cosine_score(&same).unwrap();
    let orth = mk(vec![vec![1.0, 0.0]], vec![0.0, 1.0]);
    let orthogonal = baseline_cosine_score(&orth).unwrap();
    let two = mk(
        vec![vec![0.8, 0.6], vec![0.4, (1.0f32 - 0.16).sqrt()]],
        vec![1.0, 0.0],
    );
    let average = baseline_cosine_score(&two).unwrap();

    let pass = (identical - 2.5).abs() < 1e-9 && orthogonal == 0.0 && (average - 1.5).abs() < 1e-6;
    verdict(
        "baseline cosine score",
        pass,
        &format!("identical {identical:.6}, orthogonal {orthogonal}, view-average {average:.6}"),
    );
}
