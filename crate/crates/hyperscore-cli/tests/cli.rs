//! End-to-end tests of the `hyperscore` binary: full synth -> train ->
//! score -> stats round trips, reproducibility, screening, and exit codes.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_hyperscore")
}

fn workdir(name: &str) -> PathBuf {
    let dir = std::env::temp_dir().join(format!("hyperscore_cli_{name}"));
    let _ = std::fs::remove_dir_all(&dir);
    std::fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> String {
    let out = run(dir, args);
    assert!(
        out.status.success(),
        "command {args:?} failed:\nstdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

/// Small-but-real run: 4 prompts x 2 methods, 3 epochs.
const FAST: &[&str] = &[
    "--synth.prompts",
    "4",
    "--train.epochs",
    "3",
    "--train.folds",
    "2",
    "--train.lr_main",
    "0.01",
];

#[test]
fn synth_train_score_stats_round_trip() {
    let dir = workdir("round_trip");
    let out = ok(&dir, &[&["synth"], FAST].concat());
    assert!(out.contains("8 containers"), "{out}");
    assert!(dir.join("out/manifest.json").exists());
    assert!(dir.join("out/labels.csv").exists());
    assert!(dir.join("out/teacher.ckpt").exists());

    let out = ok(&dir, &[&["train"], FAST].concat());
    assert!(out.contains("best epoch"), "{out}");
    assert!(dir.join("out/model.ckpt").exists());
    assert!(dir.join("out/train_log.jsonl").exists());

    let out = ok(&dir, &[&["score", "--ids", "all"], FAST].concat());
    assert!(out.contains("8 samples x 4 dimensions"), "{out}");
    let scores = std::fs::read_to_string(dir.join("out/scores.csv")).unwrap();
    assert!(scores.starts_with("# hyperscore score config_hash="));
    assert!(scores.contains("alignment_raw"));
    assert!(scores.contains("overall_clamped"));
    // one header comment + one column header + 8 rows
    assert_eq!(scores.lines().count(), 10);

    let out = ok(&dir, &[&["stats"], FAST].concat());
    assert!(out.contains("source file"), "{out}");
    assert!(dir.join("out/correlations.csv").exists());
    assert!(dir.join("out/correlations.json").exists());
    assert!(dir.join("out/score_table.csv").exists());

    // single-sample scoring emits one row with 4 raw + 4 clamped columns
    let out = ok(&dir, &[&["score", "--ids", "p000-m0"], FAST].concat());
    assert!(out.contains("1 samples"), "{out}");
    let scores = std::fs::read_to_string(dir.join("out/scores.csv")).unwrap();
    let row = scores.lines().last().unwrap();
    assert_eq!(row.split(',').count(), 9);

    // fusion-weight dump: one row per dimension, weights summing to 1
    ok(
        &dir,
        &[
            &["score", "--ids", "p000-m0", "--score.dump_weights", "true"],
            FAST,
        ]
        .concat(),
    );
    let weights = std::fs::read_to_string(dir.join("out/weights/p000-m0.csv")).unwrap();
    let rows: Vec<&str> = weights.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    for row in rows {
        let mut fields = row.split(',');
        let dim = fields.next().unwrap();
        assert!(!dim.is_empty());
        let ws: Vec<f64> = fields.map(|v| v.parse().unwrap()).collect();
        assert_eq!(ws.len(), 8); // M * N_v = 2 * 4 patches
        let sum: f64 = ws.iter().sum();
        assert!((sum - 1.0).abs() < 1e-5, "weights sum {sum}");
    }
}

#[test]
fn synth_is_byte_identical_per_seed() {
    let a = workdir("synth_a");
    let b = workdir("synth_b");
    ok(&a, &[&["synth"], FAST].concat());
    ok(&b, &[&["synth"], FAST].concat());
    for f in [
        "out/manifest.json",
        "out/labels.csv",
        "out/teacher.ckpt",
        "out/features/p000-m0.hsf",
        "out/features/p003-m1.hsf",
    ] {
        let x = std::fs::read(a.join(f)).unwrap();
        let y = std::fs::read(b.join(f)).unwrap();
        assert_eq!(x, y, "{f} differs between identical runs");
    }
    // different seed changes the features
    let c = workdir("synth_c");
    ok(&c, &[&["synth", "--seed", "8"], FAST].concat());
    let x = std::fs::read(a.join("out/features/p000-m0.hsf")).unwrap();
    let y = std::fs::read(c.join("out/features/p000-m0.hsf")).unwrap();
    assert_ne!(x, y);
}

#[test]
fn training_is_reproducible_and_labels_match_teacher() {
    let dir = workdir("repro");
    ok(&dir, &[&["synth"], FAST].concat());
    ok(&dir, &[&["train"], FAST].concat());
    let log1 = std::fs::read(dir.join("out/train_log.jsonl")).unwrap();
    let ckpt1 = std::fs::read(dir.join("out/model.ckpt")).unwrap();
    ok(&dir, &[&["train"], FAST].concat());
    let log2 = std::fs::read(dir.join("out/train_log.jsonl")).unwrap();
    let ckpt2 = std::fs::read(dir.join("out/model.ckpt")).unwrap();
    assert_eq!(log1, log2, "training logs differ across identical runs");
    assert_eq!(ckpt1, ckpt2, "checkpoints differ across identical runs");

    // Scoring with the teacher checkpoint reproduces the synth labels.
    ok(
        &dir,
        &[
            &[
                "score",
                "--ids",
                "all",
                "--paths.checkpoint",
                "out/teacher.ckpt",
                "--paths.predictions",
                "out/teacher_scores.csv",
            ],
            FAST,
        ]
        .concat(),
    );
    let labels = std::fs::read_to_string(dir.join("out/labels.csv")).unwrap();
    let scores = std::fs::read_to_string(dir.join("out/teacher_scores.csv")).unwrap();
    let label_rows: Vec<Vec<f64>> = parse_rows(&labels, 1, 4);
    let score_rows: Vec<Vec<f64>> = parse_rows(&scores, 1, 4);
    assert_eq!(label_rows.len(), score_rows.len());
    for (l, s) in label_rows.iter().zip(&score_rows) {
        for (a, b) in l.iter().zip(s) {
            assert!((a - b).abs() < 1e-6, "label {a} vs teacher score {b}");
        }
    }
}

fn parse_rows(csv: &str, skip_cols: usize, take: usize) -> Vec<Vec<f64>> {
    csv.lines()
        .filter(|l| !l.starts_with('#') && !l.starts_with("sample_id") && !l.trim().is_empty())
        .map(|l| {
            l.split(',')
                .skip(skip_cols)
                .take(take)
                .map(|v| v.parse().unwrap())
                .collect()
        })
        .collect()
}

#[test]
fn crossval_writes_fold_checkpoints_and_report() {
    let dir = workdir("crossval");
    ok(&dir, &[&["synth"], FAST].concat());
    let out = ok(&dir, &[&["crossval"], FAST].concat());
    assert!(out.contains("2 folds over 8 samples"), "{out}");
    assert!(out.contains("PLCC"), "{out}");
    assert!(dir.join("out/fold0.ckpt").exists());
    assert!(dir.join("out/fold1.ckpt").exists());
    let report = std::fs::read_to_string(dir.join("out/crossval_report.json")).unwrap();
    assert!(report.contains("mean_metrics"));

    // k = 1 is rejected as a usage/config error
    let out = run(
        &dir,
        &[&["crossval"], FAST, &["--train.folds", "1"]].concat(),
    );
    assert_eq!(
        exit_code(&out),
        1,
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
}

#[test]
fn mos_screens_a_planted_outlier() {
    let dir = workdir("mos");
    // 11 subjects x 10 samples, one dimension; subject "bad" scores a
    // constant 10 (including the broken sentinel), honest raters hover
    // around 2 and score the sentinel 0.
    let mut csv = String::from("subject_id,sample_id,dimension,score\n");
    for s in 0..11 {
        let subject = if s == 10 {
            "bad".to_string()
        } else {
            format!("s{s:02}")
        };
        for n in 0..10 {
            let score = if s == 10 {
                10
            } else if n == 0 {
                0
            } else {
                1 + (s + n) % 3
            };
            csv.push_str(&format!("{subject},smp{n},overall,{score}\n"));
        }
    }
    std::fs::write(dir.join("annotations.csv"), csv).unwrap();

    let args = [
        "mos",
        "--dims.dimension_names",
        "[\"overall\"]",
        "--mos.sentinel_id",
        "smp0",
        "--mos.duplicate_pair",
        "[\"smp1\",\"smp2\"]",
    ];
    let out = ok(&dir, &args);
    assert!(out.contains("10 subjects retained of 11"), "{out}");
    assert!(out.contains("rejected bad"), "{out}");

    let labels = std::fs::read_to_string(dir.join("out/labels.csv")).unwrap();
    // sentinel and duplicate-repeat are excluded from the labels
    assert!(!labels.contains("smp0,"), "{labels}");
    assert!(!labels.contains("smp2,"), "{labels}");
    assert!(labels.contains("smp3,"));
    let screening = std::fs::read_to_string(dir.join("out/screening.json")).unwrap();
    assert!(screening.contains("\"bad\""));
    assert!(screening.contains("sentinel scored 10"));

    // without planted outliers, labels are plain means over everyone
    let honest = workdir("mos_honest");
    let mut csv = String::from("subject_id,sample_id,dimension,score\n");
    for s in 0..5 {
        for n in 0..6 {
            csv.push_str(&format!("s{s},smp{n},overall,{}\n", 4 + (s + n) % 3));
        }
    }
    std::fs::write(honest.join("annotations.csv"), csv).unwrap();
    let out = ok(&honest, &["mos", "--dims.dimension_names", "[\"overall\"]"]);
    assert!(out.contains("5 subjects retained of 5"), "{out}");

    // empty annotations file is a data error (exit 2)
    std::fs::write(honest.join("annotations.csv"), "# empty\n").unwrap();
    let out = run(&honest, &["mos", "--dims.dimension_names", "[\"overall\"]"]);
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn stats_baseline_mode_works_on_synth_data() {
    let dir = workdir("stats_baseline");
    ok(&dir, &[&["synth"], FAST].concat());
    let out = ok(
        &dir,
        &[&["stats", "--stats.source", "baseline"], FAST].concat(),
    );
    assert!(out.contains("source baseline"), "{out}");
    let csv = std::fs::read_to_string(dir.join("out/correlations.csv")).unwrap();
    assert!(
        csv.lines().any(|l| l.starts_with("baseline,,alignment")),
        "{csv}"
    );
    // grouped rows exist for categories and methods
    assert!(
        csv.lines().any(|l| l.starts_with("baseline,basic,")),
        "{csv}"
    );
    assert!(csv.lines().any(|l| l.starts_with("baseline,m0,")), "{csv}");
}

#[test]
fn gradcheck_passes_in_both_precisions() {
    let dir = workdir("gradcheck");
    let out = ok(&dir, &["gradcheck"]);
    assert!(out.contains("gradcheck: PASS"), "{out}");
    assert!(out.contains("tolerance 1e-4"), "{out}");
    let out = ok(&dir, &["gradcheck", "--gradcheck.precision", "f32"]);
    assert!(out.contains("tolerance 1e-2"), "{out}");
}

#[test]
fn exit_codes_cover_usage_data_and_config_errors() {
    let dir = workdir("exit_codes");
    // usage: missing command / unknown command
    let out = run(&dir, &[]);
    assert_eq!(exit_code(&out), 1);
    let out = run(&dir, &["frobnicate"]);
    assert_eq!(exit_code(&out), 1);
    // config: unknown override key
    let out = run(&dir, &["synth", "--train.bogus", "1"]);
    assert_eq!(exit_code(&out), 1);
    // data: scoring without a checkpoint
    let out = run(&dir, &["score", "--ids", "all"]);
    assert_eq!(exit_code(&out), 2);

    // data: corrupt container magic
    ok(&dir, &[&["synth"], FAST].concat());
    let path = dir.join("out/features/p000-m0.hsf");
    let mut bytes = std::fs::read(&path).unwrap();
    bytes[0] = b'Z';
    std::fs::write(&path, bytes).unwrap();
    let out = run(&dir, &[&["train"], FAST].concat());
    assert_eq!(exit_code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("magic"));

    // config: container dims disagree with the configured dims
    let dir2 = workdir("dim_mismatch");
    ok(&dir2, &[&["synth"], FAST].concat());
    let out = run(&dir2, &[&["train", "--dims.patches", "6"], FAST].concat());
    assert_eq!(exit_code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("config declares"));

    // data: unknown sample id
    ok(&dir2, &[&["train"], FAST].concat());
    let out = run(&dir2, &[&["score", "--ids", "nope"], FAST].concat());
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn hs_threads_does_not_change_results() {
    let dir = workdir("threads");
    ok(&dir, &[&["synth"], FAST].concat());
    ok(&dir, &[&["train"], FAST].concat());
    let serial = std::fs::read(dir.join("out/model.ckpt")).unwrap();
    let out = Command::new(bin())
        .current_dir(&dir)
        .env("HS_THREADS", "4")
        .args([&["train"], FAST].concat())
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("(4 threads)"));
    let threaded = std::fs::read(dir.join("out/model.ckpt")).unwrap();
    assert_eq!(serial, threaded, "thread count changed the result");
}
