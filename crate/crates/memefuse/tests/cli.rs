mod common;

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;
use std::time::Instant;

use common::*;
use memefuse::format::checkpoint;
use memefuse::store;
use memefuse_core::fusion::{FusionConfig, FusionMode};
use memefuse_core::{Channel, ChannelKind, ChannelSet, ManifestEntry, Model, Split};

fn dir_bytes(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let e = e.unwrap();
            (
                e.file_name().to_string_lossy().into_owned(),
                fs::read(e.path()).unwrap(),
            )
        })
        .collect()
}

/// Hand-built dataset: `mm` only, dim 2, with the given (label, split) rows.
fn write_mm_dataset(dir: &Path, rows: &[(Option<u8>, Split)]) {
    let mut mm = Channel::empty(2);
    let mut entries = Vec::new();
    for (i, &(label, split)) in rows.iter().enumerate() {
        let sign = if label == Some(1) { 1.0 } else { -1.0 };
        mm.push_row(&[sign * (1.0 + i as f32 / 10.0), (i as f32).sin()]);
        entries.push(ManifestEntry {
            id: format!("r{i}"),
            label,
            split,
            channels: [(ChannelKind::Mm, i as u64)].into(),
        });
    }
    let set: ChannelSet = [(ChannelKind::Mm, mm)].into();
    store::write_dataset_dir(dir, &entries, &set, None).unwrap();
}

fn gen(dir: &Path, cfg: &str) -> std::path::PathBuf {
    let config = write_config(dir, "run.toml", cfg);
    let run = memefuse(&["gen-synth", "--config", p(&config)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    config
}

#[test]
fn gen_synth_prints_composition_and_is_repeatable() {
    let tmp = tempfile::tempdir().unwrap();
    let config = write_config(tmp.path(), "run.toml", &small_config("mm_only", 100, 8, 7, ""));
    let first = memefuse(&["gen-synth", "--config", p(&config)]);
    assert_eq!(first.code, 0, "{}", first.stderr);
    assert!(first.stdout.contains("benign_text_confounder"), "{}", first.stdout);
    let before = dir_bytes(&tmp.path().join("data"));
    assert_eq!(before.len(), 6, "{:?}", before.keys());

    let second = memefuse(&["gen-synth", "--config", p(&config)]);
    assert_eq!(second.code, 0);
    assert_eq!(dir_bytes(&tmp.path().join("data")), before);

    let other = tmp.path().join("other");
    let third = memefuse(&["gen-synth", "--config", p(&config), "--seed", "8", "--out", p(&other)]);
    assert_eq!(third.code, 0);
    assert_ne!(dir_bytes(&other)["mm.mfe"], before["mm.mfe"]);
}

#[test]
fn gen_synth_rejects_mix_not_summing_to_one() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!(
        "{}\n[synth.mix]\nmultimodal_hate = 0.4\nunimodal_hate = 0.1\nbenign_text_confounder = 0.2\nbenign_image_confounder = 0.1\nrandom_benign = 0.1\n",
        small_config("mm_only", 100, 8, 7, "")
    );
    let config = write_config(tmp.path(), "run.toml", &body);
    let run = memefuse(&["gen-synth", "--config", p(&config)]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("synth.mix"), "{}", run.stderr);
    assert!(!tmp.path().join("data").exists());
}

#[test]
fn config_errors_exit_2() {
    let tmp = tempfile::tempdir().unwrap();
    let bad_key = write_config(tmp.path(), "bad.toml", "[train]\nlr = 0.1\n");
    assert_eq!(memefuse(&["train", "--config", p(&bad_key)]).code, 2);
    let missing = tmp.path().join("nope.toml");
    assert_eq!(memefuse(&["train", "--config", p(&missing)]).code, 2);
    let no_data = write_config(
        tmp.path(),
        "nodata.toml",
        "[dataset]\ndir = \"absent\"\n[output]\ndir = \"o\"\n",
    );
    let run = memefuse(&["train", "--config", p(&no_data)]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("dataset.manifest"), "{}", run.stderr);
    assert_eq!(memefuse(&["frobnicate"]).code, 2);
}

#[test]
fn bad_thread_count_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let config = gen(tmp.path(), &small_config("mm_only", 40, 4, 1, ""));
    let run = memefuse_env(&["train", "--config", p(&config)], &[("MEMEFUSE_THREADS", "zero")]);
    assert_eq!(run.code, 2);
    assert!(run.stderr.contains("MEMEFUSE_THREADS"), "{}", run.stderr);
}

#[test]
fn mm_only_on_default_synthetic_data_within_60s() {
    let tmp = tempfile::tempdir().unwrap();
    let config = gen(
        tmp.path(),
        "[dataset]\ndir = \"data\"\n[output]\ndir = \"out\"\n[synth]\nseed = 3\n",
    );
    let start = Instant::now();
    let run = memefuse(&["train", "--config", p(&config)]);
    let elapsed = start.elapsed();
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert!(elapsed.as_secs_f64() < 60.0, "{elapsed:?}");
    let model = checkpoint::decode(&fs::read(tmp.path().join("out/model.mfm")).unwrap()).unwrap();
    assert_eq!(model.fusion().mode, FusionMode::MmOnly);
    assert_eq!(model.fusion().d_m, 768);
    assert_eq!(model.mlp().hidden_widths(), vec![768]);
}

#[test]
fn cap_bilinear_without_cap_channel_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: Vec<_> = (0..20)
        .map(|i| (Some((i % 2) as u8), if i < 14 { Split::Train } else { Split::Val }))
        .collect();
    write_mm_dataset(&tmp.path().join("data"), &rows);
    let config = write_config(tmp.path(), "run.toml", &small_config("cap_bilinear", 20, 2, 0, ""));
    let run = memefuse(&["train", "--config", p(&config)]);
    assert_eq!(run.code, 4, "{}", run.stderr);
    assert!(run.stderr.contains("cap"), "{}", run.stderr);
}

#[test]
fn zero_learning_rate_checkpoint_is_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let config = gen(
        tmp.path(),
        &small_config("cap_bilinear", 60, 6, 2, "learning_rate = 0.0\nseed = 21"),
    );
    let run = memefuse(&["train", "--config", p(&config)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let saved = checkpoint::decode(&fs::read(tmp.path().join("out/model.mfm")).unwrap()).unwrap();
    let fusion = FusionConfig {
        mode: FusionMode::CapBilinear,
        d_m: 6,
        d_h: 6,
        bilinear_dim: 8,
        k: 3,
    };
    assert_eq!(saved, Model::init(fusion, &[16], 21).unwrap());
}

#[test]
fn divergence_exits_3() {
    let tmp = tempfile::tempdir().unwrap();
    let config = gen(
        tmp.path(),
        &small_config("mm_only", 60, 6, 2, "optimizer = \"sgd\"\nlearning_rate = 1e300"),
    );
    let run = memefuse(&["train", "--config", p(&config)]);
    assert_eq!(run.code, 3, "{}", run.stderr);
    assert!(run.stderr.contains("epoch"), "{}", run.stderr);
}

/// Train a small cap_concat model; returns the config path.
fn trained(dir: &Path) -> std::path::PathBuf {
    let config = gen(dir, &small_config("cap_concat", 200, 8, 5, ""));
    let run = memefuse(&["train", "--config", p(&config)]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    config
}

#[test]
fn evaluate_reproduces_logged_best_val_auc() {
    let tmp = tempfile::tempdir().unwrap();
    let config = trained(tmp.path());
    let ckpt = tmp.path().join("out/model.mfm");
    let run = memefuse(&[
        "evaluate",
        "--config",
        p(&config),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "val",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);

    let log = fs::read_to_string(tmp.path().join("out/train_log.jsonl")).unwrap();
    let best: Vec<serde_json::Value> = log
        .lines()
        .map(|l| serde_json::from_str::<serde_json::Value>(l).unwrap())
        .filter(|v| v["best"] == true)
        .collect();
    assert_eq!(best.len(), 1);
    let logged = best[0]["val_auc_roc"].as_f64().unwrap();
    assert_eq!(field_f64(&run.stdout, "auc_roc"), logged);

    assert_eq!(
        fs::read_to_string(tmp.path().join("out/eval_val.txt")).unwrap(),
        run.stdout
    );
    let roc = fs::read_to_string(tmp.path().join("out/roc_val.csv")).unwrap();
    assert!(roc.starts_with("fpr,tpr\n0,0\n") && roc.ends_with("1,1\n"), "{roc}");
}

#[test]
fn report_accuracy_is_confusion_trace_over_n() {
    let tmp = tempfile::tempdir().unwrap();
    let config = trained(tmp.path());
    let ckpt = tmp.path().join("out/model.mfm");
    let run = memefuse(&[
        "evaluate",
        "--config",
        p(&config),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "test",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    let get = |k| field(&run.stdout, k).parse::<u64>().unwrap();
    let n = get("n");
    assert_eq!(get("tn") + get("fp") + get("fn") + get("tp"), n);
    assert_eq!(
        field_f64(&run.stdout, "accuracy"),
        (get("tp") + get("tn")) as f64 / n as f64
    );
}

/// Mann-Whitney pair count, independent of the library's sorted sweep.
fn pair_count_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                wins += if si > sj {
                    1.0
                } else if si == sj {
                    0.5
                } else {
                    0.0
                };
            }
        }
    }
    wins / pairs
}

#[test]
fn predict_rows_feed_an_offline_auc_matching_evaluate() {
    let tmp = tempfile::tempdir().unwrap();
    let config = trained(tmp.path());
    let ckpt = tmp.path().join("out/model.mfm");
    let pred_file = tmp.path().join("pred.csv");
    let pred = memefuse(&[
        "predict",
        "--config",
        p(&config),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "test",
        "--out",
        p(&pred_file),
    ]);
    assert_eq!(pred.code, 0, "{}", pred.stderr);
    assert_eq!(fs::read_to_string(&pred_file).unwrap(), pred.stdout);

    let manifest = store::read_manifest(&tmp.path().join("data/manifest.jsonl")).unwrap();
    let test: Vec<&ManifestEntry> = manifest.iter().filter(|e| e.split == Split::Test).collect();
    let rows: Vec<Vec<&str>> = pred.stdout.lines().map(|l| l.split(',').collect()).collect();
    assert_eq!(rows.len(), test.len());
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (row, entry) in rows.iter().zip(&test) {
        assert_eq!(row[0], entry.id, "manifest order");
        assert_eq!(row[1].split_once('.').unwrap().1.len(), 9);
        let p_hat: f64 = row[1].parse().unwrap();
        assert_eq!(row[2], if p_hat >= 0.5 { "1" } else { "0" });
        scores.push(p_hat);
        labels.push(entry.label.unwrap());
    }
    let eval = memefuse(&[
        "evaluate",
        "--config",
        p(&config),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "test",
    ]);
    let auc = field_f64(&eval.stdout, "auc_roc");
    assert!((pair_count_auc(&scores, &labels) - auc).abs() <= 1e-9);
}

#[test]
fn zero_checkpoint_predicts_one_half_everywhere() {
    let tmp = tempfile::tempdir().unwrap();
    let config = gen(tmp.path(), &small_config("senti", 60, 5, 9, ""));
    let fusion = FusionConfig {
        mode: FusionMode::Senti,
        d_m: 5,
        d_h: 5,
        bilinear_dim: 8,
        k: 3,
    };
    let ckpt = tmp.path().join("zero.mfm");
    fs::write(&ckpt, checkpoint::encode(&Model::zeros(fusion, &[4]).unwrap())).unwrap();
    for split in ["train", "val", "test"] {
        let run = memefuse(&[
            "predict",
            "--config",
            p(&config),
            "--checkpoint",
            p(&ckpt),
            "--split",
            split,
        ]);
        assert_eq!(run.code, 0, "{}", run.stderr);
        let expected = store::read_manifest(&tmp.path().join("data/manifest.jsonl"))
            .unwrap()
            .iter()
            .filter(|e| e.split.as_str() == split)
            .count();
        assert_eq!(run.stdout.lines().count(), expected);
        assert!(
            run.stdout.lines().all(|l| l.ends_with(",0.500000000,1")),
            "{}",
            run.stdout
        );
    }
}

#[test]
fn predict_with_missing_channel_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: Vec<_> = (0..10).map(|i| (Some((i % 2) as u8), Split::Test)).collect();
    write_mm_dataset(&tmp.path().join("data"), &rows);
    let fusion = FusionConfig {
        mode: FusionMode::CapConcat,
        d_m: 2,
        d_h: 2,
        bilinear_dim: 8,
        k: 3,
    };
    let ckpt = tmp.path().join("m.mfm");
    fs::write(&ckpt, checkpoint::encode(&Model::zeros(fusion, &[]).unwrap())).unwrap();
    let data = tmp.path().join("data");
    let run = memefuse(&[
        "predict",
        "--dataset",
        p(&data),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "test",
    ]);
    assert_eq!(run.code, 4, "{}", run.stderr);
    assert!(run.stderr.contains("cap"), "{}", run.stderr);
}

#[test]
fn evaluate_single_class_exits_5_and_unlabeled_exits_4() {
    let tmp = tempfile::tempdir().unwrap();
    let mut rows: Vec<_> = (0..6).map(|i| (Some((i % 2) as u8), Split::Train)).collect();
    rows.extend((0..4).map(|_| (Some(1), Split::Val)));
    rows.extend((0..3).map(|_| (None, Split::Test)));
    let data = tmp.path().join("data");
    write_mm_dataset(&data, &rows);
    let fusion = FusionConfig {
        mode: FusionMode::MmOnly,
        d_m: 2,
        ..FusionConfig::default()
    };
    let ckpt = tmp.path().join("m.mfm");
    fs::write(&ckpt, checkpoint::encode(&Model::init(fusion, &[3], 0).unwrap())).unwrap();

    let run = memefuse(&[
        "evaluate",
        "--dataset",
        p(&data),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "val",
    ]);
    assert_eq!(run.code, 5, "{}", run.stderr);
    let run = memefuse(&[
        "evaluate",
        "--dataset",
        p(&data),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "test",
    ]);
    assert_eq!(run.code, 4, "{}", run.stderr);
    assert!(run.stderr.contains("unlabeled"), "{}", run.stderr);
    // Unlabeled splits can still be scored.
    let run = memefuse(&[
        "predict",
        "--dataset",
        p(&data),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "test",
    ]);
    assert_eq!(run.code, 0, "{}", run.stderr);
    assert_eq!(run.stdout.lines().count(), 3);
}

#[test]
fn missing_checkpoint_is_a_config_error() {
    let tmp = tempfile::tempdir().unwrap();
    let rows: Vec<_> = (0..4).map(|i| (Some((i % 2) as u8), Split::Val)).collect();
    let data = tmp.path().join("data");
    write_mm_dataset(&data, &rows);
    let ckpt = tmp.path().join("absent.mfm");
    let run = memefuse(&[
        "evaluate",
        "--dataset",
        p(&data),
        "--checkpoint",
        p(&ckpt),
        "--split",
        "val",
    ]);
    assert_eq!(run.code, 2, "{}", run.stderr);
}
