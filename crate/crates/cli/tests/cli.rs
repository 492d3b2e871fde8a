use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hep2_core::data::{DatasetManifest, GrayImage};
use hep2_core::eval::{EvalReport, SplitPlan};
use hep2_core::nn::NetworkConfig;

fn hep2(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hep2"))
        .args(args)
        .env_remove("HEP2_OUT")
        .env("HEP2_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn ok(args: &[&str]) -> String {
    let out = hep2(args);
    assert!(
        out.status.success(),
        "hep2 {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_succeeds_and_bad_flags_fail() {
    assert!(hep2(&["--help"]).status.success());
    assert!(hep2(&["train", "--help"]).status.success());
    assert_eq!(hep2(&["train", "--no-such-flag"]).status.code(), Some(1));
    assert_eq!(hep2(&["synth"]).status.code(), Some(1), "missing --out");
}

#[test]
fn eval_confusion_prints_mca() {
    let fixture = Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/set3_confusion.csv");
    let stdout = ok(&["eval", "--confusion", s(&fixture)]);
    assert!(stdout.contains("MCA: 79.13"), "{stdout}");
    assert_eq!(stdout.matches("CCR ").count(), 6);
    let report = ok(&["report", "--confusion", s(&fixture)]);
    assert!(report.contains("Homogeneous") && report.contains("MCA: 79.13"), "{report}");
}

#[test]
fn extract_crops_interior_components() {
    let dir = tempfile::tempdir().unwrap();
    let (w, h) = (300, 300);
    let centres = [(60, 60), (60, 200), (150, 150), (230, 90), (20, 250)];
    let mask = GrayImage::from_fn(w, h, |r, c| {
        let hit = centres
            .iter()
            .any(|&(cy, cx)| (cy - 5..cy + 5).contains(&r) && (cx - 5..cx + 5).contains(&c));
        if hit {
            1.0
        } else {
            0.0
        }
    });
    let image = GrayImage::from_fn(w, h, |r, c| ((r + c) % 256) as f32 / 255.0);
    for (root, img) in [("specimens", &image), ("masks", &mask)] {
        let class_dir = dir.path().join(root).join("Speckled");
        fs::create_dir_all(&class_dir).unwrap();
        img.save_png(class_dir.join("s01.png")).unwrap();
    }
    let out = dir.path().join("cells");
    ok(&[
        "extract",
        "--specimens",
        s(&dir.path().join("specimens")),
        "--masks",
        s(&dir.path().join("masks")),
        "--out",
        s(&out),
    ]);
    let manifest = DatasetManifest::read(out.join("manifest.csv")).unwrap();
    assert_eq!(manifest.entries.len(), 4);
    assert!(manifest.entries.iter().all(|e| e.specimen_id == "Speckled/s01"));
    let records = manifest.load_records(true).unwrap();
    assert!(records.iter().all(|r| r.side() == 77 && r.label == 1));
}

#[test]
fn synth_split_train_eval_pipeline() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&[
        "synth",
        "--specimens-per-class",
        "2",
        "--cells-per-specimen",
        "5",
        "--classes",
        "2",
        "--out",
        s(&data),
    ]);
    let manifest = data.join("manifest.csv");
    assert_eq!(DatasetManifest::read(&manifest).unwrap().entries.len(), 20);

    let stdout = ok(&["split", "--manifest", s(&manifest), "--scheme", "loso", "--out", s(&data)]);
    assert!(stdout.contains("4 folds"), "{stdout}");
    // A single LOSO fold tests one class only, so evaluate on a k-fold split.
    let stdout = ok(&["split", "--manifest", s(&manifest), "--scheme", "kfold", "--k", "2", "--out", s(&data)]);
    assert!(stdout.contains("2 folds"), "{stdout}");
    let split = data.join("split.json");
    let plan = SplitPlan::from_json(&fs::read_to_string(&split).unwrap()).unwrap();
    plan.check_partition(20).unwrap();

    let net = dir.path().join("net.cfg");
    fs::write(&net, NetworkConfig::compact(2).to_text()).unwrap();
    let model = dir.path().join("model");
    let common = [
        "--manifest",
        s(&manifest),
        "--split",
        s(&split),
        "--fold",
        "0",
    ];
    let mut train = vec!["train", "--network", s(&net), "--preset", "desk", "--epochs", "3", "--out", s(&model)];
    train.extend(common);
    ok(&train);
    for f in ["network.cfg", "train_config.toml", "train_log.csv", "epoch_001.h2nn", "epoch_003.h2nn"] {
        assert!(model.join(f).is_file(), "missing {f}");
    }
    assert_eq!(fs::read_to_string(model.join("train_log.csv")).unwrap().lines().count(), 4);

    let results = dir.path().join("results");
    let mut eval = vec!["eval", "--checkpoints", s(&model), "--out", s(&results)];
    eval.extend(common);
    let stdout = ok(&eval);
    assert!(stdout.contains("MCA"), "{stdout}");
    let report = EvalReport::from_json(&fs::read_to_string(results.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.confusion.total(), plan.folds[0].test.len() as u64);
    assert!(results.join("confusion.csv").is_file());
    assert_eq!(
        fs::read_to_string(results.join("predictions.csv")).unwrap().lines().count(),
        plan.folds[0].test.len() + 1
    );
    assert!(!results.join(".staging-eval").exists());
}

#[test]
fn failed_training_is_quarantined() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--specimens-per-class", "1", "--cells-per-specimen", "4", "--classes", "2", "--out", s(&data)]);
    let net = dir.path().join("net.cfg");
    fs::write(&net, NetworkConfig::compact(2).to_text()).unwrap();
    let model = dir.path().join("model");
    let out = hep2(&[
        "train",
        "--manifest",
        s(&data.join("manifest.csv")),
        "--network",
        s(&net),
        "--time-budget",
        "0",
        "--out",
        s(&model),
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("time budget"));
    assert!(!model.join("network.cfg").exists());
    assert!(model.join("quarantine/train/network.cfg").is_file());
}

#[test]
fn experiment_file_runs_and_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data");
    ok(&["synth", "--specimens-per-class", "2", "--cells-per-specimen", "3", "--classes", "2", "--out", s(&data)]);
    fs::write(dir.path().join("net.cfg"), NetworkConfig::compact(2).to_text()).unwrap();
    let body = r#"
name = "tiny"
eval_manifest = "data/manifest.csv"
network = "net.cfg"
out = "runs/tiny"

[composition]
kind = "set-1"

[scheme]
kind = "loso"

[train]
epochs = 1
batch_size = 4
checkpoint_epochs = [1]
"#;
    let config = dir.path().join("tiny.toml");
    fs::write(&config, body).unwrap();
    let stdout = ok(&["experiment", "--config", s(&config), "--jobs", "2"]);
    assert!(stdout.contains("MCA"), "{stdout}");
    let run = dir.path().join("runs/tiny");
    let report = EvalReport::from_json(&fs::read_to_string(run.join("report.json")).unwrap()).unwrap();
    assert_eq!(report.confusion.total(), 12);
    assert_eq!(report.fold_accuracies.len(), 4);
    assert_eq!(fs::read_to_string(run.join("folds.csv")).unwrap().lines().count(), 5);

    fs::write(&config, format!("bogus = 1\n{body}")).unwrap();
    let out = hep2(&["experiment", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("bogus"));

    fs::write(&config, format!("{body}epoch = 3\n")).unwrap();
    let out = hep2(&["experiment", "--config", s(&config)]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("epoch"));
}
