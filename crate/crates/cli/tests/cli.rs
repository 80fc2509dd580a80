use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

fn hyperneg(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hyperneg")).args(args).env("RUST_LOG", "warn").output().expect("binary runs")
}

fn ok(args: &[&str]) -> Vec<String> {
    let out = hyperneg(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap().lines().map(str::to_string).collect()
}

fn sha(path: &Path) -> String {
    hex::encode(Sha256::digest(std::fs::read(path).unwrap()))
}

fn prepare_small(dir: &Path) -> String {
    let d = dir.join("data");
    ok(&["prepare", "--synth", "120,80,3,5,4", "--seed", "3", "--out", d.to_str().unwrap()]);
    d.to_str().unwrap().to_string()
}

#[test]
fn prepare_writes_six_artifacts_and_a_manifest() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("a");
    let paths = ok(&["prepare", "--synth", "120,80,3,5,4", "--seed", "3", "--out", d.to_str().unwrap()]);
    let names: Vec<String> =
        paths.iter().map(|p| Path::new(p).file_name().unwrap().to_string_lossy().into_owned()).collect();
    assert_eq!(
        names,
        ["graph.txt", "features.txt", "split.txt", "neg_test_sns.txt", "neg_test_mns.txt", "neg_test_cns.txt", "manifest.json"]
    );
    for p in &paths {
        assert!(Path::new(p).is_file(), "{p}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dataset"]["nodes"], 120);
    assert_eq!(manifest["dataset"]["hyperedges"], 80);
}

#[test]
fn prepare_is_deterministic() {
    let tmp = tempfile::tempdir().unwrap();
    let a = ok(&["prepare", "--synth", "120,80,3,5,4", "--seed", "9", "--out", tmp.path().join("a").to_str().unwrap()]);
    let b = ok(&["prepare", "--synth", "120,80,3,5,4", "--seed", "9", "--out", tmp.path().join("b").to_str().unwrap()]);
    for (x, y) in a.iter().zip(&b) {
        if x.ends_with("manifest.json") {
            continue;
        }
        assert_eq!(sha(Path::new(x)), sha(Path::new(y)), "{x}");
    }
}

#[test]
fn prepare_reports_loaded_counts_and_remaps_gaps() {
    let tmp = tempfile::tempdir().unwrap();
    let src = tmp.path().join("edges.txt");
    std::fs::write(&src, "# toy\n1 5 9\n5 9 12\n1 12\n9 12 20\n1 20 5\n5 5 9\n7\n").unwrap();
    let d = tmp.path().join("d");
    let paths = ok(&["prepare", "--data", src.to_str().unwrap(), "--strategies", "SNS", "--out", d.to_str().unwrap()]);
    assert!(paths.iter().any(|p| p.ends_with("remap.txt")));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(d.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["dataset"]["nodes"], 5);
    assert_eq!(manifest["dataset"]["hyperedges"], 6);
    assert_eq!(manifest["dataset"]["deduplicated_lines"], 1);
    assert_eq!(manifest["dataset"]["rejected_small"], 1);
}

#[test]
fn exit_codes_follow_error_classes() {
    let tmp = tempfile::tempdir().unwrap();
    let d = prepare_small(tmp.path());
    let missing = hyperneg(&["eval", "--data", &d, "--checkpoint", "/nonexistent.ckpt", "--out", "/dev/null"]);
    assert_eq!(missing.status.code(), Some(2));
    assert!(missing.stdout.is_empty());

    let few = tmp.path().join("few.txt");
    std::fs::write(&few, "0 1\n1 2\n2 3\n").unwrap();
    let out = hyperneg(&["prepare", "--data", few.to_str().unwrap(), "--out", tmp.path().join("f").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));

    // every candidate node set is already observed, so SNS cannot find a negative
    let mut full = String::new();
    for mask in 0u32..16 {
        if mask.count_ones() >= 2 {
            let nodes: Vec<String> = (0..4).filter(|b| mask >> b & 1 == 1).map(|b| b.to_string()).collect();
            full.push_str(&nodes.join(" "));
            full.push('\n');
        }
    }
    let full_path = tmp.path().join("full.txt");
    std::fs::write(&full_path, full).unwrap();
    let out = hyperneg(&["prepare", "--data", full_path.to_str().unwrap(), "--out", tmp.path().join("g").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(4));

    let bad_variant = hyperneg(&["train", "--data", &d, "--variant", "SEHP-xyz", "--out", "/tmp/x"]);
    assert_eq!(bad_variant.status.code(), Some(2));
}

#[test]
fn train_eval_trace_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let d = prepare_small(tmp.path());
    let run = tmp.path().join("run");
    let paths = ok(&["train", "--data", &d, "--epochs", "1", "--variant", "SEHP-epre", "--out", run.to_str().unwrap()]);
    assert!(paths.iter().all(|p| Path::new(p).is_file()));
    let ck = std::fs::read_to_string(run.join("best.ckpt")).unwrap();
    assert!(ck.contains("meta variant SEHP-epre"));
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["variant"], "SEHP-epre");
    assert!(manifest["config"].as_str().unwrap().contains("epochs = 1"));

    let res = tmp.path().join("results.csv");
    ok(&["eval", "--data", &d, "--checkpoint", run.join("best.ckpt").to_str().unwrap(), "--out", res.to_str().unwrap()]);
    let text = std::fs::read_to_string(&res).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("metric,SNS,MNS,CNS,MIX,AVE"));
    assert!(lines.next().unwrap().starts_with("AUROC,"));
    assert!(lines.next().unwrap().starts_with("Precision,"));

    let tr = tmp.path().join("trace.csv");
    ok(&["trace", "--data", &d, "--checkpoint", run.join("best.ckpt").to_str().unwrap(), "--batches", "4", "--out", tr.to_str().unwrap()]);
    let text = std::fs::read_to_string(&tr).unwrap();
    assert!(text.starts_with("batch,s0,s1,s2,s3,s4,s5\n"));
    assert_eq!(text.lines().filter(|l| !l.starts_with('#')).count(), 5);
}

#[test]
fn config_file_is_overridden_by_flags() {
    let tmp = tempfile::tempdir().unwrap();
    let d = prepare_small(tmp.path());
    let cfg = tmp.path().join("run.cfg");
    std::fs::write(&cfg, "# small run\nepochs = 5\nhidden = 16\nvariant = SEHP-None\n").unwrap();
    let run = tmp.path().join("run");
    ok(&["train", "--data", &d, "--config", cfg.to_str().unwrap(), "--epochs", "1", "--out", run.to_str().unwrap()]);
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(run.join("manifest.json")).unwrap()).unwrap();
    let config = manifest["config"].as_str().unwrap();
    assert!(config.contains("epochs = 1"));
    assert!(config.contains("hidden = 16"));
    assert_eq!(manifest["variant"], "SEHP-None");
}

#[test]
fn resume_matches_a_straight_run() {
    let tmp = tempfile::tempdir().unwrap();
    let d = prepare_small(tmp.path());
    let straight = tmp.path().join("straight");
    ok(&["train", "--data", &d, "--epochs", "2", "--out", straight.to_str().unwrap()]);
    let first = tmp.path().join("first");
    ok(&["train", "--data", &d, "--epochs", "1", "--out", first.to_str().unwrap()]);
    let second = tmp.path().join("second");
    ok(&[
        "train",
        "--data",
        &d,
        "--epochs",
        "2",
        "--resume",
        first.join("last.ckpt").to_str().unwrap(),
        "--out",
        second.to_str().unwrap(),
    ]);
    assert_eq!(sha(&straight.join("last.ckpt")), sha(&second.join("last.ckpt")));
}

#[test]
fn bench_reports_a_ratio_of_at_least_one() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path().join("data");
    ok(&["prepare", "--synth", "400,300,3,8,8", "--seed", "1", "--out", d.to_str().unwrap()]);
    let out = tmp.path().join("bench.csv");
    ok(&["bench", "--data", d.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    let text = std::fs::read_to_string(&out).unwrap();
    let rows: Vec<&str> = text.lines().collect();
    assert_eq!(rows[0], "variant,mean_seconds,timed_epochs");
    assert!(rows[1].starts_with("SEHP,") && rows[1].ends_with(",3"));
    assert!(rows[2].starts_with("SEHP-epre,"));
    let ratio: f64 = rows.iter().find_map(|l| l.strip_prefix("# speed_ratio=")).unwrap().parse().unwrap();
    assert!(ratio >= 1.0, "{ratio}");
}
