//! End-to-end tests of the `auction` binary: exit codes, JSON output, sweep
//! determinism and resume, and the utility subcommands.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn auction() -> Command {
    Command::new(env!("CARGO_BIN_EXE_auction"))
}

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    auction().args(args).output().expect("binary runs")
}

fn stdout_json(output: &Output) -> serde_json::Value {
    assert!(
        output.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    serde_json::from_slice(&output.stdout).expect("stdout is JSON")
}

fn price_of(report: &serde_json::Value, section: &str, bidder: usize) -> f64 {
    report[section]["prices"][bidder.to_string()].as_f64().unwrap()
}

#[test]
fn price_ex1_reports_golden_values() {
    let out = run(&[
        "price",
        data("ex1.json").to_str().unwrap(),
        "--typespaces",
        data("ex1-typespaces.json").to_str().unwrap(),
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["welfare"].as_f64().unwrap(), 60.0);
    for (bidder, want) in [(0, 10.0), (1, 10.0), (2, 10.0)] {
        assert!((price_of(&report, "vcg", bidder) - want).abs() < 1e-6);
    }
    for (bidder, want) in [(0, 10.0), (1, 17.0), (2, 15.0)] {
        assert!((price_of(&report, "wt", bidder) - want).abs() < 1e-6);
    }
    let rules = &report["rules"];
    for (bidder, want) in [(0, 14.0), (1, 14.0), (2, 13.0)] {
        let got = rules["vanilla-vcg-nearest"]["prices"][bidder.to_string()]
            .as_f64()
            .unwrap();
        assert!((got - want).abs() < 1e-6);
    }
    for (bidder, want) in [(0, 11.0), (1, 17.0), (2, 15.0)] {
        let got = rules["wt-nearest"]["prices"][bidder.to_string()].as_f64().unwrap();
        assert!((got - want).abs() < 1e-6);
    }
    assert!(rules["wt-nearest"]["certified_core"].as_bool().unwrap());
}

#[test]
fn price_single_rule_flag() {
    let out = run(&[
        "price",
        data("ex1.json").to_str().unwrap(),
        "--rule",
        "wt-nearest",
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["rules"].as_object().unwrap().len(), 1);
}

#[test]
fn price_missing_file_exits_2() {
    let out = run(&["price", "does-not-exist.json"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("cannot open"));
}

#[test]
fn price_writes_out_file_and_dumps_lp() {
    let dir = tempfile::tempdir().unwrap();
    let out_path = dir.path().join("report.json");
    let dump_dir = dir.path().join("lps");
    let out = run(&[
        "price",
        data("ex1.json").to_str().unwrap(),
        "--rule",
        "vanilla-vcg-nearest",
        "--out",
        out_path.to_str().unwrap(),
        "--dump-lp",
        dump_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&out_path).unwrap()).unwrap();
    assert_eq!(report["goods"].as_u64().unwrap(), 3);
    let dumps: Vec<_> = std::fs::read_dir(&dump_dir).unwrap().collect();
    assert!(!dumps.is_empty(), "LP dump directory is empty");
}

#[test]
fn price_accepts_cats_input() {
    let out = run(&["price", data("cats/hand-comments.cats").to_str().unwrap()]);
    let report = stdout_json(&out);
    assert_eq!(report["goods"].as_u64().unwrap(), 4);
}

#[test]
fn price_rejects_invalid_instance() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    std::fs::write(
        &path,
        r#"{"goods":1,"bidders":[{"id":0,"bids":[{"bundle":[5],"value":1.0}]}]}"#,
    )
    .unwrap();
    let out = run(&["price", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("invalid good"));
}

#[test]
fn diagnose_verdicts() {
    let out = run(&[
        "diagnose",
        data("ex1.json").to_str().unwrap(),
        "--typespaces",
        data("ex1-typespaces.json").to_str().unwrap(),
    ]);
    let report = stdout_json(&out);
    assert_eq!(report["verdict"], "NoIcCoreCA");

    let out = run(&["diagnose", data("twin-goods.json").to_str().unwrap()]);
    assert_eq!(stdout_json(&out)["verdict"], "WtUniqueIcCoreCA");

    let out = run(&[
        "diagnose",
        data("twin-goods.json").to_str().unwrap(),
        "--typespaces",
        data("twin-goods-floors.json").to_str().unwrap(),
    ]);
    assert_eq!(stdout_json(&out)["verdict"], "ContinuumOfIcCoreCAs");
}

#[test]
fn diagnose_too_large_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("big.json");
    let bidders: Vec<String> = (0..21)
        .map(|i| format!(r#"{{"id":{i},"bids":[{{"bundle":[0],"value":1.0}}]}}"#))
        .collect();
    std::fs::write(
        &path,
        format!(r#"{{"goods":1,"bidders":[{}]}}"#, bidders.join(",")),
    )
    .unwrap();
    let out = run(&["diagnose", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(3));
}

fn read_csv_without_time_columns(path: &Path) -> Vec<Vec<String>> {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let headers = reader.headers().unwrap().clone();
    let drop: Vec<usize> = headers
        .iter()
        .enumerate()
        .filter(|(_, h)| *h == "wt_ms" || *h == "ccg_ms")
        .map(|(k, _)| k)
        .collect();
    let mut rows = vec![headers
        .iter()
        .enumerate()
        .filter(|(k, _)| !drop.contains(k))
        .map(|(_, v)| v.to_string())
        .collect::<Vec<_>>()];
    for record in reader.records() {
        let record = record.unwrap();
        rows.push(
            record
                .iter()
                .enumerate()
                .filter(|(k, _)| !drop.contains(k))
                .map(|(_, v)| v.to_string())
                .collect(),
        );
    }
    rows
}

#[test]
fn sweep_is_deterministic_and_resumable() {
    let dir = tempfile::tempdir().unwrap();
    let out_a = dir.path().join("a");
    let out_b = dir.path().join("b");
    let args = |out: &Path| {
        vec![
            "sweep".to_string(),
            "--goods".into(),
            "4".into(),
            "--bids".into(),
            "8".into(),
            "--count".into(),
            "2".into(),
            "--k".into(),
            "1,2".into(),
            "--seed".into(),
            "9".into(),
            "--out".into(),
            out.to_str().unwrap().to_string(),
        ]
    };
    let first = auction().args(args(&out_a)).output().unwrap();
    assert!(first.status.success());
    let second = auction().args(args(&out_b)).output().unwrap();
    assert!(second.status.success());
    assert_eq!(
        read_csv_without_time_columns(&out_a.join("metrics.csv")),
        read_csv_without_time_columns(&out_b.join("metrics.csv")),
        "two fresh runs differ"
    );

    // Second run over the same directory resumes every cell.
    let resumed = auction().args(args(&out_a)).output().unwrap();
    assert!(resumed.status.success());
    let text = String::from_utf8_lossy(&resumed.stdout).to_string();
    assert!(text.contains("(4 resumed"), "unexpected summary: {text}");
    assert_eq!(
        read_csv_without_time_columns(&out_a.join("metrics.csv")),
        read_csv_without_time_columns(&out_b.join("metrics.csv")),
        "resume changed the output"
    );
}

#[test]
fn sweep_row_count_matches_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--goods",
        "3",
        "--bids",
        "6",
        "--count",
        "2",
        "--k",
        "1",
        "--rules",
        "wt-nearest",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(reader.records().count(), 2, "one row per (instance, K, rule) cell");
}

#[test]
fn sweep_nested_wt_payments_increase_with_k() {
    // Checked from the emitted CSV, as the harness contract promises.
    let dir = tempfile::tempdir().unwrap();
    let out = run(&[
        "sweep",
        "--goods",
        "5",
        "--bids",
        "10",
        "--count",
        "3",
        "--k",
        "1,2,4,8",
        "--seed",
        "17",
        "--rules",
        "wt-nearest",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let mut reader = csv::Reader::from_path(dir.path().join("formulations.csv")).unwrap();
    let mut payments: std::collections::BTreeMap<(String, usize), Vec<(usize, f64)>> =
        std::collections::BTreeMap::new();
    for record in reader.records() {
        let r = record.unwrap();
        let id = r.get(0).unwrap().to_string();
        let k: usize = r.get(1).unwrap().parse().unwrap();
        let bidder: usize = r.get(2).unwrap().parse().unwrap();
        let payment: f64 = r.get(3).unwrap().parse().unwrap();
        payments.entry((id, bidder)).or_default().push((k, payment));
    }
    assert!(!payments.is_empty());
    for ((id, bidder), mut series) in payments {
        series.sort_by_key(|&(k, _)| k);
        for pair in series.windows(2) {
            assert!(
                pair[1].1 >= pair[0].1 - 1e-6,
                "{id} bidder {bidder}: payment fell from {} (K={}) to {} (K={})",
                pair[0].1,
                pair[0].0,
                pair[1].1,
                pair[1].0
            );
        }
    }
}

#[test]
fn sweep_with_cats_glob() {
    let dir = tempfile::tempdir().unwrap();
    let pattern = data("cats").join("gen-xor-*.cats");
    let out = run(&[
        "sweep",
        "--cats-glob",
        pattern.to_str().unwrap(),
        "--k",
        "1",
        "--rules",
        "vanilla-vcg-nearest",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let mut reader = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
    assert_eq!(reader.records().count(), 8);
}

#[test]
fn sweep_rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("sweep.cfg");
    std::fs::write(&cfg, "unknown_key = 1\n").unwrap();
    let out = run(&["sweep", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn parse_cats_converts() {
    let dir = tempfile::tempdir().unwrap();
    let json = dir.path().join("out.json");
    let canon = dir.path().join("canon.cats");
    let out = run(&[
        "parse-cats",
        data("cats/hand-whitespace.cats").to_str().unwrap(),
        "--to-json",
        json.to_str().unwrap(),
        "--canonical",
        canon.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let text = std::fs::read_to_string(&canon).unwrap();
    assert!(text.starts_with("goods 2\nbids 3\ndummy 1\n"));
    let instance: auction_core::Instance =
        serde_json::from_str(&std::fs::read_to_string(&json).unwrap()).unwrap();
    assert!(instance.validate().is_empty());
}

#[test]
fn gen_instance_output_prices_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("inst.json");
    let out = run(&[
        "gen-instance",
        "--goods",
        "4",
        "--bids",
        "8",
        "--seed",
        "3",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    let priced = run(&["price", path.to_str().unwrap(), "--rule", "vanilla-vcg-nearest"]);
    assert!(priced.status.success());
}

#[test]
fn gen_typespace_nested_family_files() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("ts");
    let out = run(&[
        "gen-typespace",
        "--instance",
        data("ex1.json").to_str().unwrap(),
        "--beta",
        "0.6",
        "--seed",
        "5",
        "--k-list",
        "1,2,4",
        "--out",
        out_dir.to_str().unwrap(),
    ]);
    assert!(out.status.success());
    for k in [1usize, 2, 4] {
        let path = out_dir.join(format!("typespaces-k{k}.json"));
        let spaces: Vec<auction_core::LinearTypeSpace> =
            serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
        assert_eq!(spaces.len(), 10);
        assert!(spaces.iter().all(|ts| ts.constraints.len() == k));
    }
    // The generated file is directly consumable by price.
    let priced = run(&[
        "price",
        data("ex1.json").to_str().unwrap(),
        "--typespaces",
        out_dir.join("typespaces-k2.json").to_str().unwrap(),
        "--rule",
        "wt-nearest",
    ]);
    assert!(priced.status.success());
}

#[test]
fn unknown_rule_is_rejected() {
    let out = run(&[
        "price",
        data("ex1.json").to_str().unwrap(),
        "--rule",
        "nearest-and-dearest",
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown payment rule"));
}
