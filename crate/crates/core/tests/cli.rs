use std::path::Path;
use std::process::{Command, Output};

fn fairrank(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fairrank")).args(args).output().expect("spawn fairrank")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_string_lossy().into_owned()
}

fn stderr_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(out.stderr.trim_ascii()).expect("error report is JSON")
}

#[test]
fn simulate_writes_queries_times_slots_rows() {
    let dir = tempfile::tempdir().unwrap();
    let (log, truth) = (path(dir.path(), "t.csv"), path(dir.path(), "tr.csv"));
    let out = fairrank(&["simulate", "--queries", "100", "--slots", "50", "--seed", "1", "--out", &log, "--truth", &truth]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(&log).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("query_id,item_id,group,score,position,label"));
    assert_eq!(lines.count(), 5_000);
    assert!(std::fs::read_to_string(&truth).unwrap().lines().count() > 1);

    let meta: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(format!("{log}.meta.json")).unwrap()).unwrap();
    assert_eq!(meta["format"], "fairrank.meta/1");
    assert_eq!(meta["config"]["queries"], 100);
    assert_eq!(meta["argv"][1], "simulate");
    assert!(meta["rng"].as_str().unwrap().contains("chacha8"));
}

#[test]
fn usage_errors_exit_two() {
    let out = fairrank(&["simulate", "--out", "x.csv", "--no-such-flag"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
    assert_eq!(fairrank(&["no-such-command"]).status.code(), Some(2));
    assert_eq!(fairrank(&["train-eodds", "--input", "a", "--weights", "b", "--out", "c", "--mode", "odd"]).status.code(), Some(2));
}

#[test]
fn group_without_positives_is_a_pipeline_error() {
    let dir = tempfile::tempdir().unwrap();
    let log = path(dir.path(), "log.csv");
    assert!(fairrank(&["simulate", "--queries", "200", "--population", "2000", "--out", &log]).status.success());
    let weights = path(dir.path(), "w.json");
    assert!(fairrank(&["estimate-bias", "--input", &log, "--out", &weights]).status.success());

    // drop every click in group 1
    let text = std::fs::read_to_string(&log).unwrap();
    let edited: String = text
        .lines()
        .enumerate()
        .map(|(i, line)| {
            let fields: Vec<&str> = line.split(',').collect();
            if i > 0 && fields[2] == "1" {
                format!("{},0\n", fields[..5].join(","))
            } else {
                format!("{line}\n")
            }
        })
        .collect();
    let silent = path(dir.path(), "silent.csv");
    std::fs::write(&silent, edited).unwrap();

    let model = path(dir.path(), "m.json");
    let out = fairrank(&["train-eopp", "--input", &silent, "--weights", &weights, "--out", &model]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "NoPositivesInGroup");
    assert!(!Path::new(&model).exists());
}

#[test]
fn missing_files_and_bad_options_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = fairrank(&["score", "--model", &path(dir.path(), "none.json"), "--input", "x", "--out", "y"]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "Io");

    let log = path(dir.path(), "log.csv");
    assert!(fairrank(&["simulate", "--queries", "50", "--population", "1000", "--out", &log]).status.success());
    let out = fairrank(&["evaluate", "--input", &log, "--rerank", "--out", &path(dir.path(), "r.json")]);
    assert_eq!(out.status.code(), Some(1));
    assert_eq!(stderr_json(&out)["error"], "InvalidParameter");
}

#[test]
fn score_appends_a_fair_score_column() {
    let dir = tempfile::tempdir().unwrap();
    let log = path(dir.path(), "log.csv");
    let weights = path(dir.path(), "w.json");
    let model = path(dir.path(), "eopp.json");
    let scored = path(dir.path(), "scored.csv");
    assert!(fairrank(&["simulate", "--queries", "300", "--population", "3000", "--out", &log]).status.success());
    assert!(fairrank(&["estimate-bias", "--input", &log, "--out", &weights]).status.success());
    assert!(fairrank(&["train-eopp", "--input", &log, "--weights", &weights, "--alpha", "0", "--out", &model]).status.success());
    assert!(fairrank(&["score", "--model", &model, "--input", &log, "--out", &scored]).status.success());

    let text = std::fs::read_to_string(&scored).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("query_id,item_id,group,score,position,label,fair_score"));
    for line in lines {
        let f: Vec<&str> = line.split(',').collect();
        // alpha 0 leaves every score untouched
        assert_eq!(f[3].parse::<f64>().unwrap(), f[6].parse::<f64>().unwrap());
    }

    let report = path(dir.path(), "report.json");
    assert!(fairrank(&["evaluate", "--input", &scored, "--out", &report]).status.success());
    let report: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&report).unwrap()).unwrap();
    assert_eq!(report["score_column"], "fair_score");
    let auc = report["auc_riemann"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&auc));
}

#[test]
fn rerun_reproduces_outputs_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    let log = path(dir.path(), "log.csv");
    assert!(fairrank(&["simulate", "--queries", "80", "--population", "1000", "--seed", "4", "--out", &log]).status.success());
    let first = std::fs::read(&log).unwrap();
    std::fs::remove_file(&log).unwrap();
    let out = fairrank(&["rerun", "--metadata", &format!("{log}.meta.json")]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read(&log).unwrap(), first);
}
