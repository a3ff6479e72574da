use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn farm(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_farm"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn farm")
}

fn ok(args: &[&str], cwd: &Path) -> String {
    let out = farm(args, cwd);
    assert!(
        out.status.success(),
        "farm {args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

/// Report without the fields that depend on wall-clock timing.
fn untimed_report(path: &Path) -> Value {
    let mut v = json(path);
    let obj = v.as_object_mut().unwrap();
    obj.remove("bench");
    obj.remove("time_test");
    v
}

const STAGE_FILES: [&str; 9] = [
    "matrix.csv",
    "fuzzy_model.json",
    "transactions_train.csv",
    "transactions_test.csv",
    "rules_fpgrowth.json",
    "rules_apriori.json",
    "predictions_fpgrowth.csv",
    "predictions_apriori.csv",
    "report.json",
];

#[test]
fn run_with_synthetic_seed() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        &["run", "--seed", "42", "--reps", "5", "--out", "out"],
        dir.path(),
    );
    assert!(stdout.contains("fpgrowth") && stdout.contains("apriori"));
    let report = json(&dir.path().join("out/report.json"));
    let algs = report["algorithms"].as_array().unwrap();
    assert_eq!(algs.len(), 2);
    assert_eq!(algs[0]["itemset_count"], algs[1]["itemset_count"]);
    assert!(algs[0]["rule_count"].as_u64().unwrap() > 0);
    assert_eq!(report["config"]["synth_seed"], 42);
    assert_eq!(report["config"]["k_features"], 4);
    assert_eq!(report["config"]["repetitions"], 5);
}

#[test]
fn missing_dengue_csv_names_ingest() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--seed", "1", "--out", "in"], dir.path());
    let out = farm(
        &[
            "run",
            "--features-csv",
            "in/features.csv",
            "--dengue-csv",
            "in/nope.csv",
            "--out",
            "out",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("ingest"), "{stderr}");
    assert!(stderr.contains("nope.csv"), "{stderr}");
}

#[test]
fn csv_inputs_match_synthetic_matrix() {
    let dir = tempfile::tempdir().unwrap();
    ok(&["synth", "--seed", "9", "--out", "in"], dir.path());
    ok(&["ingest", "--seed", "9", "--out", "a"], dir.path());
    ok(
        &[
            "ingest",
            "--features-csv",
            "in/features.csv",
            "--dengue-csv",
            "in/dengue.csv",
            "--out",
            "b",
        ],
        dir.path(),
    );
    assert_eq!(
        fs::read(dir.path().join("a/matrix.csv")).unwrap(),
        fs::read(dir.path().join("b/matrix.csv")).unwrap()
    );
}

#[test]
fn stages_compose_to_run() {
    let dir = tempfile::tempdir().unwrap();
    let flags = ["--seed", "5", "--reps", "5", "--out", "out"];
    let with = |cmd: &'static str| [&[cmd][..], &flags[..]].concat();
    ok(&with("run"), dir.path());
    fs::rename(dir.path().join("out"), dir.path().join("whole")).unwrap();
    for stage in ["ingest", "fuzzify", "mine", "classify", "bench", "eval"] {
        ok(&with(stage), dir.path());
    }
    for name in STAGE_FILES {
        let a = dir.path().join("whole").join(name);
        let b = dir.path().join("out").join(name);
        if name == "report.json" {
            assert_eq!(untimed_report(&a), untimed_report(&b));
        } else {
            assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{name}");
        }
    }
}

#[test]
fn repeated_runs_are_identical() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["run", "--seed", "11", "--reps", "5", "--out", "out"];
    ok(&args, dir.path());
    fs::rename(dir.path().join("out"), dir.path().join("first")).unwrap();
    ok(&args, dir.path());
    for name in STAGE_FILES {
        let a = dir.path().join("first").join(name);
        let b = dir.path().join("out").join(name);
        if name == "report.json" {
            assert_eq!(untimed_report(&a), untimed_report(&b));
        } else {
            assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap(), "{name}");
        }
    }
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(
        dir.path().join("farm.json"),
        r#"{"synth_seed": 3, "min_confidence": 0.9, "algorithms": ["apriori"], "repetitions": 2, "out_dir": "cfg-out"}"#,
    )
    .unwrap();
    ok(
        &["run", "--config", "farm.json", "--min-confidence", "0.85"],
        dir.path(),
    );
    let report = json(&dir.path().join("cfg-out/report.json"));
    assert_eq!(report["config"]["min_confidence"], 0.85);
    assert_eq!(report["config"]["synth_seed"], 3);
    assert_eq!(report["algorithms"].as_array().unwrap().len(), 1);
    assert!(report["comparison"].is_null());
    assert!(report["time_test"].is_null());
}

#[test]
fn schema_mismatch_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let flags = ["--seed", "2", "--algorithm", "fpgrowth", "--out", "out"];
    for stage in ["ingest", "fuzzify", "mine"] {
        ok(&[&[stage][..], &flags[..]].concat(), dir.path());
    }
    let rules = dir.path().join("out/rules_fpgrowth.json");
    let text = fs::read_to_string(&rules)
        .unwrap()
        .replace("farm.rules/1", "farm.rules/9");
    fs::write(&rules, text).unwrap();
    let out = farm(&[&["classify"][..], &flags[..]].concat(), dir.path());
    assert!(!out.status.success());
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(
        stderr.contains("classify") && stderr.contains("schema"),
        "{stderr}"
    );
}

#[test]
fn alpha_cut_and_sort_key_flags() {
    let dir = tempfile::tempdir().unwrap();
    ok(
        &[
            "run",
            "--seed",
            "4",
            "--encoding",
            "alpha-cut",
            "--sort-keys",
            "consequent,confidence",
            "--algorithm",
            "fpgrowth",
            "--reps",
            "1",
            "--out",
            "out",
        ],
        dir.path(),
    );
    let report = json(&dir.path().join("out/report.json"));
    assert_eq!(report["config"]["encoding"]["mode"], "alpha-cut");
    assert_eq!(report["config"]["encoding"]["alpha"], 0.5);
    assert_eq!(
        report["config"]["sort_keys"],
        serde_json::json!(["consequent", "confidence"])
    );
}

#[test]
fn invalid_arguments_fail() {
    let dir = tempfile::tempdir().unwrap();
    assert!(
        !farm(&["run", "--seed", "1", "--algorithm", "eclat"], dir.path())
            .status
            .success()
    );
    assert!(!farm(
        &["run", "--seed", "1", "--sort-keys", "lift,lift"],
        dir.path()
    )
    .status
    .success());
    let out = farm(
        &[
            "run",
            "--seed",
            "1",
            "--train-fraction",
            "0.7",
            "--out",
            "o",
        ],
        dir.path(),
    );
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("ingest"));
    assert!(!farm(&["run", "--out", "o"], dir.path()).status.success());
}

#[test]
fn synthetic_bench() {
    let dir = tempfile::tempdir().unwrap();
    let stdout = ok(
        &[
            "bench",
            "--synthetic",
            "--transactions",
            "400",
            "--reps",
            "2",
            "--out",
            "out",
        ],
        dir.path(),
    );
    assert!(stdout.contains("itemsets"));
    let bench = json(&dir.path().join("out/bench_synthetic.json"));
    let reports = bench["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert_eq!(reports[0]["itemset_count"], reports[1]["itemset_count"]);
    assert_eq!(reports[0]["wall_time"].as_array().unwrap().len(), 2);
}
