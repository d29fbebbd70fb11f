use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use stratboost::io::{read_dataset, read_fit, to_json, write_dataset, ColumnRoles, FitDocument};
use stratboost::{run_boosting, BoostingConfig, StoppingRule};
use tempfile::TempDir;

const CONFIG: &str = r#"{
  "true_beta": [0.5, 0.5, 0, 0, 0, -0.5, 0.5, 0.5, 0, 0],
  "num_strata": 5,
  "mean_stratum_size": 100,
  "cov_structure": {"type": "ar_block", "block_size": 5, "rho": 0.6},
  "censor": {"type": "uniform", "upper": 2.0}
}"#;

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stratboost"))
        .args(args)
        .env_remove("STRATBOOST_THREADS")
        .output()
        .unwrap()
}

fn ok(args: &[&str]) -> String {
    let out = run(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

struct Fixture {
    dir: TempDir,
}

impl Fixture {
    fn new() -> Self {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("config.json"), CONFIG).unwrap();
        let f = Fixture { dir };
        ok(&[
            "simulate",
            "--config",
            s(&f.path("config.json")),
            "--seed",
            "42",
            "--out",
            s(&f.path("data.csv")),
            "--truth",
            s(&f.path("truth.json")),
        ]);
        f
    }

    fn path(&self, name: &str) -> PathBuf {
        self.dir.path().join(name)
    }

    fn data(&self) -> String {
        s(&self.path("data.csv")).to_string()
    }
}

fn schema_check(schema_file: &str, doc: &Value) {
    let text = fs::read_to_string(Path::new(env!("CARGO_MANIFEST_DIR")).join("schemas").join(schema_file)).unwrap();
    let schema: Value = serde_json::from_str(&text).unwrap();
    let validator = jsonschema::validator_for(&schema).unwrap();
    let errors: Vec<String> = validator.iter_errors(doc).map(|e| e.to_string()).collect();
    assert!(errors.is_empty(), "{schema_file}: {errors:?}");
}

fn json(text: &str) -> Value {
    serde_json::from_str(text).unwrap()
}

#[test]
fn fit_matches_library_and_round_trips() {
    let f = Fixture::new();
    let out = f.path("fit.json");
    ok(&[
        "fit", "--data", &f.data(), "--strata", "strata", "--stop", "fixed", "--iterations", "75",
        "--rate", "0.1", "--trace", "--out", s(&out),
    ]);
    let text = fs::read_to_string(&out).unwrap();
    let doc = json(&text);
    schema_check("fit.schema.json", &doc);
    assert_eq!(doc["iterations_run"], 75);

    let roles = ColumnRoles { stratum: Some("strata".into()), ..Default::default() };
    let data = read_dataset(&f.path("data.csv"), &roles).unwrap();
    let fit = run_boosting(&data, &BoostingConfig::new(0.1, 500), &StoppingRule::Fixed { iterations: 75 }).unwrap();
    let parsed = read_fit(&out).unwrap();
    assert_eq!(parsed.beta_vector(), fit.beta);

    // write → read → write is byte-identical
    assert_eq!(to_json(&parsed).unwrap(), text);
    assert_eq!(to_json(&FitDocument::from_fit(&fit, &data, true, false)).unwrap(), text);
}

#[test]
fn dataset_round_trip_is_byte_identical() {
    let f = Fixture::new();
    let roles = ColumnRoles { stratum: Some("strata".into()), ..Default::default() };
    let data = read_dataset(&f.path("data.csv"), &roles).unwrap();
    write_dataset(&data, &f.path("again.csv")).unwrap();
    assert_eq!(
        fs::read(f.path("data.csv")).unwrap(),
        fs::read(f.path("again.csv")).unwrap()
    );
}

#[test]
fn defaults_and_rule_flags() {
    let f = Fixture::new();
    let default = json(&ok(&["fit", "--data", &f.data(), "--strata", "strata"]));
    assert_eq!(default["iterations_run"], 500);
    assert_eq!(default["rate"], 0.01);

    let k5 = json(&ok(&[
        "fit", "--data", &f.data(), "--strata", "strata", "--stop", "num-selected", "--target", "5",
        "--rate", "0.1", "--max-iterations", "5000",
    ]));
    assert_eq!(k5["coefficients"].as_object().unwrap().len(), 5);

    let bic = json(&ok(&["fit", "--data", &f.data(), "--strata", "strata", "--stop", "bic", "--rate", "0.1"]));
    schema_check("fit.schema.json", &bic);
    assert_eq!(bic["criterion"]["best"], bic["iterations_run"]);
}

#[test]
fn cv_is_thread_count_independent() {
    let f = Fixture::new();
    let args = |t: &'static str| {
        vec![
            "--threads".to_string(), t.into(), "cv".into(), "--data".into(), f.data(), "--strata".into(),
            "strata".into(), "--folds".into(), "5".into(), "--max-iterations".into(), "100".into(),
            "--rate".into(), "0.1".into(), "--seed".into(), "3".into(),
        ]
    };
    let one = ok(&args("1").iter().map(String::as_str).collect::<Vec<_>>());
    let four = ok(&args("4").iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(one, four);
    let doc = json(&one);
    schema_check("fit.schema.json", &doc);
    assert_eq!(doc["stopping"]["rule"], "cross_validation");
    assert_eq!(doc["cross_validation"]["total"].as_array().unwrap().len(), 101);
}

#[test]
fn downstream_commands() {
    let f = Fixture::new();
    let fit = f.path("fit.json");
    ok(&[
        "fit", "--data", &f.data(), "--strata", "strata", "--stop", "num-selected", "--target", "5",
        "--rate", "0.1", "--max-iterations", "5000", "--out", s(&fit),
    ]);

    let truth = json(&fs::read_to_string(f.path("truth.json")).unwrap());
    schema_check("truth.schema.json", &truth);

    let hr = ok(&["predict", "--fit", s(&fit), "--data", &f.data()]);
    let lines: Vec<&str> = hr.lines().collect();
    assert_eq!(lines[0], "row,hazard_ratio");
    assert_eq!(lines.len() as u64 - 1, truth["n"].as_u64().unwrap());

    let inf = json(&ok(&["inference", "--fit", s(&fit), "--data", &f.data(), "--strata", "strata"]));
    schema_check("inference.schema.json", &inf);
    assert_eq!(inf["rows"].as_array().unwrap().len(), 5);

    let stab = json(&ok(&[
        "stability", "--data", &f.data(), "--strata", "strata", "--subsamples", "4", "--stop", "fixed",
        "--iterations", "50", "--rate", "0.1",
    ]));
    schema_check("stability.schema.json", &stab);
    assert_eq!(stab["frequencies"].as_array().unwrap().len(), 10);

    let summary = json(&ok(&["strata-summary", "--data", &f.data(), "--var", "strata"]));
    schema_check("strata_summary.schema.json", &summary);
    assert_eq!(summary["groups"].as_array().unwrap().len(), 5);
    let cont = json(&ok(&["strata-summary", "--data", &f.data(), "--var", "V1"]));
    schema_check("strata_summary.schema.json", &cont);
    assert_eq!(cont["grouping"]["rule"], "median_split");

    let metrics = json(&ok(&["metrics", "--fit", s(&fit), "--truth", s(&f.path("truth.json"))]));
    schema_check("metrics.schema.json", &metrics);
    assert_eq!(metrics["selected"], 5);
}

#[test]
fn stability_defaults() {
    let help = ok(&["stability", "--help"]);
    assert!(help.contains("[default: 50]"));
    assert!(help.contains("[default: 0.5]"));
    let fit_help = ok(&["fit", "--help"]);
    assert!(fit_help.contains("[default: 0.01]"));
    assert!(fit_help.contains("[default: 0.001]"));
    assert!(fit_help.contains("[default: 10]"));
}

fn error_record(out: &Output) -> Value {
    let stderr = String::from_utf8(out.stderr.clone()).unwrap();
    assert_eq!(stderr.lines().count(), 1, "{stderr}");
    json(&stderr)
}

#[test]
fn exit_codes() {
    let dir = tempfile::tempdir().unwrap();

    let usage = run(&["fit"]);
    assert_eq!(usage.status.code(), Some(1));
    assert_eq!(error_record(&usage)["code"], 1);
    let usage = run(&["fit", "--data", "x.csv", "--stop", "num-selected"]);
    assert_eq!(usage.status.code(), Some(1));

    let bad = dir.path().join("bad.csv");
    fs::write(&bad, "time,delta,x\n1,1,0.5\n2,2,0.1\n").unwrap();
    let out = run(&["fit", "--data", s(&bad)]);
    assert_eq!(out.status.code(), Some(2));
    let rec = error_record(&out);
    assert!(rec["message"].as_str().unwrap().contains('3'), "{rec}");

    let missing = run(&["fit", "--data", s(&dir.path().join("nope.csv"))]);
    assert_eq!(missing.status.code(), Some(2));

    let flat = dir.path().join("flat.csv");
    fs::write(&flat, "time,delta,x\n1,1,0.5\n2,1,0.5\n3,0,0.5\n").unwrap();
    let out = run(&["fit", "--data", s(&flat)]);
    assert_eq!(out.status.code(), Some(3));
    assert_eq!(error_record(&out)["code"], 3);

    assert_eq!(run(&["--help"]).status.code(), Some(0));
}

#[test]
fn bench_emits_table() {
    let out = ok(&["bench", "--n", "100,200", "--p", "20,40", "--iterations", "3", "--repeats", "1"]);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "n,p,iterations,seconds_per_iteration");
    assert_eq!(lines.len(), 4);
}
