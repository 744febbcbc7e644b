use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gap_impute::io::{read_dataset, write_ucr_tsv};
use gap_impute::synthetic::{generate, Family, SyntheticSpec};

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_gapimpute"));
    c.env_remove("RUST_LOG").env_remove("GAPIMPUTE_DATA_DIR");
    c
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("spawn gapimpute")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn golden_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/golden")
}

fn sines(dir: &Path, name: &str, n: usize, seed: u64) -> PathBuf {
    let ds = generate(&SyntheticSpec {
        family: Family::Sines,
        n,
        t: 24,
        noise: 0.2,
        seed,
    })
    .unwrap();
    let path = dir.join(name);
    write_ucr_tsv(&ds, &path).unwrap();
    path
}

#[test]
fn help_matches_golden_files() {
    let cases: [(&str, &[&str]); 8] = [
        ("help.txt", &["--help"]),
        ("help_corrupt.txt", &["corrupt", "--help"]),
        ("help_impute.txt", &["impute", "--help"]),
        ("help_impute-test.txt", &["impute-test", "--help"]),
        ("help_classify.txt", &["classify", "--help"]),
        ("help_benchmark.txt", &["benchmark", "--help"]),
        ("help_report.txt", &["report", "--help"]),
        ("help_inspect.txt", &["inspect", "--help"]),
    ];
    let update = std::env::var_os("UPDATE_GOLDEN").is_some();
    for (file, args) in cases {
        let o = run(args);
        assert_eq!(code(&o), 0, "{args:?}");
        let path = golden_dir().join(file);
        if update {
            fs::write(&path, stdout(&o)).unwrap();
            continue;
        }
        let want = fs::read_to_string(&path).unwrap();
        assert_eq!(stdout(&o), want, "{file} differs; rerun with UPDATE_GOLDEN=1 after intended changes");
    }
}

#[test]
fn every_flag_has_a_description() {
    for sub in ["corrupt", "impute", "impute-test", "classify", "benchmark", "report", "inspect"] {
        let text = stdout(&run(&[sub, "--help"]));
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            let t = line.trim_start();
            if !t.starts_with("--") && !t.starts_with("-v") && !t.starts_with("-h") {
                continue;
            }
            // either "  --flag <X>   text" on one line or the text on the next line
            let inline = t.split("  ").filter(|p| !p.trim().is_empty()).count() > 1;
            let next = lines.get(i + 1).is_some_and(|n| n.starts_with("          ") && !n.trim().is_empty());
            assert!(inline || next, "{sub}: undocumented flag line {line:?}");
        }
    }
}

#[test]
fn corrupt_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let input = sines(dir.path(), "in.tsv", 20, 1);
    let mut outs = Vec::new();
    for k in 0..2 {
        let out = dir.path().join(format!("out{k}.tsv"));
        let log = dir.path().join(format!("log{k}.csv"));
        let o = run(&[
            "corrupt", "--in", s(&input), "--mechanism", "MNAR", "--rate", "0.25", "--seed", "0", "--out", s(&out),
            "--log", s(&log),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        outs.push((fs::read(&out).unwrap(), fs::read(&log).unwrap()));
    }
    assert_eq!(outs[0], outs[1]);
    let log = String::from_utf8(outs[0].1.clone()).unwrap();
    assert!(log.starts_with("instance,feature,time,true_value\n"));
    assert!(log.lines().count() > 1);
}

#[test]
fn impute_then_impute_test_on_complete_test_is_identity() {
    let dir = tempfile::tempdir().unwrap();
    let train = sines(dir.path(), "train.tsv", 20, 2);
    let test = sines(dir.path(), "test.tsv", 10, 3);
    let corrupted = dir.path().join("train_missing.tsv");
    let o = run(&[
        "corrupt", "--in", s(&train), "--mechanism", "MCAR", "--rate", "0.2", "--seed", "4", "--out", s(&corrupted),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let pipe = dir.path().join("pipe");
    let imputed = dir.path().join("imputed.csv");
    let o = run(&[
        "impute", "--in", s(&corrupted), "--method", "gap_raw", "--trees", "20", "--max-iters", "2",
        "--pipeline-out", s(&pipe), "--out", s(&imputed),
    ]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert!(read_dataset(&imputed).unwrap().is_complete());

    let test_out = dir.path().join("test_out.tsv");
    let o = run(&["impute-test", "--pipeline", s(&pipe), "--in", s(&test), "--out", s(&test_out)]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    assert_eq!(fs::read(&test_out).unwrap(), fs::read(&test).unwrap());

    let o = run(&["inspect", s(&pipe)]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).contains("best iteration"));
}

#[test]
fn unknown_method_is_a_usage_error_listing_the_registry() {
    let dir = tempfile::tempdir().unwrap();
    let input = sines(dir.path(), "in.tsv", 6, 0);
    let o = run(&["impute", "--in", s(&input), "--method", "nearest", "--out", "x.tsv"]);
    assert_eq!(code(&o), 1);
    let err = stderr(&o);
    assert!(err.contains("nearest"));
    for m in gap_impute::impute::Method::ALL {
        assert!(err.contains(m.name()), "{err}");
    }
}

#[test]
fn exit_codes() {
    assert_eq!(code(&run(&[])), 1);
    assert_eq!(code(&run(&["frobnicate"])), 1);
    assert_eq!(code(&run(&["corrupt", "--in", "x.tsv"])), 1);
    let o = run(&["inspect", "/nonexistent/data.tsv"]);
    assert_eq!(code(&o), 2);

    let dir = tempfile::tempdir().unwrap();
    let input = sines(dir.path(), "in.tsv", 6, 0);
    let o = run(&[
        "corrupt", "--in", s(&input), "--mechanism", "MCAR", "--rate", "1.5", "--out", s(&dir.path().join("o.tsv")),
    ]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));

    // a dataset with gaps cannot be classified directly
    let missing = dir.path().join("m.tsv");
    run(&["corrupt", "--in", s(&input), "--mechanism", "MCAR", "--rate", "0.3", "--out", s(&missing)]);
    let o = run(&["classify", "--train", s(&missing), "--test", s(&input)]);
    assert_eq!(code(&o), 2);
}

#[test]
fn classify_reports_accuracy_and_predictions() {
    let dir = tempfile::tempdir().unwrap();
    let train = sines(dir.path(), "train.tsv", 20, 5);
    let test = sines(dir.path(), "test.tsv", 10, 6);
    let preds = dir.path().join("pred.csv");
    for c in ["rf", "knn"] {
        let o = run(&[
            "classify", "--train", s(&train), "--test", s(&test), "--classifier", c, "--trees", "30", "--out",
            s(&preds),
        ]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert_eq!(stdout(&o).trim(), "accuracy 1.000000");
        let text = fs::read_to_string(&preds).unwrap();
        assert!(text.starts_with("instance,label,predicted\n"));
        assert_eq!(text.lines().count(), 11);
    }
}

fn write_config(dir: &Path) -> PathBuf {
    let config = r#"{
  "datasets": [{"name": "sines", "synthetic": {"family": "sines", "n": 30, "t": 20, "noise": 0.3, "seed": 1}, "n_test": 12}],
  "methods": ["mean", "locf", "gap_raw"],
  "mechanisms": ["MCAR", "MNAR"],
  "rates": [0.25],
  "seeds": [0, 1],
  "imputer": {"gap": {"forest": {"num_trees": 20}, "max_iters": 2}},
  "classifier_forest": {"num_trees": 30}
}"#;
    let path = dir.join("config.json");
    fs::write(&path, config).unwrap();
    path
}

#[test]
fn benchmark_reports_do_not_depend_on_jobs() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path());
    let mut reports = Vec::new();
    for jobs in ["1", "4"] {
        let out = dir.path().join(format!("out{jobs}"));
        let o = run(&["benchmark", "--config", s(&config), "--out-dir", s(&out), "--jobs", jobs]);
        assert_eq!(code(&o), 0, "{}", stderr(&o));
        assert!(stdout(&o).starts_with("12 records (0 failed)"));
        let o = run(&["report", "--in-dir", s(&out), "--format", "csv", "--no-runtime"]);
        assert_eq!(code(&o), 0);
        reports.push(stdout(&o));
    }
    assert_eq!(reports[0], reports[1]);
    let row = reports[0].lines().nth(1).unwrap();
    assert!(row.contains(",0.0,0.0,0.0,"), "{row}");

    let out = dir.path().join("out1");
    let ranks = stdout(&run(&["report", "--in-dir", s(&out), "--ranks", "--format", "markdown"]));
    assert!(ranks.contains("| method | mean rank | mean score | datasets |"));
    let json = stdout(&run(&["report", "--in-dir", s(&out), "--ranks", "--format", "json"]));
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    // 3 metrics x 2 mechanisms x 1 rate x 3 methods
    assert_eq!(rows.as_array().unwrap().len(), 18);
}

#[test]
fn benchmark_rejects_bad_config_as_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    fs::write(
        &path,
        r#"{"datasets": ["x"], "methods": ["mean"], "mechanisms": ["MCAR"], "rates": [0.25], "seeds": [0], "trees": 5}"#,
    )
    .unwrap();
    let o = run(&["benchmark", "--config", s(&path), "--out-dir", s(&dir.path().join("o"))]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("trees: unknown key"));
}
