use std::path::Path;
use std::process::{Command, Output};

fn ldago(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ldago"))
        .args(args)
        .current_dir(cwd)
        .output()
        .expect("spawn ldago")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn field(text: &str, key: &str) -> String {
    text.lines()
        .find_map(|l| l.strip_prefix(key).map(|v| v.trim().to_string()))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
}

#[test]
fn simulate_fit_predict_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let sim = ldago(&["simulate", "--setting", "c4", "--seed", "3", "--n-test", "1000", "--out", "train.csv,test.csv"], d);
    assert!(sim.status.success(), "{}", String::from_utf8_lossy(&sim.stderr));
    assert!(d.join("train.manifest.json").exists());
    let header = std::fs::read_to_string(d.join("train.csv")).unwrap();
    assert_eq!(header.lines().count(), 201);

    let fit = ldago(&["fit", "--train", "train.csv", "--model", "m.txt", "--report", "r.json"], d);
    assert!(fit.status.success(), "{}", String::from_utf8_lossy(&fit.stderr));
    assert_eq!(field(&stdout(&fit), "loss_path"), "CE");
    let report = std::fs::read_to_string(d.join("r.json")).unwrap();
    assert!(report.contains("\"loss_trace\""));

    let pred = ldago(&["predict", "--model", "m.txt", "--input", "test.csv", "--labeled", "--scores", "--out", "pred.csv"], d);
    assert!(pred.status.success());
    let err: f64 = field(&String::from_utf8_lossy(&pred.stderr), "error_rate").parse().unwrap();
    assert!(err < 0.15, "error rate {err}");
    let out = std::fs::read_to_string(d.join("pred.csv")).unwrap();
    let mut lines = out.lines();
    assert_eq!(lines.next(), Some("label,score_0,score_1"));
    assert_eq!(lines.count(), 1000);

    let diag = ldago(&["diagnose", "--train", "train.csv"], d);
    assert_eq!(field(&stdout(&diag), "selected_loss"), "CE");
}

#[test]
fn exit_codes_distinguish_usage_and_runtime_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    assert_eq!(ldago(&["--help"], d).status.code(), Some(0));
    assert_eq!(ldago(&["fit"], d).status.code(), Some(1));
    assert_eq!(ldago(&["simulate", "--setting", "Z9", "--out", "a,b"], d).status.code(), Some(1));
    let missing = ldago(&["fit", "--train", "nope.csv", "--model", "m.txt"], d);
    assert_eq!(missing.status.code(), Some(2));
    assert!(!String::from_utf8_lossy(&missing.stderr).is_empty());
    std::fs::write(d.join("bad.cfg"), "no_such_key = 1\n").unwrap();
    std::fs::write(d.join("t.csv"), "x0,label\n1,0\n2,1\n").unwrap();
    let bad_cfg = ldago(&["fit", "--train", "t.csv", "--model", "m.txt", "--config", "bad.cfg"], d);
    assert_eq!(bad_cfg.status.code(), Some(2));
}

#[test]
fn bench_output_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let args = |out: &'static str| {
        [
            "bench", "--settings", "B1,E2", "--methods", "LDAGO,NB", "--replicates", "2",
            "--n-test", "500", "--threads", "2", "--out", out,
        ]
    };
    for out in ["one", "two"] {
        let run = ldago(&args(out), d);
        assert!(run.status.success(), "{}", String::from_utf8_lossy(&run.stderr));
    }
    for file in ["table2.csv", "diagnostics.csv", "summary.md"] {
        let a = std::fs::read(d.join("one").join(file)).unwrap();
        let b = std::fs::read(d.join("two").join(file)).unwrap();
        assert_eq!(a, b, "{file} differs");
    }
}

#[test]
fn gradcheck_passes_and_reports_errors() {
    let dir = tempfile::tempdir().unwrap();
    let run = ldago(&["gradcheck", "--p", "6", "--d", "2", "--seed", "4"], dir.path());
    assert!(run.status.success());
    let ce: f64 = field(&stdout(&run), "ce_relative_error").parse().unwrap();
    assert!(ce < 1e-5);
    assert_eq!(ldago(&["gradcheck", "--p", "2", "--d", "3"], dir.path()).status.code(), Some(2));
}
