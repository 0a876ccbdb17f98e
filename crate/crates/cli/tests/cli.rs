use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn rtbsim(args: &[&str], cwd: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_rtbsim"))
        .args(args)
        .current_dir(cwd)
        .env_remove("RTBSIM_OUT_DIR")
        .output()
        .unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn dataset(dir: &Path) {
    let out = rtbsim(&["generate", "--n-auctions", "120", "--seed", "5", "--out", "data.jsonl"], dir);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn sweep_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    for run in ["a", "b"] {
        let out = rtbsim(
            &[
                "sweep",
                "--input",
                "data.jsonl",
                "--folds",
                "3",
                "--theta1-grid",
                "0,-0.2",
                "--grid-step",
                "0.25",
                "--out",
                run,
            ],
            dir.path(),
        );
        assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    }
    for f in ["sweep.csv", "summary.csv", "sweep.json"] {
        let a = fs::read(dir.path().join("a").join(f)).unwrap();
        assert_eq!(a, fs::read(dir.path().join("b").join(f)).unwrap(), "{f}");
    }
    let csv = fs::read_to_string(dir.path().join("a/sweep.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 2);
    assert!(csv.lines().nth(1).unwrap().starts_with("0,0,train,infeasible,,0,0,0,0,0,0"));
}

#[test]
fn out_dir_env_override() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let out = Command::new(env!("CARGO_BIN_EXE_rtbsim"))
        .args(["optimize", "--input", "data.jsonl", "--theta1", "-0.3", "--grid-step", "0.25"])
        .current_dir(dir.path())
        .env("RTBSIM_OUT_DIR", "envout")
        .output()
        .unwrap();
    assert_eq!(code(&out), 0);
    assert!(dir.path().join("envout/optimization.json").is_file());
}

#[test]
fn optimize_then_evaluate_reproduces_train_changes() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    assert_eq!(
        code(&rtbsim(
            &[
                "optimize",
                "--input",
                "data.jsonl",
                "--theta1",
                "-0.3",
                "--grid-step",
                "0.25",
                "--out",
                "o"
            ],
            dir.path()
        )),
        0
    );
    let opt: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("o/optimization.json")).unwrap()).unwrap();
    assert_eq!(opt["status"], "feasible");

    assert_eq!(
        code(&rtbsim(
            &[
                "evaluate",
                "--input",
                "data.jsonl",
                "--weights",
                "o/optimization.json",
                "--out",
                "e"
            ],
            dir.path()
        )),
        0
    );
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("e/evaluation.json")).unwrap()).unwrap();
    assert_eq!(eval["changes"]["xi"], opt["train_changes"]["xi"]);
    assert_eq!(eval["objective"], opt["objective"]);
    let rows = fs::read_to_string(dir.path().join("e/selections.csv")).unwrap();
    assert_eq!(rows.lines().count(), 121);
}

#[test]
fn baseline_evaluation_has_zero_change() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    assert_eq!(code(&rtbsim(&["evaluate", "--input", "data.jsonl", "--out", "e"], dir.path())), 0);
    let eval: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("e/evaluation.json")).unwrap()).unwrap();
    assert_eq!(eval["changes"]["xi"], serde_json::json!([0.0, 0.0, 0.0, 0.0, 0.0, 0.0]));
    assert_eq!(eval["revenue"], eval["baseline_revenue"]);
}

#[test]
fn csv_and_jsonl_generation_agree() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    assert_eq!(
        code(&rtbsim(
            &["generate", "--n-auctions", "120", "--seed", "5", "--out", "data.csv"],
            dir.path()
        )),
        0
    );
    for input in ["data.jsonl", "data.csv"] {
        let out = format!("o-{input}");
        assert_eq!(
            code(&rtbsim(
                &[
                    "optimize",
                    "--input",
                    input,
                    "--theta1",
                    "-0.2",
                    "--grid-step",
                    "0.25",
                    "--out",
                    &out
                ],
                dir.path()
            )),
            0
        );
    }
    let a = fs::read(dir.path().join("o-data.jsonl/optimization.json")).unwrap();
    assert_eq!(a, fs::read(dir.path().join("o-data.csv/optimization.json")).unwrap());
}

#[test]
fn validation_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    dataset(dir.path());
    let cases: &[&[&str]] = &[
        &["optimize", "--input", "data.jsonl", "--theta1", "0.1"],
        &["optimize", "--input", "data.jsonl", "--theta1", "-0.1", "--grid-step", "0.07"],
        &["optimize", "--input", "data.jsonl", "--theta1", "-0.1", "--theta-others", "0,0"],
        &["sweep", "--input", "data.jsonl", "--folds", "500"],
        &["evaluate", "--input", "data.jsonl", "--weights", "0.5,0.5,0.5,0,0,0"],
        &["generate", "--n-auctions", "0", "--out", "x.jsonl"],
        &["generate", "--out", "x.parquet"],
        &["optimize", "--theta1", "-0.1"],
    ];
    for args in cases {
        let out = rtbsim(args, dir.path());
        assert_eq!(code(&out), 2, "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    fs::write(dir.path().join("bad.jsonl"), "{not json}\n").unwrap();
    assert_eq!(
        code(&rtbsim(&["optimize", "--input", "bad.jsonl", "--theta1", "-0.1"], dir.path())),
        2
    );
}

#[test]
fn runtime_errors_exit_1() {
    let dir = tempfile::tempdir().unwrap();
    let out = rtbsim(&["optimize", "--input", "missing.jsonl", "--theta1", "-0.1"], dir.path());
    assert_eq!(code(&out), 1);
    assert!(String::from_utf8_lossy(&out.stderr).contains("missing.jsonl"));
}
