//! The `signeq` binary: exit codes, config handling and output files.

use std::path::Path;
use std::process::{Command, Output};

fn signeq(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_signeq"))
        .args(args)
        .current_dir(dir)
        .env_remove("SIGNEQ_OUT_DIR")
        .output()
        .expect("binary runs")
}

const SMALL_LINKPRED: &str = r#"
seed = 3
seeds = 2

[linkpred]
k = 6
epochs = 4
budget = 3000

[linkpred.graph]
kind = "two_copy"
extra_edges = 20
base = { kind = "er", n = 40, p = 0.2 }
"#;

#[test]
fn dims_prints_the_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = signeq(&["dims", "--kmax", "5", "--out", "t.csv"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let text = String::from_utf8(out.stdout).unwrap();
    assert_eq!(text.lines().count(), 6);
    assert!(text.lines().nth(2).unwrap().starts_with("2,32,"));
    assert_eq!(std::fs::read_to_string(dir.path().join("t.csv")).unwrap(), text);
}

#[test]
fn quick_check_passes() {
    let dir = tempfile::tempdir().unwrap();
    let out = signeq(&["check", "--quick"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stdout).contains("all checks passed"));
}

#[test]
fn usage_and_config_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(signeq(&["frobnicate"], dir.path()).status.code(), Some(2));
    assert_eq!(signeq(&["polyfit", "--k", "x"], dir.path()).status.code(), Some(2));
    assert_eq!(signeq(&["nbody", "--seeds", "0"], dir.path()).status.code(), Some(2));

    std::fs::write(
        dir.path().join("bad.toml"),
        "seed = 1\n\n[polyfit]\nk = 3\nstepz = 10\n",
    )
    .unwrap();
    let out = signeq(&["polyfit", "--config", "bad.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("stepz") && err.contains("line 5"), "{err}");

    std::fs::write(dir.path().join("top.toml"), "sed = 1\n").unwrap();
    let out = signeq(&["polyfit", "--config", "top.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("sed"));

    std::fs::write(dir.path().join("other.toml"), "experiment = \"nbody\"\n").unwrap();
    assert_eq!(
        signeq(&["polyfit", "--config", "other.toml"], dir.path()).status.code(),
        Some(2)
    );

    // invalid values inside a valid file are configuration errors too
    std::fs::write(dir.path().join("k.toml"), "[polyfit]\nk = 99\n").unwrap();
    let out = signeq(&["polyfit", "--config", "k.toml"], dir.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn reproducible_runs_write_identical_files() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("lp.toml"), SMALL_LINKPRED).unwrap();
    let args = [
        "linkpred",
        "--config",
        "lp.toml",
        "--model",
        "signeq,dot_baseline",
        "--reproducible",
    ];
    let a = signeq(&[&args[..], &["--out-dir", "a"]].concat(), dir.path());
    assert_eq!(a.status.code(), Some(0), "{}", String::from_utf8_lossy(&a.stderr));
    let b = signeq(&[&args[..], &["--out-dir", "b", "--jobs", "2"]].concat(), dir.path());
    assert_eq!(b.status.code(), Some(0));
    for f in ["linkpred.jsonl", "linkpred.csv"] {
        let x = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let y = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(x, y, "{f} differs");
    }
    let jsonl = std::fs::read_to_string(dir.path().join("a/linkpred.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = jsonl.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 4);
    let seeds: Vec<u64> = records.iter().map(|r| r["seed"].as_u64().unwrap()).collect();
    assert_eq!(seeds, vec![3, 3, 4, 4]);
    // the effective config travels with each record
    assert_eq!(records[0]["config"]["k"], 6);
    assert_eq!(records[0]["config"]["epochs"], 4);
    let csv = std::fs::read_to_string(dir.path().join("a/linkpred.csv")).unwrap();
    assert!(csv.starts_with("experiment,model,seed,metric,value,wall_s,calls\n"));
}

#[test]
fn out_dir_precedence() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("p.toml"),
        "out_dir = \"from_file\"\n[polyfit]\nsteps = 20\neval_every = 10\n",
    )
    .unwrap();
    let run = |env: Option<&str>, flag: Option<&str>| {
        let mut c = Command::new(env!("CARGO_BIN_EXE_signeq"));
        c.args(["polyfit", "--config", "p.toml"])
            .current_dir(dir.path())
            .env_remove("SIGNEQ_OUT_DIR");
        if let Some(e) = env {
            c.env("SIGNEQ_OUT_DIR", e);
        }
        if let Some(f) = flag {
            c.args(["--out-dir", f]);
        }
        assert_eq!(c.output().unwrap().status.code(), Some(0));
    };
    run(None, None);
    assert!(dir.path().join("from_file/polyfit.csv").exists());
    run(Some("from_env"), None);
    assert!(dir.path().join("from_env/polyfit.csv").exists());
    run(Some("from_env2"), Some("from_flag"));
    assert!(dir.path().join("from_flag/polyfit.csv").exists());
    assert!(!dir.path().join("from_env2").exists());
}

#[test]
fn nbody_records_call_counts() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(
        dir.path().join("nb.toml"),
        "[nbody]\nn_train = 8\nn_val = 4\nn_test = 4\nsteps = 50\nbatch = 4\nwidth = 8\nchannels = [4, 4, 1]\n",
    )
    .unwrap();
    let out = signeq(
        &[
            "nbody",
            "--config",
            "nb.toml",
            "--dim",
            "3,4",
            "--epochs",
            "1",
            "--reproducible",
        ],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let jsonl = std::fs::read_to_string(dir.path().join("results/nbody.jsonl")).unwrap();
    let calls: Vec<(String, u64, u64)> = jsonl
        .lines()
        .map(|l| {
            let v: serde_json::Value = serde_json::from_str(l).unwrap();
            (
                v["model"].as_str().unwrap().to_string(),
                v["config"]["dim"].as_u64().unwrap(),
                v["calls"].as_u64().unwrap(),
            )
        })
        .collect();
    assert_eq!(calls.len(), 4);
    for (model, d, c) in calls {
        let expected = if model == "frame_average" { 1 << d } else { 1 };
        assert_eq!(c, expected, "{model} d={d}");
    }
}
