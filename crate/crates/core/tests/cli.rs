use std::path::Path;
use std::process::{Command, Output};

fn intersim(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_intersim"))
        .args(args)
        .output()
        .unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn help_lists_subcommands() {
    let out = intersim(&["--help"]);
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    for cmd in ["train", "eval", "baseline", "ablate", "selfcheck"] {
        assert!(text.contains(cmd), "{cmd} missing from help");
    }
}

#[test]
fn unknown_flags_and_missing_checkpoints_fail() {
    assert!(!intersim(&["train", "--bogus"]).status.success());
    let out = intersim(&[
        "eval",
        "--sdc",
        "/nonexistent/final.ckpt",
        "--episodes",
        "2",
    ]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stderr).contains("no such checkpoint"));
    assert!(!intersim(&["baseline", "--name", "teleport"])
        .status
        .success());
}

#[test]
fn baseline_writes_report_logs_and_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("rule");
    let res = intersim(&[
        "baseline",
        "--name",
        "rule",
        "--episodes",
        "4",
        "--out",
        s(&out),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["episodes"], 4);
    assert_eq!(report["sdc_policy"], "rule");
    let seeds = std::fs::read_to_string(out.join("seeds.txt")).unwrap();
    assert_eq!(seeds.lines().count(), 4);
    assert!(out.join("logs.csv").exists());
    assert!(out.join("speed_bins.csv").exists());

    // Re-running from the written seed file reproduces the report.
    let again = dir.path().join("again");
    let res = intersim(&[
        "baseline",
        "--name",
        "rule",
        "--seeds",
        s(&out.join("seeds.txt")),
        "--out",
        s(&again),
    ]);
    assert!(res.status.success());
    assert_eq!(
        std::fs::read(out.join("logs.csv")).unwrap(),
        std::fs::read(again.join("logs.csv")).unwrap()
    );
}

#[test]
fn train_then_eval_and_ablate() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let res = intersim(&[
        "train",
        "--desk",
        "--seed",
        "4",
        "--out",
        s(&run),
        "--set",
        "updates=2",
        "--set",
        "n_envs=2",
        "--set",
        "rollout_len=16",
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let ckpt = run.join("final.ckpt");
    assert!(ckpt.exists());
    let metrics = std::fs::read_to_string(run.join("metrics.csv")).unwrap();
    assert_eq!(metrics.lines().filter(|l| !l.starts_with('#')).count(), 3);

    let ev = dir.path().join("eval");
    let res = intersim(&[
        "eval",
        "--sdc",
        s(&ckpt),
        "--peds",
        s(&ckpt),
        "--episodes",
        "3",
        "--out",
        s(&ev),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(ev.join("report.json")).unwrap()).unwrap();
    assert_eq!(report["train_seed"], 4);

    let ab = dir.path().join("ablate");
    let res = intersim(&[
        "ablate",
        "--sdc",
        "constant",
        "--multipliers",
        "0,1",
        "--episodes",
        "3",
        "--out",
        s(&ab),
    ]);
    assert!(
        res.status.success(),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = std::fs::read_to_string(ab.join("ablation.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
}
