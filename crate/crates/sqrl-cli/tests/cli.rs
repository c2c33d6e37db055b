use std::path::Path;
use std::process::{Command, Output};

use sqrl::envs::generate_assumption_mdp;

const TINY: &str = r#"
seeds = [3]

[sac]
hidden = [8]
batch_size = 16

[safety]
hidden = [8]
batch_size = 16
n_cand = 5

[pretrain]
n_pre = 4
n_off = 40
learning_starts = 32

[finetune]
n_target = 120
learning_starts = 32

[eval]
episodes = 5
"#;

fn sqrl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sqrl")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn arg(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn pretrain_finetune_evaluate_merge() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let out = dir.path().join("runs");
    let common = ["--config", arg(&cfg), "--out", arg(&out)];

    let o = sqrl(&[&["pretrain"][..], &common].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("seed 3:"));
    let seed_dir = out.join("seed-3");
    let ckpt = seed_dir.join("pretrained.json");
    assert!(ckpt.exists());

    for baseline in ["sqrl", "sac"] {
        let o = sqrl(&[&["finetune"][..], &common, &["--checkpoint", arg(&ckpt), "--baseline", baseline]].concat());
        assert!(o.status.success(), "{}", stderr(&o));
        assert!(seed_dir.join(format!("finetune-{baseline}.jsonl")).exists());
    }

    let o = sqrl(&[&["evaluate"][..], &common, &["--checkpoint", arg(&ckpt), "--eps-safe", "0.2"]].concat());
    assert!(o.status.success(), "{}", stderr(&o));
    let summary: serde_json::Value = serde_json::from_str(stdout(&o).trim()).unwrap();
    assert_eq!(summary["mask_violations"], 0);

    let merged = dir.path().join("all.jsonl");
    let o = sqrl(&[
        "merge-metrics",
        "--out",
        arg(&merged),
        arg(&seed_dir.join("pretrain.jsonl")),
        arg(&seed_dir.join("finetune-sqrl.jsonl")),
    ]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("merged "));
    assert!(merged.exists());
}

#[test]
fn pretrain_steps_below_one_iteration_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("tiny.toml");
    std::fs::write(&cfg, TINY).unwrap();
    let o = sqrl(&["pretrain", "--config", arg(&cfg), "--out", arg(dir.path()), "--steps", "10"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("below one outer iteration"));
}

#[test]
fn missing_checkpoint_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    let o = sqrl(&["evaluate", "--checkpoint", arg(&missing), "--out", arg(dir.path())]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("loading"));
}

#[test]
fn unknown_baseline_is_an_error() {
    let dir = tempfile::tempdir().unwrap();
    let o = sqrl(&["finetune", "--checkpoint", arg(&dir.path().join("x.json")), "--baseline", "ppo"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("ppo"));
}

#[test]
fn out_of_range_threshold_is_an_error() {
    let o = sqrl(&["evaluate", "--checkpoint", "x.json", "--eps-safe", "1.5"]);
    assert!(!o.status.success());
}

#[test]
fn oracle_check_on_generated_and_supplied_mdps() {
    let o = sqrl(&["oracle-check", "--count", "5", "--eps-safe", "0.1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 5);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("mdp.json");
    generate_assumption_mdp(6, 3, 0.2, 1).unwrap().mdp.save_json(&path).unwrap();
    let o = sqrl(&["oracle-check", "--mdp", arg(&path), "--eps-safe", "0.2"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert_eq!(stdout(&o).lines().count(), 1);
}

#[test]
fn gradcheck_passes() {
    let o = sqrl(&["gradcheck", "--instances", "1"]);
    assert!(o.status.success(), "{}", stderr(&o));
    assert!(stdout(&o).starts_with("4 checks, 0 failed"));
}
