use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn ddq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ddq")).args(args).output().unwrap()
}

fn small_config(dir: &Path) -> String {
    let path = dir.join("small.toml");
    fs::write(
        &path,
        "eval_dialogues = 20\nrbs_dialogues = 20\n[pretrain]\ndialogues = 20\nepochs = 2\n",
    )
    .unwrap();
    path.to_string_lossy().into_owned()
}

#[test]
fn train_then_plot() {
    let dir = tempfile::tempdir().unwrap();
    let config = small_config(dir.path());
    let runs = dir.path().join("runs");
    let out = ddq(&[
        "train", "--variant", "dqn,ddq", "--k", "2,4", "--seeds", "2", "--epochs", "10",
        "--config", &config, "--out", runs.to_str().unwrap(), "--jobs", "2",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csvs = fs::read_dir(&runs)
        .unwrap()
        .filter(|e| e.as_ref().unwrap().path().extension().is_some_and(|x| x == "csv"))
        .count();
    assert_eq!(csvs, 3 * 2 + 1, "dqn ignores K, plus summary.csv");
    assert!(runs.join("ddq_k4_seed1.ckpt.json").exists());
    assert!(String::from_utf8_lossy(&out.stdout).contains("DDQ(4)"));

    let plots = dir.path().join("plots");
    let out = ddq(&["plot", "--in", runs.to_str().unwrap(), "--out", plots.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["learning_curves.svg", "k_sweep.svg", "world_model_ablation.svg", "success_table.txt"] {
        assert!(plots.join(f).exists(), "{f}");
    }
}

#[test]
fn failures_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("x");
    let out = out_dir.to_str().unwrap();
    assert!(!ddq(&["train", "--variant", "nope", "--out", out]).status.success());
    assert!(!ddq(&["train", "--variant", "ddq", "--k", "0", "--out", out]).status.success());
    assert!(!ddq(&["plot", "--in", dir.path().to_str().unwrap(), "--out", out]).status.success());
    let missing = dir.path().join("missing.json");
    let out = ddq(&["hitl-serve", "--checkpoint", missing.to_str().unwrap(), "--log", out]);
    assert!(!out.status.success());
}
