use std::fs::{self, File};
use std::io::BufReader;
use std::path::Path;
use std::process::Command;

use poshs::harness::output::{read_rows, EPISODES_FILE, SERIES_FILE, SUMMARY_FILE};
use poshs::harness::Condition;
use poshs::records::read_episode_logs;

const CONFIG: &str = r#"
experiment_id = "ignored"
n_models = 2
pretrain_episodes = 40
train_episodes = 6
test_episodes = 4
seeds = [0]
"#;

fn poshs(args: &[&str], config: &Path, out: &Path) -> String {
    let output = Command::new(env!("CARGO_BIN_EXE_poshs"))
        .args(args)
        .arg("--config")
        .arg(config)
        .arg("--out")
        .arg(out)
        .args(["--experiment", "smoke", "--seeds", "3,4"])
        .output()
        .unwrap();
    assert!(
        output.status.success(),
        "{args:?}: {}",
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout).unwrap()
}

#[test]
fn pretrain_train_eval_report() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");
    let root = out.join("smoke");

    poshs(&["pretrain"], &config, &out);
    for seed in [3, 4] {
        for id in ["H_a", "H_b"] {
            assert!(root.join(format!("occupants/seed{seed}/{id}.json")).exists());
        }
    }
    assert!(!root.join("occupants/seed0").exists());

    poshs(&["train"], &config, &out);
    assert!(root.join("agents/seed3.json").exists());
    let logs = read_episode_logs(BufReader::new(File::open(root.join("logs/train_seed4.jsonl")).unwrap())).unwrap();
    assert_eq!(logs.len(), 6);

    poshs(&["eval", "--control"], &config, &out);
    let rows = read_rows(&root.join("rows/eval_seed3.csv")).unwrap();
    assert_eq!(rows.iter().filter(|r| r.condition == Condition::Poshs).count(), 4);
    assert_eq!(rows.iter().filter(|r| r.condition == Condition::NoShs).count(), 4);

    let stdout = poshs(&["report"], &config, &out);
    assert!(stdout.contains("accuracy"));
    for file in [EPISODES_FILE, SUMMARY_FILE, SERIES_FILE] {
        assert!(root.join(file).exists(), "{file}");
    }
}

#[test]
fn eval_without_training_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, CONFIG).unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_poshs"))
        .args(["eval", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("train"));
}

#[test]
fn rejects_bad_config() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("config.toml");
    fs::write(&config, "n_models = 9\n").unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_poshs"))
        .args(["pretrain", "--config"])
        .arg(&config)
        .arg("--out")
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!status.status.success());
    assert!(String::from_utf8_lossy(&status.stderr).contains("n_models"));
}
