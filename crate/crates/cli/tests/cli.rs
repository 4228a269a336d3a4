use std::path::Path;
use std::process::{Command, Output};

const CONFIG: &str = r#"
schema_version = 1
name = "cli_smoke"
seeds = [0, 1]

[setting]
kind = "maintain"

[schedule]
equilibrium_subepisodes = 20
reward_subepisodes = 5

[train]
total_steps = 2000
eval_interval = 1000
critic_hidden = 8
"#;

fn cli(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_stackpomdp")).args(args).env("STACKPOMDP_OUT", out).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn run_then_plot_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("smoke.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");

    let run = cli(&["run", config.to_str().unwrap(), "-q"], &out);
    assert_eq!(run.status.code(), Some(0), "{}", String::from_utf8_lossy(&run.stderr));
    let bundle = out.join("cli_smoke");
    for f in ["summary.json", "log.csv", "curves.svg", "verdict.json"] {
        assert!(bundle.join(f).exists(), "{f}");
    }
    assert!(stdout(&run).contains("criterion  1 ["));

    let plot = cli(&["plot", bundle.to_str().unwrap()], &out);
    assert_eq!(plot.status.code(), Some(0));
    assert!(stdout(&plot).contains("curves.svg"));

    let verify = cli(&["verify", bundle.to_str().unwrap()], &out);
    let passed = !stdout(&verify).contains("[FAIL]");
    assert_eq!(verify.status.code(), Some(if passed { 0 } else { 1 }), "{}", stdout(&verify));
    assert!(bundle.join("verdict.json").exists());
}

#[test]
fn run_exits_nonzero_when_a_seed_fails() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("smoke.toml");
    std::fs::write(&config, CONFIG).unwrap();
    let out = dir.path().join("out");
    std::fs::create_dir_all(out.join("cli_smoke/logs/centralized_critic_seed1.csv")).unwrap();
    let run = cli(&["run", config.to_str().unwrap(), "-q"], &out);
    assert_eq!(run.status.code(), Some(2));
    assert!(out.join("cli_smoke/failures.csv").exists());
}

#[test]
fn oracle_prints_solution() {
    let dir = tempfile::tempdir().unwrap();
    let o = cli(&["oracle", "matrix_design"], dir.path());
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("tau"), "{}", stdout(&o));
    let bad = cli(&["oracle", "poker"], dir.path());
    assert_eq!(bad.status.code(), Some(1));
}

#[test]
fn bad_inputs_fail_cleanly() {
    let dir = tempfile::tempdir().unwrap();
    let missing = cli(&["run", dir.path().join("nope.toml").to_str().unwrap()], dir.path());
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).contains("loading"));
    let empty = cli(&["verify", dir.path().to_str().unwrap()], dir.path());
    assert_eq!(empty.status.code(), Some(1));
}
