use std::path::{Path, PathBuf};

use stackpomdp::experiment::{
    curves, determinism, emit_plots, oracle_target, run_experiment, run_log_name, verify_bundle, Bundle,
    ExperimentConfig, SeedStatus, SettingConfig, Summary, FAILURE_FILE, LOG_FILE,
};
use stackpomdp::policy::{checkpoint, EvalRow, Trainer, TrainingMode};

const TINY: &str = r#"
schema_version = 1
name = "tiny"
modes = ["centralized_critic", "plain"]
seeds = [4, 7]

[setting]
kind = "maintain"

[schedule]
equilibrium_subepisodes = 20
reward_subepisodes = 5

[train]
learning_rate = 0.03
total_steps = 3000
eval_interval = 1000
critic_hidden = 8
"#;

fn tiny() -> ExperimentConfig {
    ExperimentConfig::from_toml(TINY).unwrap()
}

fn quiet(_: &str) {}

fn configs_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

#[test]
fn shipped_configs_load() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs_dir()).unwrap() {
        let path = entry.unwrap().path();
        if path.extension().is_some_and(|e| e == "toml") {
            ExperimentConfig::load(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
            n += 1;
        }
    }
    assert!(n >= 8, "{n} configs");
}

#[test]
fn config_rejects_unknown_keys_and_bad_values() {
    let unknown = TINY.replace("critic_hidden = 8", "critic_hidden = 8\nmomentum = 0.9");
    assert!(ExperimentConfig::from_toml(&unknown).is_err());
    let top = TINY.replace("name = \"tiny\"", "name = \"tiny\"\ncolor = \"red\"");
    assert!(ExperimentConfig::from_toml(&top).is_err());
    let version = TINY.replace("schema_version = 1", "schema_version = 2");
    assert!(ExperimentConfig::from_toml(&version).is_err());
    let dup = TINY.replace("seeds = [4, 7]", "seeds = [4, 4]");
    assert!(ExperimentConfig::from_toml(&dup).is_err());
    let kind = TINY.replace("kind = \"maintain\"", "kind = \"chess\"");
    assert!(ExperimentConfig::from_toml(&kind).is_err());
    let incomplete = TINY.replace("kind = \"maintain\"", "kind = \"allocation\"\nitems = 3");
    assert!(ExperimentConfig::from_toml(&incomplete).is_err());
    let lr = TINY.replace("learning_rate = 0.03", "learning_rate = -1.0");
    assert!(ExperimentConfig::from_toml(&lr).is_err());
}

#[test]
fn config_round_trips_through_toml() {
    let c = tiny();
    assert_eq!(ExperimentConfig::from_toml(&c.to_toml().unwrap()).unwrap(), c);
}

#[test]
fn setting_ids_parse() {
    assert_eq!(SettingConfig::parse("allocation:3:2").unwrap(), SettingConfig::Allocation { items: 3, messages: 2 });
    assert_eq!(SettingConfig::parse("allocation:3:2").unwrap().id(), "allocation_k3_m2");
    assert!(SettingConfig::parse("allocation:3").is_err());
    assert!(SettingConfig::parse("roulette").is_err());
    for id in ["maintain", "maintain_randomized", "escape", "matrix_design", "mu_spm"] {
        assert_eq!(SettingConfig::parse(id).unwrap().id(), id);
    }
}

#[test]
fn default_mw_step_matches_raw_payoff_rule() {
    let eps = |id: &str| SettingConfig::parse(id).unwrap().default_mw_epsilon().unwrap();
    assert!((eps("maintain") - (1.1f64.powi(15) - 1.0)).abs() < 1e-12);
    assert!((eps("escape") - (1.1f64.powi(30) - 1.0)).abs() < 1e-12);
    assert!((eps("matrix_design") - (1.1f64.powi(11) - 1.0)).abs() < 1e-12);
    assert!((eps("allocation:3:3") - 0.1).abs() < 1e-12);
}

#[test]
fn oracle_targets_in_evaluation_units() {
    let t = |id: &str| oracle_target(&SettingConfig::parse(id).unwrap()).unwrap();
    assert!((t("maintain").value - 2.0 / 3.0).abs() < 1e-12);
    assert_eq!(t("escape").value, 1.0);
    assert!((t("maintain_randomized").value - 27.4 / 30.0).abs() < 1e-12);
    assert!((t("allocation:3:2").value - 2.0 / 3.0).abs() < 1e-12);
    let spm = t("mu_spm");
    assert!(spm.value.abs() < 1e-12);
    assert!((spm.no_message_bound.unwrap() + 0.15).abs() < 1e-12);
    let report = spm.report(&SettingConfig::parse("mu_spm").unwrap()).to_string();
    assert!(report.contains("best reward without messages: -0.150000"), "{report}");
}

#[test]
fn run_writes_complete_bundle() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny();
    let bundle = run_experiment(&config, dir.path(), &quiet).unwrap();
    assert!(bundle.all_completed());
    // seeds x modes x (total_steps / eval_interval)
    assert_eq!(bundle.rows.len(), 2 * 2 * 3);
    let root = dir.path().join("tiny");
    for f in ["config.toml", "summary.json", LOG_FILE] {
        assert!(root.join(f).exists(), "{f}");
    }
    assert!(!root.join(FAILURE_FILE).exists());
    for mode in [TrainingMode::CentralizedCritic, TrainingMode::Plain] {
        for seed in [4, 7] {
            let rows = stackpomdp::experiment::read_rows(&root.join("logs").join(run_log_name(mode, seed))).unwrap();
            assert_eq!(rows.iter().map(|r| r.step).collect::<Vec<_>>(), vec![1000, 2000, 3000]);
            assert!(root.join("checkpoints").join(format!("{}_seed{seed}.ckpt", mode.label())).exists());
        }
    }
    let loaded = Bundle::load(&root).unwrap();
    assert_eq!(loaded.rows, bundle.rows);
    assert_eq!(loaded.summary, bundle.summary);
    for o in &bundle.summary.outcomes {
        let gap = o.oracle_gap.unwrap();
        assert!((gap - (2.0 / 3.0 - o.best_eval.unwrap())).abs() < 1e-12);
        assert_eq!(o.evaluations, 3);
    }
}

#[test]
fn checkpoint_from_bundle_restores_trainer() {
    let dir = tempfile::tempdir().unwrap();
    let config = tiny();
    run_experiment(&config, dir.path(), &quiet).unwrap();
    let game = config.setting.game().unwrap();
    let mut trainer =
        Trainer::new(&game, config.pomdp().unwrap(), config.train_config(TrainingMode::Plain, 7)).unwrap();
    let path = dir.path().join("tiny/checkpoints/plain_seed7.ckpt");
    checkpoint::restore(&mut trainer, std::io::BufReader::new(std::fs::File::open(path).unwrap())).unwrap();
    assert!(trainer.steps >= 3000);
    assert_eq!(trainer.evaluations, 3);
}

#[test]
fn failing_seed_is_recorded_and_others_continue() {
    let dir = tempfile::tempdir().unwrap();
    let mut config = tiny();
    config.modes = vec![TrainingMode::CentralizedCritic];
    // A directory where the run log should go makes that run fail.
    let blocked = dir.path().join("tiny/logs").join(run_log_name(TrainingMode::CentralizedCritic, 7));
    std::fs::create_dir_all(&blocked).unwrap();
    let bundle = run_experiment(&config, dir.path(), &quiet).unwrap();
    let status: Vec<bool> = bundle.summary.outcomes.iter().map(|o| o.completed()).collect();
    assert_eq!(status, vec![true, false]);
    assert!(matches!(bundle.summary.outcomes[1].status, SeedStatus::Failed { .. }));
    assert_eq!(bundle.rows.len(), 3);
    let failures = std::fs::read_to_string(dir.path().join("tiny").join(FAILURE_FILE)).unwrap();
    assert!(failures.lines().nth(1).unwrap().starts_with("centralized_critic,7,"), "{failures}");
}

#[test]
fn reruns_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let v = determinism(&tiny(), dir.path()).unwrap();
    assert!(v.passed, "{}", v.detail);
}

fn row(step: u64, reward: f64, mode: TrainingMode, seed: u64, greedy: &str) -> EvalRow {
    EvalRow { step, eval_reward: reward, value_loss: 0.1, mode, seed, greedy: greedy.into() }
}

fn synthetic(dir: &Path, setting: &str, seeds: Vec<u64>, rows: Vec<EvalRow>) -> Bundle {
    let mut config = tiny();
    config.setting = SettingConfig::parse(setting).unwrap();
    config.seeds = seeds;
    let oracle = oracle_target(&config.setting).ok();
    Bundle {
        dir: dir.to_path_buf(),
        summary: Summary { setting: config.setting.id(), config, oracle, oracle_error: None, outcomes: Vec::new() },
        rows,
    }
}

#[test]
fn curves_average_across_seeds() {
    let c = TrainingMode::CentralizedCritic;
    let rows = vec![row(10, 0.2, c, 0, ""), row(10, 0.4, c, 1, ""), row(20, 1.0, c, 0, ""), row(20, 1.0, c, 1, "")];
    let b = synthetic(Path::new("."), "maintain", vec![0, 1], rows);
    let pts = &curves(&b)[&c];
    assert_eq!(pts.len(), 2);
    assert!((pts[0].mean - 0.3).abs() < 1e-12);
    // Sample std 0.1414 over sqrt(2).
    assert!((pts[0].stderr - 0.1).abs() < 1e-12);
    assert_eq!(pts[1].stderr, 0.0);
}

#[test]
fn plots_band_only_with_several_seeds() {
    let dir = tempfile::tempdir().unwrap();
    let c = TrainingMode::CentralizedCritic;
    let single = synthetic(dir.path(), "maintain", vec![0], vec![row(10, 0.5, c, 0, ""), row(20, 0.6, c, 0, "")]);
    let svg = std::fs::read_to_string(&emit_plots(&single).unwrap()[0]).unwrap();
    assert!(svg.contains("<polyline") && !svg.contains("<polygon"));
    let rows = (0..10).flat_map(|s| [row(10, 0.1 * s as f64, c, s, ""), row(20, 0.5, c, s, "")]).collect();
    let many = synthetic(dir.path(), "maintain", (0..10).collect(), rows);
    let svg = std::fs::read_to_string(&emit_plots(&many).unwrap()[0]).unwrap();
    assert!(svg.contains("<polygon") && svg.contains("(10 seeds)"));
    let empty = synthetic(dir.path(), "maintain", vec![0], Vec::new());
    assert!(emit_plots(&empty).is_err());
}

#[test]
fn verify_maintain_trained_and_untrained() {
    let c = TrainingMode::CentralizedCritic;
    let trained = (0..10).map(|s| row(100_000, 2.0 / 3.0, c, s, "-=row A")).collect();
    let v = verify_bundle(&synthetic(Path::new("."), "maintain", (0..10).collect(), trained));
    assert_eq!(v.len(), 1);
    assert!(v[0].passed && v[0].criterion == 1, "{}", v[0].detail);
    let untrained = (0..10).map(|s| row(100_000, 0.1, c, s, "-=row B")).collect();
    let v = verify_bundle(&synthetic(Path::new("."), "maintain", (0..10).collect(), untrained));
    assert!(!v[0].passed);
    assert!(v[0].detail.starts_with("0/10"), "{}", v[0].detail);
}

#[test]
fn verify_design_counts_drops_and_payments() {
    let (c, p) = (TrainingMode::CentralizedCritic, TrainingMode::Plain);
    let mut rows = Vec::new();
    for s in 0..10 {
        for (k, r) in [0.5, 1.0, 1.0, 1.0].into_iter().enumerate() {
            rows.push(row(75_000 * (k as u64 + 1), r, c, s, "-=tau=6"));
        }
        for (k, r) in [1.0, 0.5, 1.0, 0.2, 0.3, 1.0, 0.8].into_iter().enumerate() {
            rows.push(row(10_000 * (k as u64 + 1), r, p, s, "-=tau=0"));
        }
    }
    rows.sort_by_key(|r| (r.mode, r.seed, r.step));
    let v = verify_bundle(&synthetic(Path::new("."), "matrix_design", (0..10).collect(), rows));
    assert!(v[0].passed, "{}", v[0].detail);
    assert!(v[0].detail.contains("plain 10/10 with >= 3 drops"), "{}", v[0].detail);
}

#[test]
fn verify_mechanism_uses_no_message_bound() {
    let c = TrainingMode::CentralizedCritic;
    let rows = (0..10).map(|s| row(500_000, if s < 6 { -0.01 } else { -0.3 }, c, s, "")).collect();
    let v = verify_bundle(&synthetic(Path::new("."), "mu_spm", (0..10).collect(), rows));
    assert!(v[0].passed, "{}", v[0].detail);
    assert!(v[0].detail.contains("bound -0.1500"), "{}", v[0].detail);
}
