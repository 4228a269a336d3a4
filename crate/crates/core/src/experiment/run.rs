use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::ExperimentConfig;
use super::targets::{oracle_target, OracleTarget};
use crate::error::{Error, Result};
use crate::policy::{checkpoint, greedy_summary, EvalRow, Trainer, TrainingMode};

pub const SUMMARY_FILE: &str = "summary.json";
pub const LOG_FILE: &str = "log.csv";
pub const FAILURE_FILE: &str = "failures.csv";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SeedStatus {
    Completed,
    Failed { error: String },
}

/// How one (mode, seed) pipeline ended.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SeedOutcome {
    pub mode: TrainingMode,
    pub seed: u64,
    #[serde(flatten)]
    pub status: SeedStatus,
    pub steps: u64,
    pub evaluations: usize,
    pub best_eval: Option<f64>,
    pub final_eval: Option<f64>,
    pub final_greedy: Option<String>,
    /// Oracle value minus the best evaluation.
    pub oracle_gap: Option<f64>,
    pub wall_seconds: f64,
}

impl SeedOutcome {
    pub fn completed(&self) -> bool {
        self.status == SeedStatus::Completed
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub config: ExperimentConfig,
    pub setting: String,
    pub oracle: Option<OracleTarget>,
    pub oracle_error: Option<String>,
    pub outcomes: Vec<SeedOutcome>,
}

/// A result directory: summary plus the merged evaluation log.
#[derive(Clone, Debug, PartialEq)]
pub struct Bundle {
    pub dir: PathBuf,
    pub summary: Summary,
    pub rows: Vec<EvalRow>,
}

impl Bundle {
    pub fn load(dir: &Path) -> Result<Self> {
        let summary_path = dir.join(SUMMARY_FILE);
        if !summary_path.exists() {
            return Err(Error::Config(format!("{} is not a result bundle", dir.display())));
        }
        let summary: Summary = serde_json::from_reader(BufReader::new(File::open(summary_path)?))?;
        let rows = read_rows(&dir.join(LOG_FILE))?;
        Ok(Self { dir: dir.to_path_buf(), summary, rows })
    }

    pub fn all_completed(&self) -> bool {
        !self.summary.outcomes.is_empty() && self.summary.outcomes.iter().all(SeedOutcome::completed)
    }

    /// Evaluation rows of one run, in step order.
    pub fn run_rows(&self, mode: TrainingMode, seed: u64) -> Vec<&EvalRow> {
        self.rows.iter().filter(|r| r.mode == mode && r.seed == seed).collect()
    }
}

pub fn read_rows(path: &Path) -> Result<Vec<EvalRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    reader.deserialize().map(|r| r.map_err(Error::from)).collect()
}

fn write_rows(path: &Path, rows: &[EvalRow]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for row in rows {
        writer.serialize(row)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn run_log_name(mode: TrainingMode, seed: u64) -> String {
    format!("{}_seed{seed}.csv", mode.label())
}

/// Trains every (mode, seed) pair, writes per-run logs, the merged log, checkpoints and a
/// summary with the oracle gap under `out_root/<name>`. A failing run is recorded and the
/// others continue.
pub fn run_experiment(
    config: &ExperimentConfig,
    out_root: &Path,
    progress: &(dyn Fn(&str) + Sync),
) -> Result<Bundle> {
    config.validate()?;
    let dir = out_root.join(&config.name);
    fs::create_dir_all(dir.join("logs"))?;
    if config.checkpoints {
        fs::create_dir_all(dir.join("checkpoints"))?;
    }
    fs::write(dir.join("config.toml"), config.to_toml()?)?;
    let (oracle, oracle_error) = match oracle_target(&config.setting) {
        Ok(t) => (Some(t), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let jobs: Vec<(TrainingMode, u64)> =
        config.modes.iter().flat_map(|&m| config.seeds.iter().map(move |&s| (m, s))).collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.workers.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let results: Vec<(SeedOutcome, Vec<EvalRow>)> = pool.install(|| {
        jobs.par_iter()
            .map(|&(mode, seed)| run_one(config, &dir, mode, seed, oracle.as_ref(), progress))
            .collect()
    });
    let mut rows: Vec<EvalRow> = results.iter().flat_map(|(_, r)| r.iter().cloned()).collect();
    rows.sort_by_key(|r| (r.mode, r.seed, r.step));
    write_rows(&dir.join(LOG_FILE), &rows)?;
    let outcomes: Vec<SeedOutcome> = results.into_iter().map(|(o, _)| o).collect();
    let failures: Vec<&SeedOutcome> = outcomes.iter().filter(|o| !o.completed()).collect();
    let failure_path = dir.join(FAILURE_FILE);
    if failures.is_empty() {
        if failure_path.exists() {
            fs::remove_file(&failure_path)?;
        }
    } else {
        let mut w = csv::Writer::from_path(&failure_path)?;
        w.write_record(["mode", "seed", "steps", "error"])?;
        for f in failures {
            let SeedStatus::Failed { error } = &f.status else { unreachable!() };
            w.write_record([f.mode.label(), &f.seed.to_string(), &f.steps.to_string(), error])?;
        }
        w.flush()?;
    }
    let summary = Summary { config: config.clone(), setting: config.setting.id(), oracle, oracle_error, outcomes };
    let mut out = BufWriter::new(File::create(dir.join(SUMMARY_FILE))?);
    serde_json::to_writer_pretty(&mut out, &summary)?;
    out.flush()?;
    Ok(Bundle { dir, summary, rows })
}

fn run_one(
    config: &ExperimentConfig,
    dir: &Path,
    mode: TrainingMode,
    seed: u64,
    oracle: Option<&OracleTarget>,
    progress: &(dyn Fn(&str) + Sync),
) -> (SeedOutcome, Vec<EvalRow>) {
    let start = Instant::now();
    let mut rows = Vec::new();
    let mut steps = 0;
    let mut greedy = None;
    let result = (|| -> Result<()> {
        let game = config.setting.game()?;
        let mut trainer = Trainer::new(&game, config.pomdp()?, config.train_config(mode, seed))?;
        let mut log = csv::Writer::from_path(dir.join("logs").join(run_log_name(mode, seed)))?;
        let mut log_error = None;
        let trained = trainer.train(|row| {
            progress(&format!(
                "{} {} seed {}: step {} eval {:.4}",
                config.name,
                mode.label(),
                seed,
                row.step,
                row.eval_reward
            ));
            if log_error.is_none() {
                log_error = log.serialize(row).and_then(|_| log.flush().map_err(csv::Error::from)).err();
            }
            rows.push(row.clone());
        });
        steps = trainer.steps;
        greedy = Some(greedy_summary(&trainer.policy, &game));
        trained?;
        if let Some(e) = log_error {
            return Err(e.into());
        }
        if config.checkpoints {
            let path = dir.join("checkpoints").join(format!("{}_seed{seed}.ckpt", mode.label()));
            let mut out = BufWriter::new(File::create(path)?);
            checkpoint::write(&trainer, &mut out)?;
            out.flush()?;
        }
        Ok(())
    })();
    let best_eval = rows.iter().map(|r| r.eval_reward).fold(None, |b: Option<f64>, v| Some(b.map_or(v, |b| b.max(v))));
    let status = match result {
        Ok(()) => SeedStatus::Completed,
        Err(e) => {
            progress(&format!("{} {} seed {}: failed: {e}", config.name, mode.label(), seed));
            SeedStatus::Failed { error: e.to_string() }
        }
    };
    let outcome = SeedOutcome {
        mode,
        seed,
        status,
        steps,
        evaluations: rows.len(),
        best_eval,
        final_eval: rows.last().map(|r| r.eval_reward),
        final_greedy: greedy,
        oracle_gap: oracle.zip(best_eval).map(|(o, b)| o.value - b),
        wall_seconds: start.elapsed().as_secs_f64(),
    };
    (outcome, rows)
}
