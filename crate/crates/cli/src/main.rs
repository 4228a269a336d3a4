use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};
use stackpomdp::experiment::{
    emit_plots, oracle_target, run_experiment, verify_bundle, write_verdicts, Bundle, ExperimentConfig,
    SettingConfig,
};

#[derive(Parser)]
#[command(name = "stackpomdp", version, about = "Learn leader strategies against no-regret followers")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train every seed of an experiment config and write a result bundle.
    Run {
        config: PathBuf,
        /// Output root; the bundle goes to <out>/<experiment name>.
        #[arg(long, env = "STACKPOMDP_OUT", default_value = "runs")]
        out: PathBuf,
        #[arg(long, short)]
        quiet: bool,
    },
    /// Write mean and standard-error curves for a result bundle.
    Plot { bundle: PathBuf },
    /// Check a result bundle against the oracle and write verdict.json.
    Verify { bundle: PathBuf },
    /// Solve a setting exactly: maintain, maintain_randomized, escape, matrix_design,
    /// allocation:<items>:<messages>, mu_spm.
    Oracle { setting: String },
}

fn main() -> ExitCode {
    match dispatch(Cli::parse().command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}

fn dispatch(command: Command) -> Result<ExitCode> {
    match command {
        Command::Run { config, out, quiet } => run(&config, &out, quiet),
        Command::Plot { bundle } => {
            let bundle = Bundle::load(&bundle)?;
            for path in emit_plots(&bundle)? {
                println!("{}", path.display());
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify { bundle } => {
            let bundle = Bundle::load(&bundle)?;
            Ok(report_verdicts(&bundle)?)
        }
        Command::Oracle { setting } => {
            let setting = SettingConfig::parse(&setting)?;
            print!("{}", oracle_target(&setting)?.report(&setting));
            Ok(ExitCode::SUCCESS)
        }
    }
}

fn run(config_path: &Path, out: &Path, quiet: bool) -> Result<ExitCode> {
    let config = ExperimentConfig::load(config_path)
        .with_context(|| format!("loading {}", config_path.display()))?;
    let progress = move |msg: &str| {
        if !quiet {
            eprintln!("{msg}");
        }
    };
    let bundle = run_experiment(&config, out, &progress)?;
    println!("bundle: {}", bundle.dir.display());
    match emit_plots(&bundle) {
        Ok(paths) => paths.iter().for_each(|p| println!("plot: {}", p.display())),
        Err(e) => eprintln!("no plot: {e}"),
    }
    report_verdicts(&bundle)?;
    let failed: Vec<_> = bundle.summary.outcomes.iter().filter(|o| !o.completed()).collect();
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("{} of {} runs failed", failed.len(), bundle.summary.outcomes.len());
        Ok(ExitCode::from(2))
    }
}

/// Prints one line per criterion; exit status 1 when any fails.
fn report_verdicts(bundle: &Bundle) -> Result<ExitCode> {
    let verdicts = verify_bundle(bundle);
    let path = write_verdicts(&bundle.dir, &verdicts)?;
    for v in &verdicts {
        println!("{}", v.line());
    }
    println!("verdict: {}", path.display());
    Ok(if verdicts.iter().all(|v| v.passed) { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}
