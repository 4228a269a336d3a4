//! Config-driven experiments: multi-seed training runs, logs, plots and oracle checks.

mod config;
mod criteria;
mod plot;
mod run;
mod targets;

pub use config::{ExperimentConfig, ScheduleConfig, SettingConfig, SCHEMA_VERSION};
pub use criteria::{
    determinism, equilibrium_convergence, gradient_correctness, gradient_toy, oracle_consistency,
    verify_bundle, write_verdicts, Verdict, DESIGN_DROP, DESIGN_REACHED, DESIGN_SUSTAIN,
};
pub use plot::{curves, emit_plots, render, CurvePoint};
pub use run::{
    read_rows, run_experiment, run_log_name, Bundle, SeedOutcome, SeedStatus, Summary, FAILURE_FILE,
    LOG_FILE, SUMMARY_FILE,
};
pub use targets::{oracle_target, OracleTarget, MIXTURE_RESOLUTION};
