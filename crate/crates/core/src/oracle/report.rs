use std::fmt;

use serde::Serialize;

/// What an oracle found, in a form fit for logs and result bundles.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OracleReport {
    pub setting: String,
    pub strategy: String,
    /// Optimal leader value in the units the learner is scored in.
    pub value: f64,
    pub enumerated: usize,
    pub wall_seconds: f64,
}

impl fmt::Display for OracleReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "setting:    {}", self.setting)?;
        writeln!(f, "value:      {:.6}", self.value)?;
        writeln!(f, "enumerated: {}", self.enumerated)?;
        writeln!(f, "wall time:  {:.3}s", self.wall_seconds)?;
        writeln!(f, "strategy:")?;
        for line in self.strategy.lines() {
            writeln!(f, "  {line}")?;
        }
        Ok(())
    }
}
