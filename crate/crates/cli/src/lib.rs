//! Experiment runner for banded Wigner ensembles. Each subcommand produces a
//! single table written as CSV or JSON.

pub mod commands;
pub mod config;
pub mod error;
pub mod output;

use std::io::Write;

pub use config::{BandGrid, Command, ExperimentConfig, OutputFormat};
pub use error::{CliError, Result};
pub use output::{Cell, Table};

/// Runs the configured command and writes its table.
///
/// For `verify` the table is written before a failed check is reported.
pub fn run(cfg: &ExperimentConfig, stdout: &mut dyn Write) -> Result<()> {
    let table = match cfg.command {
        Command::Moments => commands::cmd_moments(cfg)?,
        Command::Critical => commands::cmd_critical(cfg)?,
        Command::Ipr => commands::cmd_ipr(cfg)?,
        Command::Yq => commands::cmd_yq(cfg)?,
        Command::Ballchain => commands::cmd_ballchain(cfg)?,
        Command::Verify => {
            let outcome = commands::cmd_verify(cfg)?;
            output::emit(&outcome.table, cfg, stdout)?;
            if outcome.failed.is_empty() {
                return Ok(());
            }
            return Err(CliError::Verification { failed: outcome.failed });
        }
    };
    output::emit(&table, cfg, stdout)
}
