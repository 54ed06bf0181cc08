//! Experiment runner: configuration, deterministic seeding, CSV reports and
//! trace replay.

mod config;
mod experiments;
mod replay;

use std::fs;
use std::io::Write;
use std::path::Path;

pub use config::{ExperimentConfig, ExperimentKind, ProtocolChoice, CONFIG_KEYS};
pub use experiments::{
    exchange_point, leakage_estimates, shared_phases, ExchangeSummary, LeakageRow,
};
pub use replay::{
    replay_ingest, survivor_count, synthetic_trace, IqRecord, IqTrace, MIN_TRACE_RECORDS,
};

use crate::error::Result;

/// Tabular result of one experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Report {
    pub kind: ExperimentKind,
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
    pub pass: bool,
    /// One-line human-readable outcome.
    pub summary: String,
}

impl Report {
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row)?;
        }
        w.into_inner().map_err(|e| e.into_error().into())
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            fs::create_dir_all(dir)?;
        }
        let mut f = fs::File::create(path)?;
        f.write_all(&self.to_csv()?)?;
        Ok(())
    }
}

/// Runs the configured experiment and writes its CSV report to
/// `config.output`.
pub fn run_experiment(config: &ExperimentConfig) -> Result<Report> {
    config.validate()?;
    let report = match config.kind {
        ExperimentKind::Uniformity => experiments::uniformity(config)?,
        ExperimentKind::Leakage => experiments::leakage(config)?,
        ExperimentKind::Exchange => experiments::exchange(config)?,
        ExperimentKind::Sweep => experiments::sweep(config)?,
        ExperimentKind::Replay => experiments::replay(config)?,
    };
    report.write_csv(&config.output)?;
    Ok(report)
}
