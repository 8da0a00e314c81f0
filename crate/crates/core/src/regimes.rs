//! Regime-shift experiment: how protected exposure moves when the user
//! population changes while the catalog stays fixed.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::config::{ConfigError, ExperimentConfig};
use crate::exec::Execution;
use crate::metrics::{compute_report, MetricsError, MetricsReport};
use crate::pipeline::generate;

#[derive(Debug, thiserror::Error)]
pub enum RegimeError {
    #[error("a regime shift needs at least 2 regimes, got {0}")]
    TooFewRegimes(usize),
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeShiftResult {
    /// Regime × sensitive feature.
    pub per_regime_exposure: Vec<Vec<f64>>,
    /// Last regime's exposure minus the first regime's, per feature.
    pub exposure_delta: Vec<f64>,
}

impl RegimeShiftResult {
    pub fn from_report(report: &MetricsReport) -> Result<Self, RegimeError> {
        let rows = &report.per_regime_exposure;
        if rows.len() < 2 {
            return Err(RegimeError::TooFewRegimes(rows.len()));
        }
        let (first, last) = (&rows[0], &rows[rows.len() - 1]);
        Ok(Self {
            per_regime_exposure: rows.clone(),
            exposure_delta: last.iter().zip(first).map(|(l, f)| l - f).collect(),
        })
    }
}

/// Generates the configured run and summarizes per-regime exposure.
pub fn run_regime_shift(
    cfg: &ExperimentConfig,
    exec: Execution,
) -> Result<RegimeShiftResult, RegimeError> {
    if cfg.regimes.len() < 2 {
        return Err(RegimeError::TooFewRegimes(cfg.regimes.len()));
    }
    let generation = generate(cfg, exec)?;
    let report = compute_report(
        &generation.lists,
        &generation.protected(),
        cfg.regimes.len(),
    )?;
    RegimeShiftResult::from_report(&report)
}

impl fmt::Display for RegimeShiftResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:<8}", "regime")?;
        for j in 0..self.exposure_delta.len() {
            write!(f, " {:>12}", format!("exposure_{j}"))?;
        }
        writeln!(f)?;
        for (r, row) in self.per_regime_exposure.iter().enumerate() {
            write!(f, "{:<8}", r)?;
            for e in row {
                write!(f, " {:>12.6}", e)?;
            }
            writeln!(f)?;
        }
        write!(f, "{:<8}", "delta")?;
        for d in &self.exposure_delta {
            write!(f, " {:>+12.6}", d)?;
        }
        Ok(())
    }
}
