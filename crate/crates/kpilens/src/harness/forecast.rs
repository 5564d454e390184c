//! Forecasting services the harness can attach to the bandwidth KPI.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which forecaster feeds the bandwidth KPI's forecast field.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastKind {
    /// Ground truth from the environment's precomputed bandwidth.
    Perfect,
    /// Repeats the most recent observation across the horizon.
    Persistence,
}

impl std::str::FromStr for ForecastKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "perfect" => Ok(ForecastKind::Perfect),
            "persistence" => Ok(ForecastKind::Persistence),
            other => Err(Error::Config(format!(
                "unknown forecaster `{other}` (expected perfect or persistence)"
            ))),
        }
    }
}

/// Persistence forecast: the last observation, `horizon` times.
pub fn persistence_forecast(history: &[f64], horizon: usize) -> Result<Vec<f64>> {
    let last = history.last().ok_or_else(|| {
        Error::ColdStart("persistence forecast needs at least one observation".into())
    })?;
    Ok(vec![*last; horizon])
}
