//! Trace I/O: one JSON object per line, one timestep per object.
//!
//! A record carries the timestep, every declared KPI's raw value,
//! forecasts for the KPIs configured to have them (exactly
//! `forecast_horizon` steps each), the raw action, and the reward
//! collected on this step (attributed to the previous step's action).
//! Malformed records fail with the line number and a reason naming the
//! offending field; they are never silently skipped.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::action::ActionValue;
use crate::config::PipelineConfig;
use crate::error::{Error, Result};

/// One timestep of input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceRecord {
    pub t: i64,
    pub kpis: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub forecasts: BTreeMap<String, Vec<f64>>,
    pub action: ActionValue,
    pub reward: f64,
}

impl TraceRecord {
    /// Check the record against the configuration: exact KPI set, finite
    /// values, forecasts present with exactly the configured horizon for
    /// forecast-bearing KPIs and absent otherwise, and an action that
    /// belongs to the action space.
    pub fn validate(&self, config: &PipelineConfig) -> Result<()> {
        for kpi in &config.kpis {
            let Some(value) = self.kpis.get(&kpi.name) else {
                return Err(Error::Validation(format!(
                    "record at t={} is missing KPI {}",
                    self.t, kpi.name
                )));
            };
            if !value.is_finite() {
                return Err(Error::Validation(format!(
                    "KPI {} at t={} is not finite",
                    kpi.name, self.t
                )));
            }
            if kpi.has_forecast {
                let Some(forecast) = self.forecasts.get(&kpi.name) else {
                    return Err(Error::Validation(format!(
                        "record at t={} is missing the forecast for {}",
                        self.t, kpi.name
                    )));
                };
                if forecast.len() != config.forecast_horizon {
                    return Err(Error::Validation(format!(
                        "forecast for {} at t={} has {} steps, expected {}",
                        kpi.name,
                        self.t,
                        forecast.len(),
                        config.forecast_horizon
                    )));
                }
                if forecast.iter().any(|v| !v.is_finite()) {
                    return Err(Error::Validation(format!(
                        "forecast for {} at t={} contains a non-finite value",
                        kpi.name, self.t
                    )));
                }
            }
        }
        for name in self.kpis.keys() {
            if config.kpi(name).is_none() {
                return Err(Error::Validation(format!(
                    "record at t={} carries undeclared KPI {}",
                    self.t, name
                )));
            }
        }
        for name in self.forecasts.keys() {
            match config.kpi(name) {
                Some(k) if k.has_forecast => {}
                _ => {
                    return Err(Error::Validation(format!(
                        "record at t={} carries a forecast for {}, which is not a forecast KPI",
                        self.t, name
                    )))
                }
            }
        }
        if !self.reward.is_finite() {
            return Err(Error::Validation(format!(
                "reward at t={} is not finite",
                self.t
            )));
        }
        // A throwaway symbolization proves the raw action is a member of
        // the space (on the ladder / a known label / finite).
        config
            .action_space
            .symbolize(None, &self.action)
            .map_err(|e| Error::Validation(format!("action at t={}: {e}", self.t)))?;
        Ok(())
    }

    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// Parse and validate one trace line; errors carry `line_no`.
pub fn parse_trace_line(line: &str, line_no: u64, config: &PipelineConfig) -> Result<TraceRecord> {
    let record: TraceRecord = serde_json::from_str(line).map_err(|e| Error::Trace {
        line: line_no,
        reason: e.to_string(),
    })?;
    record.validate(config).map_err(|e| Error::Trace {
        line: line_no,
        reason: e.to_string(),
    })?;
    Ok(record)
}

/// Line-by-line trace reader; blank lines are skipped, errors carry the
/// 1-based line number.
pub struct TraceReader<'c, R: BufRead> {
    reader: R,
    config: &'c PipelineConfig,
    line_no: u64,
}

impl<'c, R: BufRead> TraceReader<'c, R> {
    pub fn new(reader: R, config: &'c PipelineConfig) -> Self {
        Self {
            reader,
            config,
            line_no: 0,
        }
    }
}

impl<R: BufRead> Iterator for TraceReader<'_, R> {
    type Item = Result<TraceRecord>;

    fn next(&mut self) -> Option<Self::Item> {
        loop {
            let mut line = String::new();
            match self.reader.read_line(&mut line) {
                Ok(0) => return None,
                Ok(_) => {
                    self.line_no += 1;
                    if line.trim().is_empty() {
                        continue;
                    }
                    return Some(parse_trace_line(line.trim_end(), self.line_no, self.config));
                }
                Err(e) => return Some(Err(e.into())),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Cursor;

    fn config() -> PipelineConfig {
        PipelineConfig::from_json_str(
            r#"{
                "kpis": [
                    {"name": "tput"},
                    {"name": "bwd", "has_forecast": true}
                ],
                "forecast_horizon": 2,
                "action_space": {
                    "kind": "ordered",
                    "name": "bitrate",
                    "values": [300.0, 750.0, 1200.0]
                }
            }"#,
        )
        .unwrap()
    }

    fn good_line() -> String {
        r#"{"t": 1, "kpis": {"tput": 2.4, "bwd": 3.1}, "forecasts": {"bwd": [3.0, 2.8]}, "action": 750.0, "reward": 0.91}"#.to_string()
    }

    #[test]
    fn parses_a_well_formed_line() {
        let r = parse_trace_line(&good_line(), 1, &config()).unwrap();
        assert_eq!(r.t, 1);
        assert_eq!(r.kpis["tput"], 2.4);
        assert_eq!(r.forecasts["bwd"], vec![3.0, 2.8]);
        assert_eq!(r.action, ActionValue::Number(750.0));
        assert_eq!(r.reward, 0.91);
    }

    #[test]
    fn roundtrips_through_json() {
        let r = parse_trace_line(&good_line(), 1, &config()).unwrap();
        let line = r.to_json_line().unwrap();
        let back = parse_trace_line(&line, 1, &config()).unwrap();
        assert_eq!(r, back);
    }

    #[test]
    fn missing_kpi_and_extra_kpi_are_distinct_errors() {
        let cfg = config();
        let missing = r#"{"t": 1, "kpis": {"tput": 2.4}, "forecasts": {"bwd": [3.0, 2.8]}, "action": 750.0, "reward": 0.0}"#;
        let err = parse_trace_line(missing, 5, &cfg).unwrap_err().to_string();
        assert!(
            err.contains("line 5") && err.contains("missing KPI bwd"),
            "{err}"
        );

        let extra = good_line().replace(r#""tput": 2.4"#, r#""tput": 2.4, "ghost": 1.0"#);
        let err = parse_trace_line(&extra, 2, &cfg).unwrap_err().to_string();
        assert!(err.contains("undeclared KPI ghost"), "{err}");
    }

    #[test]
    fn forecast_errors_name_the_failure() {
        let cfg = config();
        let absent = good_line().replace(r#", "forecasts": {"bwd": [3.0, 2.8]}"#, "");
        let err = parse_trace_line(&absent, 1, &cfg).unwrap_err().to_string();
        assert!(err.contains("missing the forecast for bwd"), "{err}");

        let short = good_line().replace("[3.0, 2.8]", "[3.0]");
        let err = parse_trace_line(&short, 1, &cfg).unwrap_err().to_string();
        assert!(err.contains("has 1 steps, expected 2"), "{err}");

        let misplaced = good_line().replace(
            r#"{"bwd": [3.0, 2.8]}"#,
            r#"{"bwd": [3.0, 2.8], "tput": [1.0, 1.0]}"#,
        );
        let err = parse_trace_line(&misplaced, 1, &cfg)
            .unwrap_err()
            .to_string();
        assert!(err.contains("not a forecast KPI"), "{err}");
    }

    #[test]
    fn non_finite_fields_are_rejected() {
        let cfg = config();
        let mut r = parse_trace_line(&good_line(), 1, &cfg).unwrap();
        r.kpis.insert("tput".into(), f64::NAN);
        assert!(r.validate(&cfg).unwrap_err().to_string().contains("tput"));

        let mut r = parse_trace_line(&good_line(), 1, &cfg).unwrap();
        r.reward = f64::INFINITY;
        assert!(r.validate(&cfg).unwrap_err().to_string().contains("reward"));

        let mut r = parse_trace_line(&good_line(), 1, &cfg).unwrap();
        r.forecasts.insert("bwd".into(), vec![1.0, f64::NAN]);
        assert!(r
            .validate(&cfg)
            .unwrap_err()
            .to_string()
            .contains("non-finite"));
    }

    #[test]
    fn off_ladder_action_is_rejected_with_line_number() {
        let bad = good_line().replace("750.0,", "751.0,");
        let err = parse_trace_line(&bad, 9, &config())
            .unwrap_err()
            .to_string();
        assert!(err.contains("line 9") && err.contains("action"), "{err}");
    }

    #[test]
    fn malformed_json_reports_the_line() {
        let err = parse_trace_line("{not json", 3, &config()).unwrap_err();
        match err {
            Error::Trace { line, .. } => assert_eq!(line, 3),
            other => panic!("unexpected error {other:?}"),
        }
    }

    #[test]
    fn reader_skips_blank_lines_and_numbers_errors() {
        let cfg = config();
        let text = format!("{}\n\n{{bad\n", good_line());
        let mut reader = TraceReader::new(Cursor::new(text), &cfg);
        assert!(reader.next().unwrap().is_ok());
        let err = reader.next().unwrap().unwrap_err().to_string();
        assert!(err.contains("line 3"), "{err}");
        assert!(reader.next().is_none());
    }

    #[test]
    fn unknown_top_level_fields_are_rejected() {
        let bad = good_line().replace(r#""reward": 0.91}"#, r#""reward": 0.91, "extra": 1}"#);
        assert!(parse_trace_line(&bad, 1, &config()).is_err());
    }
}
