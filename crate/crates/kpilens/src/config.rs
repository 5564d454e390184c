//! Pipeline configuration: which KPIs to watch, how to symbolize them,
//! the agent's action space, refinement settings, and which
//! mutual-information channels to accumulate.
//!
//! The state-shaping subset of a configuration (KPI definitions, action
//! space, forecast horizon) is fingerprinted with SHA-256; snapshots
//! embed the fingerprint so state is never restored under a
//! configuration that would reinterpret it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::action::ActionSpace;
use crate::error::{Error, Result};
use crate::explain::mi::MiChannelSpec;
use crate::refine::RefinerConfig;
use crate::symbolizer::KpiConfig;

/// Largest lead/lag a mutual-information channel may declare; bounds the
/// pairing ring buffer.
pub const MAX_MI_OFFSET: i64 = 32;

fn default_horizon() -> usize {
    1
}

/// Complete configuration for one interpretability pipeline.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PipelineConfig {
    pub kpis: Vec<KpiConfig>,
    /// Number of forecast steps expected per forecast-bearing KPI.
    #[serde(default = "default_horizon")]
    pub forecast_horizon: usize,
    pub action_space: ActionSpace,
    #[serde(default)]
    pub refiner: RefinerConfig,
    /// Per-KPI mutual-information offsets; a missing entry means the
    /// contemporaneous channel (offset 0) only.
    #[serde(default)]
    pub mi_offsets: BTreeMap<String, Vec<i64>>,
}

impl PipelineConfig {
    /// Parse from JSON, fill defaults that depend on other fields, and
    /// validate.
    pub fn from_json_str(json: &str) -> Result<Self> {
        let mut config: PipelineConfig = serde_json::from_str(json)?;
        config.normalize();
        config.validate()?;
        Ok(config)
    }

    /// Read and validate a configuration file. Unreadable or unparsable
    /// configuration is a configuration error (exit code 1), not a
    /// runtime failure: the path is named in the message.
    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            Error::Json(e) => Error::Config(format!("{}: {e}", path.display())),
            other => other,
        })
    }

    /// Fill cross-field defaults: an empty refiner order becomes every
    /// forecast-bearing KPI in declared order, and KPIs absent from
    /// `mi_offsets` get the contemporaneous channel.
    pub fn normalize(&mut self) {
        if self.refiner.kpi_order.is_empty() {
            self.refiner.kpi_order = self
                .kpis
                .iter()
                .filter(|k| k.has_forecast)
                .map(|k| k.name.clone())
                .collect();
        }
        for kpi in &self.kpis {
            self.mi_offsets
                .entry(kpi.name.clone())
                .or_insert_with(|| vec![0]);
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.kpis.is_empty() {
            return Err(Error::Config("at least one KPI must be declared".into()));
        }
        let mut names = BTreeSet::new();
        for kpi in &self.kpis {
            kpi.validate()?;
            if !names.insert(kpi.name.as_str()) {
                return Err(Error::Config(format!("duplicate KPI name {}", kpi.name)));
            }
        }
        if self.forecast_horizon == 0 {
            return Err(Error::Config("forecast_horizon must be at least 1".into()));
        }
        self.action_space.validate()?;
        self.refiner.validate()?;
        for kpi in &self.refiner.kpi_order {
            match self.kpis.iter().find(|k| &k.name == kpi) {
                None => {
                    return Err(Error::Config(format!(
                        "refiner kpi_order names unknown KPI {kpi}"
                    )))
                }
                Some(k) if !k.has_forecast => {
                    return Err(Error::Config(format!(
                        "refiner kpi_order includes {kpi}, which carries no forecast"
                    )))
                }
                Some(_) => {}
            }
        }
        for (kpi, offsets) in &self.mi_offsets {
            if !names.contains(kpi.as_str()) {
                return Err(Error::Config(format!("mi_offsets names unknown KPI {kpi}")));
            }
            if offsets.is_empty() {
                return Err(Error::Config(format!(
                    "mi_offsets for {kpi} must list at least one offset"
                )));
            }
            let mut seen = BTreeSet::new();
            for &o in offsets {
                if o.abs() > MAX_MI_OFFSET {
                    return Err(Error::Config(format!(
                        "mi_offsets for {kpi} exceeds the limit of +/-{MAX_MI_OFFSET}"
                    )));
                }
                if !seen.insert(o) {
                    return Err(Error::Config(format!(
                        "mi_offsets for {kpi} repeats offset {o}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn kpi(&self, name: &str) -> Option<&KpiConfig> {
        self.kpis.iter().find(|k| k.name == name)
    }

    /// Mutual-information channels in deterministic order: KPIs as
    /// declared, offsets as listed.
    pub fn mi_channels(&self) -> Vec<MiChannelSpec> {
        let mut channels = Vec::new();
        for kpi in &self.kpis {
            if let Some(offsets) = self.mi_offsets.get(&kpi.name) {
                for &offset in offsets {
                    channels.push(MiChannelSpec {
                        kpi: kpi.name.clone(),
                        offset,
                    });
                }
            }
        }
        channels
    }

    /// Hex SHA-256 over the state-shaping subset of the configuration.
    /// Refiner and MI settings deliberately do not participate: they
    /// change what is reported, not how state is encoded.
    pub fn fingerprint(&self) -> String {
        #[derive(Serialize)]
        struct Shape<'a> {
            kpis: &'a [KpiConfig],
            forecast_horizon: usize,
            action_space: &'a ActionSpace,
        }
        let shape = Shape {
            kpis: &self.kpis,
            forecast_horizon: self.forecast_horizon,
            action_space: &self.action_space,
        };
        let canonical = serde_json::to_string(&shape).expect("configuration serializes infallibly");
        let digest = Sha256::digest(canonical.as_bytes());
        let mut out = String::with_capacity(64);
        for byte in digest {
            out.push_str(&format!("{byte:02x}"));
        }
        out
    }
}
