//! Numeric KPI samples to symbolic states.
//!
//! Each KPI stream is summarized per timestep as a first-order state
//!
//! ```text
//! <predicate>(<kpi>, <category>[, <trend>])      e.g. inc(tput, High, Dropping)
//! ```
//!
//! built from three ingredients:
//!
//! * a change predicate (`inc`/`dec`/`const`) from the relative delta
//!   against the previous sample,
//! * a category label from the sample's percentile rank against the KPI's
//!   own streaming distribution (one [`QuantileSketch`] per configured
//!   percentile boundary),
//! * optionally a trend label from the least-squares slope of the KPI's
//!   forecast, ranked against the history of past forecast slopes.
//!
//! With the default five categories and three trends a KPI can take at most
//! 3 x 5 x 3 = 45 distinct states, which keeps the per-KPI knowledge graphs
//! bounded regardless of stream length.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sketch::QuantileSketch;

/// Absolute tolerance used when the previous sample is exactly zero: any
/// current sample within this of zero still counts as `const`.
const ZERO_EPS: f64 = 1e-9;

/// Direction of change between consecutive samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Predicate {
    Inc,
    Dec,
    Const,
}

impl Predicate {
    pub fn as_str(&self) -> &'static str {
        match self {
            Predicate::Inc => "inc",
            Predicate::Dec => "dec",
            Predicate::Const => "const",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "inc" => Ok(Predicate::Inc),
            "dec" => Ok(Predicate::Dec),
            "const" => Ok(Predicate::Const),
            other => Err(Error::Validation(format!("unknown predicate `{other}`"))),
        }
    }
}

impl std::fmt::Display for Predicate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Per-KPI symbolization parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KpiConfig {
    /// Identifier used in traces, explanations, and snapshot file names.
    pub name: String,
    /// Relative-change threshold for the `inc`/`dec` predicates.
    #[serde(default = "default_theta")]
    pub theta: f64,
    /// Category labels, one more than `category_boundaries`.
    #[serde(default = "default_category_labels")]
    pub category_labels: Vec<String>,
    /// Percentile cut-points in (0, 100), strictly increasing.
    #[serde(default = "default_category_boundaries")]
    pub category_boundaries: Vec<f64>,
    /// Trend labels, one more than `trend_boundaries`.
    #[serde(default = "default_trend_labels")]
    pub trend_labels: Vec<String>,
    /// Percentile cut-points for forecast slopes, strictly increasing.
    #[serde(default = "default_trend_boundaries")]
    pub trend_boundaries: Vec<f64>,
    /// Whether trace records carry a forecast series for this KPI.
    #[serde(default)]
    pub has_forecast: bool,
}

fn default_theta() -> f64 {
    0.05
}

fn default_category_labels() -> Vec<String> {
    ["VeryLow", "Low", "Medium", "High", "VeryHigh"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_category_boundaries() -> Vec<f64> {
    vec![20.0, 40.0, 60.0, 80.0]
}

fn default_trend_labels() -> Vec<String> {
    ["Dropping", "Fluctuating", "Spiking"]
        .iter()
        .map(|s| s.to_string())
        .collect()
}

fn default_trend_boundaries() -> Vec<f64> {
    vec![40.0, 60.0]
}

impl KpiConfig {
    /// Default configuration for a KPI: five categories at [20, 40, 60, 80]
    /// and, when `has_forecast`, three trends at [40, 60].
    pub fn named(name: &str) -> Self {
        KpiConfig {
            name: name.into(),
            theta: default_theta(),
            category_labels: default_category_labels(),
            category_boundaries: default_category_boundaries(),
            trend_labels: default_trend_labels(),
            trend_boundaries: default_trend_boundaries(),
            has_forecast: false,
        }
    }

    pub fn with_forecast(mut self) -> Self {
        self.has_forecast = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        let err = |reason: String| Err(Error::Config(reason));
        if self.name.is_empty() {
            return err("KPI name must not be empty".into());
        }
        if !self
            .name
            .chars()
            .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return err(format!(
                "KPI name `{}` may only contain [A-Za-z0-9_.-]",
                self.name
            ));
        }
        if !(self.theta.is_finite() && self.theta >= 0.0) {
            return err(format!(
                "KPI `{}`: theta must be finite and >= 0, got {}",
                self.name, self.theta
            ));
        }
        validate_bands(
            &self.name,
            "category",
            &self.category_labels,
            &self.category_boundaries,
        )?;
        validate_bands(
            &self.name,
            "trend",
            &self.trend_labels,
            &self.trend_boundaries,
        )?;
        Ok(())
    }

    /// Upper bound on the number of distinct symbolic states this config
    /// can produce (3 predicates x categories x trends).
    pub fn state_bound(&self) -> usize {
        let trends = if self.has_forecast {
            self.trend_labels.len()
        } else {
            1
        };
        3 * self.category_labels.len() * trends
    }
}

fn validate_bands(kpi: &str, what: &str, labels: &[String], boundaries: &[f64]) -> Result<()> {
    let err = |reason: String| Err(Error::Config(reason));
    if labels.is_empty() {
        return err(format!("KPI `{kpi}`: at least one {what} label required"));
    }
    if labels.len() != boundaries.len() + 1 {
        return err(format!(
            "KPI `{kpi}`: {} {what} labels need {} boundaries, got {}",
            labels.len(),
            labels.len() - 1,
            boundaries.len()
        ));
    }
    let mut seen = std::collections::BTreeSet::new();
    for l in labels {
        if !seen.insert(l) {
            return err(format!("KPI `{kpi}`: duplicate {what} label `{l}`"));
        }
        // Labels appear inside rendered states, which snapshots parse
        // back, so they share the KPI-name charset.
        if l.is_empty()
            || !l
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.'))
        {
            return err(format!(
                "KPI `{kpi}`: {what} label `{l}` may only contain [A-Za-z0-9_.-]"
            ));
        }
    }
    if boundaries
        .iter()
        .any(|b| !b.is_finite() || *b <= 0.0 || *b >= 100.0)
    {
        return err(format!(
            "KPI `{kpi}`: {what} boundaries must lie strictly inside (0, 100)"
        ));
    }
    for w in boundaries.windows(2) {
        if w[0] >= w[1] {
            return err(format!(
                "KPI `{kpi}`: {what} boundaries must be strictly increasing"
            ));
        }
    }
    Ok(())
}

/// Symbolic state of one KPI at one timestep. Category and trend are
/// indices into the KPI's configured label lists.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct SymbolicState {
    pub predicate: Predicate,
    pub category: u8,
    pub trend: Option<u8>,
}

impl SymbolicState {
    /// Render as `pred(kpi, Category[, Trend])`.
    pub fn render(&self, config: &KpiConfig) -> String {
        let cat = config
            .category_labels
            .get(self.category as usize)
            .map(String::as_str)
            .unwrap_or("?");
        match self.trend {
            Some(t) => {
                let trend = config
                    .trend_labels
                    .get(t as usize)
                    .map(String::as_str)
                    .unwrap_or("?");
                format!("{}({}, {}, {})", self.predicate, config.name, cat, trend)
            }
            None => format!("{}({}, {})", self.predicate, config.name, cat),
        }
    }

    /// Parse a rendered state back under the configuration that rendered
    /// it. Labels are restricted to a comma-free charset, so the format
    /// is unambiguous.
    pub fn parse_rendered(s: &str, config: &KpiConfig) -> Result<Self> {
        let bad = || Error::Snapshot(format!("malformed state `{s}` for KPI {}", config.name));
        let (pred, rest) = s.split_once('(').ok_or_else(bad)?;
        let predicate = Predicate::parse(pred)?;
        let inner = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut parts = inner.split(", ");
        let name = parts.next().ok_or_else(bad)?;
        if name != config.name {
            return Err(Error::Snapshot(format!(
                "state `{s}` does not belong to KPI {}",
                config.name
            )));
        }
        let cat_label = parts.next().ok_or_else(bad)?;
        let category = config
            .category_labels
            .iter()
            .position(|l| l == cat_label)
            .ok_or_else(|| {
                Error::Snapshot(format!("unknown category label `{cat_label}` in `{s}`"))
            })? as u8;
        let trend = match parts.next() {
            None => None,
            Some(trend_label) => Some(
                config
                    .trend_labels
                    .iter()
                    .position(|l| l == trend_label)
                    .ok_or_else(|| {
                        Error::Snapshot(format!("unknown trend label `{trend_label}` in `{s}`"))
                    })? as u8,
            ),
        };
        if parts.next().is_some() {
            return Err(bad());
        }
        Ok(SymbolicState {
            predicate,
            category,
            trend,
        })
    }
}

/// Classify the move from `v_prev` to `v_t` with relative threshold
/// `theta`: `inc`/`dec` when the magnitude of the relative change strictly
/// exceeds `theta`, `const` otherwise. A zero previous value falls back to
/// an absolute comparison against [`ZERO_EPS`].
pub fn detect_change(v_t: f64, v_prev: f64, theta: f64) -> Result<Predicate> {
    if !v_t.is_finite() || !v_prev.is_finite() {
        return Err(Error::Validation(format!(
            "detect_change requires finite inputs, got v_t={v_t}, v_prev={v_prev}"
        )));
    }
    if !(theta.is_finite() && theta >= 0.0) {
        return Err(Error::Validation(format!(
            "detect_change threshold must be finite and >= 0, got {theta}"
        )));
    }
    if v_prev == 0.0 {
        return Ok(if v_t.abs() <= ZERO_EPS {
            Predicate::Const
        } else if v_t > 0.0 {
            Predicate::Inc
        } else {
            Predicate::Dec
        });
    }
    let rel = (v_t - v_prev) / v_prev.abs();
    Ok(if rel > theta {
        Predicate::Inc
    } else if -rel > theta {
        Predicate::Dec
    } else {
        Predicate::Const
    })
}

/// Percentile rank of `v` against tracked heights at the given percentile
/// boundaries, by piecewise-linear interpolation between adjacent
/// boundaries (extrapolating along the outer segments), clamped to
/// [0, 100]. A value equal to a tracked height ranks exactly at that
/// boundary. `heights` are forced non-decreasing first, since independent
/// sketches can momentarily cross.
pub fn rank_against(v: f64, boundaries: &[f64], heights: &[f64]) -> f64 {
    assert_eq!(boundaries.len(), heights.len());
    assert!(!boundaries.is_empty(), "rank_against needs >= 1 boundary");
    let n = boundaries.len();
    let mut hs = heights.to_vec();
    for i in 1..n {
        if hs[i] < hs[i - 1] {
            hs[i] = hs[i - 1];
        }
    }
    if n == 1 {
        let b = boundaries[0];
        return if v < hs[0] {
            b / 2.0
        } else if v > hs[0] {
            (b + 100.0) / 2.0
        } else {
            b
        };
    }
    if v <= hs[0] {
        if v == hs[0] {
            return boundaries[0];
        }
        let (b0, b1) = (boundaries[0], boundaries[1]);
        if hs[1] > hs[0] {
            return (b0 + (v - hs[0]) * (b1 - b0) / (hs[1] - hs[0])).clamp(0.0, 100.0);
        }
        return 0.0;
    }
    if v >= hs[n - 1] {
        if v == hs[n - 1] {
            return boundaries[n - 1];
        }
        let (b0, b1) = (boundaries[n - 2], boundaries[n - 1]);
        if hs[n - 1] > hs[n - 2] {
            return (b1 + (v - hs[n - 1]) * (b1 - b0) / (hs[n - 1] - hs[n - 2])).clamp(0.0, 100.0);
        }
        return 100.0;
    }
    for i in 0..n - 1 {
        if v <= hs[i + 1] {
            if v == hs[i + 1] {
                return boundaries[i + 1];
            }
            let (b0, b1) = (boundaries[i], boundaries[i + 1]);
            return b0 + (v - hs[i]) * (b1 - b0) / (hs[i + 1] - hs[i]);
        }
    }
    unreachable!("rank_against scanned past the last segment")
}

/// Map a percentile rank to a band index: band i covers
/// [boundary_{i-1}, boundary_i) with the top band closed at 100.
pub fn categorize(rank: f64, boundaries: &[f64]) -> usize {
    boundaries.iter().filter(|b| rank >= **b).count()
}

/// Ordinary least-squares slope of `series` against indices 0..n-1.
pub fn linreg_slope(series: &[f64]) -> Result<f64> {
    if series.len() < 2 {
        return Err(Error::Validation(format!(
            "slope needs at least two points, got {}",
            series.len()
        )));
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::Validation("slope requires finite inputs".into()));
    }
    let n = series.len() as f64;
    let x_mean = (n - 1.0) / 2.0;
    let y_mean = series.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut den = 0.0;
    for (i, y) in series.iter().enumerate() {
        let dx = i as f64 - x_mean;
        num += dx * (y - y_mean);
        den += dx * dx;
    }
    Ok(num / den)
}

/// Streaming symbolizer for one KPI: owns the percentile sketches for the
/// value and forecast-slope distributions plus the previous raw sample.
#[derive(Debug, Clone)]
pub struct KpiSymbolizer {
    config: KpiConfig,
    value_sketches: Vec<QuantileSketch>,
    slope_sketches: Vec<QuantileSketch>,
    last_value: Option<f64>,
    observations: u64,
}

impl KpiSymbolizer {
    pub fn new(config: KpiConfig) -> Result<Self> {
        config.validate()?;
        let value_sketches = config
            .category_boundaries
            .iter()
            .map(|b| QuantileSketch::new(b / 100.0))
            .collect::<Result<Vec<_>>>()?;
        let slope_sketches = config
            .trend_boundaries
            .iter()
            .map(|b| QuantileSketch::new(b / 100.0))
            .collect::<Result<Vec<_>>>()?;
        Ok(KpiSymbolizer {
            config,
            value_sketches,
            slope_sketches,
            last_value: None,
            observations: 0,
        })
    }

    /// Reassemble a symbolizer from previously captured state (snapshot
    /// restore, or tests that need a known percentile landscape).
    pub fn from_parts(
        config: KpiConfig,
        value_sketches: Vec<QuantileSketch>,
        slope_sketches: Vec<QuantileSketch>,
        last_value: Option<f64>,
        observations: u64,
    ) -> Result<Self> {
        config.validate()?;
        if value_sketches.len() != config.category_boundaries.len()
            || slope_sketches.len() != config.trend_boundaries.len()
        {
            return Err(Error::Snapshot(format!(
                "KPI `{}`: sketch count does not match configured boundaries",
                config.name
            )));
        }
        for (sketch, boundary) in value_sketches
            .iter()
            .zip(&config.category_boundaries)
            .chain(slope_sketches.iter().zip(&config.trend_boundaries))
        {
            sketch.validate()?;
            if sketch.target() != boundary / 100.0 {
                return Err(Error::Snapshot(format!(
                    "KPI `{}`: sketch target {} does not match boundary {}",
                    config.name,
                    sketch.target(),
                    boundary
                )));
            }
        }
        if let Some(v) = last_value {
            if !v.is_finite() {
                return Err(Error::Snapshot(format!(
                    "KPI `{}`: non-finite last value",
                    config.name
                )));
            }
        }
        Ok(KpiSymbolizer {
            config,
            value_sketches,
            slope_sketches,
            last_value,
            observations,
        })
    }

    pub fn config(&self) -> &KpiConfig {
        &self.config
    }

    pub fn value_sketches(&self) -> &[QuantileSketch] {
        &self.value_sketches
    }

    pub fn slope_sketches(&self) -> &[QuantileSketch] {
        &self.slope_sketches
    }

    pub fn last_value(&self) -> Option<f64> {
        self.last_value
    }

    pub fn observations(&self) -> u64 {
        self.observations
    }

    /// Current estimated heights at the category boundaries, or `None`
    /// before the first observation.
    pub fn boundary_heights(&self) -> Option<Vec<f64>> {
        self.value_sketches.iter().map(|s| s.query()).collect()
    }

    /// Percentile rank of `v` against the live value sketches without
    /// updating them.
    pub fn percentile_rank(&self, v: f64) -> Result<f64> {
        if self.config.category_boundaries.is_empty() {
            return Err(Error::Validation(format!(
                "KPI `{}` has no category boundaries to rank against",
                self.config.name
            )));
        }
        let heights = self.boundary_heights().ok_or_else(|| {
            Error::ColdStart(format!(
                "KPI `{}` has no observations yet",
                self.config.name
            ))
        })?;
        Ok(rank_against(v, &self.config.category_boundaries, &heights))
    }

    /// Symbolize the next sample of this KPI, updating the value sketches
    /// (and, when a forecast is given, the slope history).
    ///
    /// The sample is ranked against the distribution seen *before* it,
    /// except at the very first observation where it ranks against itself;
    /// the forecast slope likewise ranks against the slope history before
    /// being recorded into it. The first sample has no predecessor and
    /// yields a `const` predicate. A trend component is present iff the
    /// KPI is configured with `has_forecast` and the forecast has at least
    /// two points.
    pub fn observe(&mut self, v: f64, forecast: Option<&[f64]>) -> Result<SymbolicState> {
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "KPI `{}`: non-finite sample {v}",
                self.config.name
            )));
        }
        let predicate = match self.last_value {
            None => Predicate::Const,
            Some(prev) => detect_change(v, prev, self.config.theta)?,
        };
        let category = if self.config.category_boundaries.is_empty() {
            0
        } else {
            // First observation ever: nothing to rank against, so it ranks
            // against itself. Afterwards, rank first, then record.
            let cold = self.value_sketches[0].is_empty();
            if cold {
                for s in &mut self.value_sketches {
                    s.add(v);
                }
            }
            let rank = self.percentile_rank(v)?;
            if !cold {
                for s in &mut self.value_sketches {
                    s.add(v);
                }
            }
            categorize(rank, &self.config.category_boundaries)
        };
        let trend = match forecast {
            Some(f) if self.config.has_forecast && f.len() >= 2 => Some(self.trend_of(f)?),
            _ => None,
        };
        self.last_value = Some(v);
        self.observations += 1;
        Ok(SymbolicState {
            predicate,
            category: category as u8,
            trend,
        })
    }

    fn trend_of(&mut self, forecast: &[f64]) -> Result<u8> {
        let slope = linreg_slope(forecast)?;
        if self.config.trend_boundaries.is_empty() {
            return Ok(0);
        }
        if self.slope_sketches[0].is_empty() {
            // First slope ever: rank against a history containing itself.
            for s in &mut self.slope_sketches {
                s.add(slope);
            }
            let rank = self.rank_slope(slope)?;
            return Ok(categorize(rank, &self.config.trend_boundaries) as u8);
        }
        let rank = self.rank_slope(slope)?;
        for s in &mut self.slope_sketches {
            s.add(slope);
        }
        Ok(categorize(rank, &self.config.trend_boundaries) as u8)
    }

    fn rank_slope(&self, slope: f64) -> Result<f64> {
        let heights: Option<Vec<f64>> = self.slope_sketches.iter().map(|s| s.query()).collect();
        let heights = heights.ok_or_else(|| {
            Error::ColdStart(format!(
                "KPI `{}` has no slope history yet",
                self.config.name
            ))
        })?;
        Ok(rank_against(slope, &self.config.trend_boundaries, &heights))
    }

    /// Trend label a forecast would receive right now, without recording
    /// its slope into the history: `None` when the KPI carries no trend
    /// component (not forecast-bearing, or fewer than two points). Errors
    /// with a cold-start before any slope history exists.
    pub fn trend_readonly(&self, forecast: Option<&[f64]>) -> Result<Option<u8>> {
        match forecast {
            Some(f) if self.config.has_forecast && f.len() >= 2 => {
                let slope = linreg_slope(f)?;
                if self.config.trend_boundaries.is_empty() {
                    return Ok(Some(0));
                }
                let rank = self.rank_slope(slope)?;
                Ok(Some(categorize(rank, &self.config.trend_boundaries) as u8))
            }
            _ => Ok(None),
        }
    }

    /// Symbolize a hypothetical sample without touching any sketch state:
    /// the predicate compares `v` against `reference` (the current raw
    /// sample), the category ranks `v` against the live value sketches,
    /// and the trend component is passed through unchanged. Used to
    /// project forecast values into future symbolic states.
    pub fn symbolize_readonly(
        &self,
        v: f64,
        reference: Option<f64>,
        trend: Option<u8>,
    ) -> Result<SymbolicState> {
        if !v.is_finite() {
            return Err(Error::Validation(format!(
                "KPI `{}`: non-finite sample {v}",
                self.config.name
            )));
        }
        let predicate = match reference {
            None => Predicate::Const,
            Some(prev) => detect_change(v, prev, self.config.theta)?,
        };
        let category = if self.config.category_boundaries.is_empty() {
            0
        } else {
            categorize(self.percentile_rank(v)?, &self.config.category_boundaries)
        };
        Ok(SymbolicState {
            predicate,
            category: category as u8,
            trend: if self.config.has_forecast {
                trend
            } else {
                None
            },
        })
    }
}
