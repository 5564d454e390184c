//! Chunked adaptive-bitrate environment with a synthetic bandwidth
//! process.
//!
//! Each step downloads one fixed-duration chunk at the chosen ladder
//! bitrate over the current bandwidth level. The per-step reward is the
//! usual quality / rebuffering / smoothness trade-off,
//!
//! ```text
//! r = q(R_t) - mu * rebuffer_seconds - |q(R_t) - q(R_t-1)|
//! ```
//!
//! with `q(R)` the bitrate in Mbps and no smoothness term on the first
//! chunk. Bandwidth is precomputed per chunk from a seeded generator, so
//! an episode's network is a pure function of its seed — independent of
//! the agent's actions, which is what makes paired comparisons between
//! agent variants meaningful.

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Piecewise-constant bandwidth generator: segments of random chunk
/// length at a level drawn from `base_levels_kbps`, occasionally
/// replaced by a deep drop — the forecastable events a reactive agent
/// discovers one chunk too late.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BandwidthProcess {
    pub base_levels_kbps: Vec<f64>,
    pub segment_chunks_min: usize,
    pub segment_chunks_max: usize,
    /// Probability that a segment is a drop instead of a base level.
    pub drop_probability: f64,
    pub drop_level_kbps: f64,
    /// Multiplicative jitter amplitude applied per segment.
    pub jitter: f64,
}

impl Default for BandwidthProcess {
    fn default() -> Self {
        BandwidthProcess {
            base_levels_kbps: vec![500.0, 900.0, 1400.0, 2100.0, 3200.0],
            segment_chunks_min: 4,
            segment_chunks_max: 10,
            drop_probability: 0.18,
            drop_level_kbps: 280.0,
            jitter: 0.08,
        }
    }
}

impl BandwidthProcess {
    pub fn validate(&self) -> Result<()> {
        if self.base_levels_kbps.is_empty()
            || self
                .base_levels_kbps
                .iter()
                .any(|v| !(v.is_finite() && *v > 0.0))
        {
            return Err(Error::Config(
                "bandwidth base levels must be positive and non-empty".into(),
            ));
        }
        if self.segment_chunks_min == 0 || self.segment_chunks_max < self.segment_chunks_min {
            return Err(Error::Config(
                "bandwidth segment length range is empty".into(),
            ));
        }
        if !(0.0..=1.0).contains(&self.drop_probability) {
            return Err(Error::Config("drop probability must lie in [0, 1]".into()));
        }
        if !(self.drop_level_kbps.is_finite() && self.drop_level_kbps > 0.0) {
            return Err(Error::Config("drop level must be positive".into()));
        }
        if !(self.jitter.is_finite() && (0.0..1.0).contains(&self.jitter)) {
            return Err(Error::Config("jitter must lie in [0, 1)".into()));
        }
        Ok(())
    }

    /// Per-chunk bandwidth levels, `len` of them, fully determined by
    /// `seed`.
    pub fn generate(&self, seed: u64, len: usize) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut out = Vec::with_capacity(len);
        while out.len() < len {
            let segment = rng.gen_range(self.segment_chunks_min..=self.segment_chunks_max);
            let level = if rng.gen_bool(self.drop_probability) {
                self.drop_level_kbps
            } else {
                self.base_levels_kbps[rng.gen_range(0..self.base_levels_kbps.len())]
            };
            let jitter = 1.0 + self.jitter * rng.gen_range(-1.0..=1.0);
            for _ in 0..segment {
                out.push(level * jitter);
                if out.len() == len {
                    break;
                }
            }
        }
        out
    }
}

/// Environment parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SyntheticEnvConfig {
    pub ladder_kbps: Vec<f64>,
    pub chunk_seconds: f64,
    pub buffer_cap_seconds: f64,
    /// Rebuffering penalty per stalled second.
    pub rebuffer_penalty: f64,
    pub rtt_seconds: f64,
    pub episode_chunks: usize,
    pub bandwidth: BandwidthProcess,
}

impl Default for SyntheticEnvConfig {
    fn default() -> Self {
        SyntheticEnvConfig {
            ladder_kbps: vec![300.0, 750.0, 1200.0, 1850.0, 2850.0],
            chunk_seconds: 4.0,
            buffer_cap_seconds: 30.0,
            rebuffer_penalty: 4.3,
            rtt_seconds: 0.08,
            episode_chunks: 48,
            bandwidth: BandwidthProcess::default(),
        }
    }
}

impl SyntheticEnvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.ladder_kbps.is_empty()
            || self
                .ladder_kbps
                .iter()
                .any(|v| !(v.is_finite() && *v > 0.0))
            || self.ladder_kbps.windows(2).any(|w| w[0] >= w[1])
        {
            return Err(Error::Config(
                "bitrate ladder must be positive and strictly increasing".into(),
            ));
        }
        for (name, v) in [
            ("chunk_seconds", self.chunk_seconds),
            ("buffer_cap_seconds", self.buffer_cap_seconds),
            ("rebuffer_penalty", self.rebuffer_penalty),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::Config(format!("{name} must be positive")));
            }
        }
        if !(self.rtt_seconds.is_finite() && self.rtt_seconds >= 0.0) {
            return Err(Error::Config("rtt_seconds must be >= 0".into()));
        }
        // episode_chunks of 0 is allowed: such an episode plays no chunks
        // and contributes zero reward.
        self.bandwidth.validate()
    }

    pub fn from_path(path: &std::path::Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let config: SyntheticEnvConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        config.validate()?;
        Ok(config)
    }
}

/// Result of downloading one chunk.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: f64,
    pub rebuffer_seconds: f64,
    pub download_seconds: f64,
    /// Measured goodput of the download, in kbps.
    pub tput_kbps: f64,
}

/// One episode's environment state.
#[derive(Debug, Clone)]
pub struct AbrEnv {
    config: SyntheticEnvConfig,
    bandwidth_kbps: Vec<f64>,
    step_index: usize,
    buffer_seconds: f64,
    last_bitrate_kbps: Option<f64>,
    last_tput_kbps: f64,
    last_delay_seconds: f64,
}

impl AbrEnv {
    /// `forecast_horizon` extra bandwidth chunks are precomputed so that
    /// a perfect forecast is available at every step including the final
    /// observation.
    pub fn new(config: SyntheticEnvConfig, seed: u64, forecast_horizon: usize) -> Result<Self> {
        config.validate()?;
        let len = config.episode_chunks + forecast_horizon + 1;
        let bandwidth_kbps = config.bandwidth.generate(seed, len);
        Ok(AbrEnv {
            config,
            bandwidth_kbps,
            step_index: 0,
            buffer_seconds: 0.0,
            last_bitrate_kbps: None,
            last_tput_kbps: 0.0,
            last_delay_seconds: 0.0,
        })
    }

    pub fn config(&self) -> &SyntheticEnvConfig {
        &self.config
    }

    pub fn done(&self) -> bool {
        self.step_index >= self.config.episode_chunks
    }

    pub fn buffer_seconds(&self) -> f64 {
        self.buffer_seconds
    }

    /// The KPI vector visible to the agent right now, before it commits
    /// to a bitrate: measured throughput and delay of the previous
    /// download, current buffer level, the bandwidth service's current
    /// reading, and chunks remaining.
    pub fn kpis(&self) -> std::collections::BTreeMap<String, f64> {
        [
            ("tput".to_string(), self.last_tput_kbps),
            ("buffer".to_string(), self.buffer_seconds),
            ("delay".to_string(), self.last_delay_seconds),
            ("bwd".to_string(), self.bandwidth_kbps[self.step_index]),
            (
                "chunks_rem".to_string(),
                (self.config.episode_chunks - self.step_index.min(self.config.episode_chunks))
                    as f64,
            ),
        ]
        .into()
    }

    /// Ground-truth bandwidth over the next `horizon` chunks — what a
    /// perfect forecasting service would return at this step.
    pub fn true_bandwidth_ahead(&self, horizon: usize) -> Vec<f64> {
        let start = self.step_index + 1;
        self.bandwidth_kbps[start..start + horizon].to_vec()
    }

    /// Download the next chunk at `bitrate_kbps` (must be on the ladder).
    pub fn step(&mut self, bitrate_kbps: f64) -> Result<StepOutcome> {
        if self.done() {
            return Err(Error::Validation(
                "episode is over; no chunks remain".into(),
            ));
        }
        if !self.config.ladder_kbps.contains(&bitrate_kbps) {
            return Err(Error::Validation(format!(
                "bitrate {bitrate_kbps} kbps is not on the ladder"
            )));
        }
        let bw = self.bandwidth_kbps[self.step_index];
        let download = bitrate_kbps * self.config.chunk_seconds / bw + self.config.rtt_seconds;
        let rebuffer = (download - self.buffer_seconds).max(0.0);
        self.buffer_seconds = ((self.buffer_seconds - download).max(0.0)
            + self.config.chunk_seconds)
            .min(self.config.buffer_cap_seconds);

        let quality = bitrate_kbps / 1000.0;
        let smoothness = self
            .last_bitrate_kbps
            .map(|prev| (quality - prev / 1000.0).abs())
            .unwrap_or(0.0);
        let reward = quality - self.config.rebuffer_penalty * rebuffer - smoothness;

        let tput_kbps = bitrate_kbps * self.config.chunk_seconds / download;
        self.last_bitrate_kbps = Some(bitrate_kbps);
        self.last_tput_kbps = tput_kbps;
        self.last_delay_seconds = download;
        self.step_index += 1;
        Ok(StepOutcome {
            reward,
            rebuffer_seconds: rebuffer,
            download_seconds: download,
            tput_kbps,
        })
    }
}
