//! The session runner: ties environment, agent, forecaster, and pipeline
//! together exactly the way a live deployment would, and emits the trace
//! it played so that replaying the trace reproduces the session's
//! explanation stream byte for byte.
//!
//! Conventions the trace follows:
//!
//! * the reward field of record `t` is the reward collected by the
//!   action at `t-1`; the first record of each episode carries 0,
//! * each episode ends with a terminal record (final observation, the
//!   last action repeated, the last chunk's reward) so no reward is
//!   dropped at the boundary,
//! * timesteps run continuously across episodes and the pipeline is
//!   never reset — the knowledge graphs accumulate over the session.
//!
//! Early warm-up episodes add epsilon-greedy exploration so the graphs
//! see more than the scripted agent's single reaction to each state;
//! evaluation episodes are pure policy. In auto mode the refiner margin
//! `tau` is a fixed fraction of the step-reward range measured on an
//! unrefined probe of the warm-up episodes, so a session's margin is a
//! single number known up front and the whole session stays replayable.

use std::collections::BTreeMap;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::action::{ActionSpace, ActionValue};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::pipeline::{ExplanationRecord, FinalReport, Pipeline};
use crate::refine::RefinerConfig;
use crate::symbolizer::KpiConfig;
use crate::trace::TraceRecord;

use super::agent::ReactiveAgent;
use super::env::{AbrEnv, SyntheticEnvConfig};
use super::forecast::{persistence_forecast, ForecastKind};

/// Everything a session needs besides its seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HarnessConfig {
    #[serde(default)]
    pub env: SyntheticEnvConfig,
    #[serde(default)]
    pub agent: ReactiveAgent,
    #[serde(default = "default_forecaster")]
    pub forecaster: ForecastKind,
    #[serde(default = "default_episodes")]
    pub episodes: usize,
    #[serde(default = "default_warmup")]
    pub warmup_episodes: usize,
    #[serde(default = "default_horizon")]
    pub forecast_horizon: usize,
    #[serde(default = "default_epsilon")]
    pub exploration_epsilon: f64,
    /// Auto-mode refiner margin, as a fraction of the warm-up
    /// step-reward range.
    #[serde(default = "default_tau_fraction")]
    pub tau_fraction: f64,
}

fn default_forecaster() -> ForecastKind {
    ForecastKind::Perfect
}
fn default_episodes() -> usize {
    8
}
fn default_warmup() -> usize {
    3
}
fn default_horizon() -> usize {
    3
}
fn default_epsilon() -> f64 {
    0.25
}
fn default_tau_fraction() -> f64 {
    0.03
}

impl Default for HarnessConfig {
    fn default() -> Self {
        HarnessConfig {
            env: SyntheticEnvConfig::default(),
            agent: ReactiveAgent::default(),
            forecaster: default_forecaster(),
            episodes: default_episodes(),
            warmup_episodes: default_warmup(),
            forecast_horizon: default_horizon(),
            exploration_epsilon: default_epsilon(),
            tau_fraction: default_tau_fraction(),
        }
    }
}

impl HarnessConfig {
    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        if self.episodes == 0 {
            return Err(Error::Config("at least one episode is required".into()));
        }
        if self.warmup_episodes >= self.episodes {
            return Err(Error::Config(
                "warmup_episodes must leave at least one evaluation episode".into(),
            ));
        }
        if self.forecast_horizon == 0 {
            return Err(Error::Config("forecast_horizon must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.exploration_epsilon) {
            return Err(Error::Config(
                "exploration_epsilon must lie in [0, 1]".into(),
            ));
        }
        if !(self.tau_fraction.is_finite() && self.tau_fraction >= 0.0) {
            return Err(Error::Config("tau_fraction must be finite and >= 0".into()));
        }
        Ok(())
    }
}

/// Pipeline configuration matching the harness KPIs: throughput, buffer,
/// download delay, the forecast-bearing bandwidth reading, and chunks
/// remaining; actions are the bitrate ladder.
pub fn pipeline_config_for(harness: &HarnessConfig) -> PipelineConfig {
    PipelineConfig {
        kpis: vec![
            KpiConfig::named("tput"),
            KpiConfig::named("buffer"),
            KpiConfig::named("delay"),
            KpiConfig::named("bwd").with_forecast(),
            KpiConfig::named("chunks_rem"),
        ],
        forecast_horizon: harness.forecast_horizon,
        action_space: ActionSpace::Ordered {
            name: "bitrate".into(),
            values: harness.env.ladder_kbps.clone(),
            sigma: 1.0,
        },
        refiner: RefinerConfig {
            tau: 0.0,
            kpi_order: vec!["bwd".into()],
            enabled: true,
        },
        mi_offsets: [
            ("bwd".to_string(), vec![0, 1]),
            ("tput".to_string(), vec![-1, 0]),
        ]
        .into(),
    }
}

/// A finished session: the trace it played, the explanations the
/// pipeline produced live, and the end-of-run reports.
#[derive(Debug, Clone)]
pub struct SessionResult {
    /// Exact pipeline configuration used (with the final `tau`), for
    /// byte-identical replays.
    pub config: PipelineConfig,
    pub records: Vec<TraceRecord>,
    pub explanations: Vec<ExplanationRecord>,
    pub report: FinalReport,
    pub episode_rewards: Vec<f64>,
    /// Mean total reward over the evaluation (post-warm-up) episodes.
    pub eval_mean_reward: f64,
    pub overrides_applied: u64,
    pub tau: f64,
}

fn episode_seed(seed: u64, episode: usize) -> u64 {
    seed.wrapping_add((episode as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

fn exploration_rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed ^ 0xE1A5_C0DE_F00D_5EED)
}

fn choose(
    rng: &mut ChaCha8Rng,
    harness: &HarnessConfig,
    exploring: bool,
    kpis: &BTreeMap<String, f64>,
) -> f64 {
    let ladder = &harness.env.ladder_kbps;
    if exploring && harness.exploration_epsilon > 0.0 && rng.gen_bool(harness.exploration_epsilon) {
        ladder[rng.gen_range(0..ladder.len())]
    } else {
        harness.agent.propose(ladder, kpis["tput"], kpis["buffer"])
    }
}

fn forecast_for(
    harness: &HarnessConfig,
    env: &AbrEnv,
    kpis: &BTreeMap<String, f64>,
) -> Result<BTreeMap<String, Vec<f64>>> {
    let forecast = match harness.forecaster {
        ForecastKind::Perfect => env.true_bandwidth_ahead(harness.forecast_horizon),
        ForecastKind::Persistence => {
            persistence_forecast(&[kpis["bwd"]], harness.forecast_horizon)?
        }
    };
    Ok([("bwd".to_string(), forecast)].into())
}

/// Step-reward range over an unrefined run of the warm-up episodes;
/// used to derive the auto-mode refiner margin. Draws the exploration
/// RNG exactly as the real session's warm-up does.
pub fn probe_reward_range(harness: &HarnessConfig, seed: u64) -> Result<(f64, f64)> {
    let mut rng = exploration_rng(seed);
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for episode in 0..harness.warmup_episodes {
        let mut env = AbrEnv::new(
            harness.env.clone(),
            episode_seed(seed, episode),
            harness.forecast_horizon,
        )?;
        while !env.done() {
            let kpis = env.kpis();
            let bitrate = choose(&mut rng, harness, true, &kpis);
            let out = env.step(bitrate)?;
            lo = lo.min(out.reward);
            hi = hi.max(out.reward);
        }
    }
    if !lo.is_finite() {
        return Ok((0.0, 0.0));
    }
    Ok((lo, hi))
}

/// Run a full session. `apply_refinement` makes the pipeline's advice
/// binding (the refined action is what executes and what the trace
/// records); `tau` of `None` selects the auto margin from the warm-up
/// probe.
pub fn run_session(
    harness: &HarnessConfig,
    seed: u64,
    apply_refinement: bool,
    tau: Option<f64>,
) -> Result<SessionResult> {
    harness.validate()?;
    let tau = match tau {
        Some(t) => t,
        None => {
            let (lo, hi) = probe_reward_range(harness, seed)?;
            harness.tau_fraction * (hi - lo)
        }
    };
    let mut config = pipeline_config_for(harness);
    config.refiner.tau = tau;
    let mut pipeline = Pipeline::new(config.clone())?;
    // Pipeline::new normalized the config (filled derived defaults);
    // keep the published copy identical for replays.
    config = pipeline.config().clone();

    let mut rng = exploration_rng(seed);
    let mut records = Vec::new();
    let mut explanations = Vec::new();
    let mut episode_rewards = Vec::with_capacity(harness.episodes);
    let mut overrides_applied = 0u64;
    let mut t: i64 = 0;

    for episode in 0..harness.episodes {
        let exploring = episode < harness.warmup_episodes;
        let mut env = AbrEnv::new(
            harness.env.clone(),
            episode_seed(seed, episode),
            harness.forecast_horizon,
        )?;
        let mut pending_reward = 0.0;
        let mut episode_reward = 0.0;
        let mut last_bitrate = harness.env.ladder_kbps[0];

        while !env.done() {
            let kpis = env.kpis();
            let forecasts = forecast_for(harness, &env, &kpis)?;
            let mut bitrate = choose(&mut rng, harness, exploring, &kpis);
            let mut action = ActionValue::Number(bitrate);
            if apply_refinement {
                let decision = pipeline.advise(&kpis, &forecasts, &action)?;
                if decision.overridden {
                    overrides_applied += 1;
                    action = decision.refined.effective_value();
                    if let ActionValue::Number(v) = action {
                        bitrate = v;
                    }
                }
            }
            let record = TraceRecord {
                t,
                kpis,
                forecasts,
                action,
                reward: pending_reward,
            };
            explanations.push(pipeline.process(&record)?);
            records.push(record);

            let outcome = env.step(bitrate)?;
            pending_reward = outcome.reward;
            episode_reward += outcome.reward;
            last_bitrate = bitrate;
            t += 1;
        }

        // Terminal record: the final observation, the last action
        // repeated, and the last chunk's reward.
        let kpis = env.kpis();
        let forecasts = forecast_for(harness, &env, &kpis)?;
        let record = TraceRecord {
            t,
            kpis,
            forecasts,
            action: ActionValue::Number(last_bitrate),
            reward: pending_reward,
        };
        explanations.push(pipeline.process(&record)?);
        records.push(record);
        t += 1;
        episode_rewards.push(episode_reward);
    }

    let report = pipeline.finish()?;
    let eval = &episode_rewards[harness.warmup_episodes..];
    let eval_mean_reward = eval.iter().sum::<f64>() / eval.len() as f64;
    Ok(SessionResult {
        config,
        records,
        explanations,
        report,
        episode_rewards,
        eval_mean_reward,
        overrides_applied,
        tau,
    })
}
