//! Synthetic adaptive-bitrate workload for exercising the pipeline end
//! to end: a chunked video environment with a piecewise-constant
//! bandwidth process, a scripted reactive agent, pluggable forecasters,
//! and an episode runner that drives the interpretability pipeline
//! exactly the way a live deployment would.

pub mod agent;
pub mod env;
pub mod episode;
pub mod forecast;

pub use agent::ReactiveAgent;
pub use env::{AbrEnv, BandwidthProcess, StepOutcome, SyntheticEnvConfig};
pub use episode::{pipeline_config_for, run_session, HarnessConfig, SessionResult};
pub use forecast::{persistence_forecast, ForecastKind};
