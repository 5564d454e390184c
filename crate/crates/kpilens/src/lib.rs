//! Streaming symbolic interpretability for KPI-driven control agents.
//!
//! The crate turns numeric KPI streams (plus optional forecasts) into
//! bounded symbolic states, maintains one lightweight knowledge graph per
//! KPI, and derives explanations from those graphs while the agent runs:
//!
//! * [`symbolizer`] — change detection, streaming percentile sketches, and
//!   categorical/trend bucketing that map each KPI sample to a symbolic state.
//! * [`action`] — action-space descriptors and action symbolization.
//! * [`kg`] — per-KPI knowledge graphs over (state, action, state) edges
//!   with visit counts and reward statistics.
//! * [`explain`] — local influence scores, mutual-information reports, and
//!   policy graphs with DOT export.
//! * [`refine`] — forecast-aware action refinement on top of the graphs.
//! * [`pipeline`] — the streaming engine that ties the above to the JSONL
//!   trace format in [`trace`], with snapshot support in [`snapshot`].
//! * [`harness`] — a synthetic adaptive-bitrate environment with scripted
//!   agents and forecasters, used for end-to-end evaluation.
//! * [`bench`] — per-component latency measurement for the pipeline.

pub mod action;
pub mod bench;
pub mod config;
pub mod error;
pub mod explain;
pub mod harness;
pub mod kg;
pub mod pipeline;
pub mod refine;
pub mod sketch;
pub mod snapshot;
pub mod symbolizer;
pub mod trace;

pub use action::{ActionSpace, ActionSymbol, ActionValue};
pub use config::PipelineConfig;
pub use error::{Error, Result};
pub use kg::KpiKnowledgeGraph;
pub use pipeline::{ExplanationRecord, Pipeline};
pub use sketch::QuantileSketch;
pub use symbolizer::{KpiConfig, KpiSymbolizer, Predicate, SymbolicState};
pub use trace::TraceRecord;
