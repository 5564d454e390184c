//! The streaming pipeline: one `process` call per trace record, in
//! timestep order, producing one explanation record per input record.
//!
//! Per record, in order: validate, symbolize every declared KPI (updating
//! the percentile sketches), symbolize the executed action against the
//! previous raw action, score per-KPI influence against the knowledge
//! graphs as they stood *before* this record, evaluate the refiner
//! advisorily, feed the global accumulators, and finally close the
//! previous transition — the reward carried by record `t` pays for the
//! action taken at `t-1`.
//!
//! `advise` offers the same refinement consult *before* an action is
//! committed, read-only, for callers that drive a live system; it agrees
//! exactly with the advisory annotation `process` would produce for the
//! same inputs. `finish` seals the run: the last state receives its
//! terminal visit and the global reports (mutual information, policy
//! graph) are built. Memory stays bounded by the state/action vocabulary,
//! never by trace length.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action::{ActionSymbol, ActionValue};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::explain::mi::{MiAccumulator, MiReport};
use crate::explain::policy::{PolicyAccumulator, PolicyGraph};
use crate::explain::{influence_report, InfluenceReport};
use crate::kg::KpiKnowledgeGraph;
use crate::refine::{refine_action, RefinementDecision};
use crate::symbolizer::{categorize, detect_change, KpiSymbolizer, SymbolicState};
use crate::trace::TraceRecord;

fn perr(module: &'static str, t: i64, e: impl std::fmt::Display) -> Error {
    Error::Pipeline {
        module,
        t,
        reason: e.to_string(),
    }
}

/// What the previous record contributed: the joint symbolic state, the
/// executed action's symbol, and its raw value (needed to symbolize the
/// next action as a delta).
#[derive(Debug, Clone, PartialEq)]
pub struct PrevStep {
    pub joint: BTreeMap<String, SymbolicState>,
    pub action: ActionSymbol,
    pub raw_action: ActionValue,
}

/// Per-KPI slice of an explanation record, rendered for human readers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KpiExplanation {
    pub state: String,
    pub influence: f64,
    pub kl: f64,
    pub alignment: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_action: Option<String>,
    pub cold_start: bool,
}

/// Advisory refinement verdict embedded in an explanation record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementSummary {
    pub original: String,
    pub refined: String,
    pub overridden: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub triggering_kpi: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub r_best: Option<f64>,
    pub r_agent: f64,
}

/// One line of pipeline output: everything known about one decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationRecord {
    pub t: i64,
    /// Rendered symbol of the executed action.
    pub action: String,
    /// No KPI had any evidence, so influence scores are all zero.
    pub cold_start: bool,
    pub kpis: BTreeMap<String, KpiExplanation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub refinement: Option<RefinementSummary>,
}

impl ExplanationRecord {
    pub fn to_json_line(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }
}

/// End-of-run aggregates.
#[derive(Debug, Clone)]
pub struct FinalReport {
    pub timesteps: u64,
    pub mi: MiReport,
    pub policy: PolicyGraph,
    pub advisory_decisions: u64,
    pub advisory_overrides: u64,
}

impl FinalReport {
    /// Fraction of advisory consults that proposed an override, when any
    /// ran at all.
    pub fn refinement_rate(&self) -> Option<f64> {
        if self.advisory_decisions == 0 {
            None
        } else {
            Some(self.advisory_overrides as f64 / self.advisory_decisions as f64)
        }
    }
}

/// Streaming interpretability engine over one KPI/action configuration.
#[derive(Debug, Clone)]
pub struct Pipeline {
    config: PipelineConfig,
    symbolizers: BTreeMap<String, KpiSymbolizer>,
    graphs: BTreeMap<String, KpiKnowledgeGraph>,
    mi: MiAccumulator,
    policy: PolicyAccumulator,
    prev: Option<PrevStep>,
    last_t: Option<i64>,
    timesteps: u64,
    advisory_decisions: u64,
    advisory_overrides: u64,
    finished: bool,
}

impl Pipeline {
    pub fn new(mut config: PipelineConfig) -> Result<Self> {
        config.normalize();
        config.validate()?;
        let mut symbolizers = BTreeMap::new();
        let mut graphs = BTreeMap::new();
        for kpi in &config.kpis {
            symbolizers.insert(kpi.name.clone(), KpiSymbolizer::new(kpi.clone())?);
            graphs.insert(kpi.name.clone(), KpiKnowledgeGraph::new(&kpi.name));
        }
        let mi = MiAccumulator::new(config.mi_channels())?;
        Ok(Pipeline {
            config,
            symbolizers,
            graphs,
            mi,
            policy: PolicyAccumulator::new(),
            prev: None,
            last_t: None,
            timesteps: 0,
            advisory_decisions: 0,
            advisory_overrides: 0,
            finished: false,
        })
    }

    /// Rebuild a pipeline around previously captured state (snapshot
    /// restore). Global accumulators start fresh: they describe a run,
    /// not the stream's statistics, and are reported per run.
    pub(crate) fn from_parts(
        mut config: PipelineConfig,
        symbolizers: BTreeMap<String, KpiSymbolizer>,
        graphs: BTreeMap<String, KpiKnowledgeGraph>,
        prev: Option<PrevStep>,
        last_t: Option<i64>,
        timesteps: u64,
    ) -> Result<Self> {
        config.normalize();
        config.validate()?;
        for kpi in &config.kpis {
            if !symbolizers.contains_key(&kpi.name) {
                return Err(Error::Snapshot(format!(
                    "restored state is missing the symbolizer for {}",
                    kpi.name
                )));
            }
            if !graphs.contains_key(&kpi.name) {
                return Err(Error::Snapshot(format!(
                    "restored state is missing the knowledge graph for {}",
                    kpi.name
                )));
            }
        }
        if let Some(prev) = &prev {
            for kpi in &config.kpis {
                if !prev.joint.contains_key(&kpi.name) {
                    return Err(Error::Snapshot(format!(
                        "restored previous step is missing KPI {}",
                        kpi.name
                    )));
                }
            }
        }
        let mi = MiAccumulator::new(config.mi_channels())?;
        Ok(Pipeline {
            config,
            symbolizers,
            graphs,
            mi,
            policy: PolicyAccumulator::new(),
            prev,
            last_t,
            timesteps,
            advisory_decisions: 0,
            advisory_overrides: 0,
            finished: false,
        })
    }

    pub fn config(&self) -> &PipelineConfig {
        &self.config
    }

    pub fn symbolizers(&self) -> &BTreeMap<String, KpiSymbolizer> {
        &self.symbolizers
    }

    pub fn graphs(&self) -> &BTreeMap<String, KpiKnowledgeGraph> {
        &self.graphs
    }

    pub fn prev(&self) -> Option<&PrevStep> {
        self.prev.as_ref()
    }

    pub fn last_t(&self) -> Option<i64> {
        self.last_t
    }

    pub fn timesteps(&self) -> u64 {
        self.timesteps
    }

    /// Read-only refinement consult for a live caller that has observed
    /// this step's KPI values and forecasts but not yet committed an
    /// action. Produces exactly the decision that `process` will annotate
    /// if the same action is then executed.
    pub fn advise(
        &self,
        kpis: &BTreeMap<String, f64>,
        forecasts: &BTreeMap<String, Vec<f64>>,
        proposed: &ActionValue,
    ) -> Result<RefinementDecision> {
        let action = self
            .config
            .action_space
            .symbolize(self.prev.as_ref().map(|p| &p.raw_action), proposed)?;
        let mut current = BTreeMap::new();
        let mut future = BTreeMap::new();
        if self.config.refiner.enabled {
            for kpi in &self.config.refiner.kpi_order {
                let Some(sym) = self.symbolizers.get(kpi) else {
                    continue;
                };
                let Some(&v) = kpis.get(kpi) else {
                    continue;
                };
                let forecast = forecasts.get(kpi).map(|f| f.as_slice());
                // A cold slope or value history means this KPI cannot be
                // consulted yet; its graph is necessarily empty too.
                let Ok(trend) = sym.trend_readonly(forecast) else {
                    continue;
                };
                let Ok(s_cur) = sym.symbolize_readonly(v, sym.last_value(), trend) else {
                    continue;
                };
                current.insert(kpi.clone(), s_cur);
                if let Some(&y1) = forecast.and_then(|f| f.first()) {
                    if let Ok(s_fut) = sym.symbolize_readonly(y1, Some(v), trend) {
                        future.insert(kpi.clone(), s_fut);
                    }
                }
            }
        }
        Ok(refine_action(
            &self.graphs,
            &current,
            &future,
            &action,
            &self.config.refiner,
        ))
    }

    /// Ingest one record and explain its decision.
    pub fn process(&mut self, record: &TraceRecord) -> Result<ExplanationRecord> {
        if self.finished {
            return Err(perr("pipeline", record.t, "process called after finish"));
        }
        record
            .validate(&self.config)
            .map_err(|e| perr("pipeline", record.t, e))?;
        if let Some(last) = self.last_t {
            if record.t <= last {
                return Err(perr(
                    "pipeline",
                    record.t,
                    format!("timesteps must be strictly increasing (previous t={last})"),
                ));
            }
        }

        // Future categories rank forecast values against the sketches as
        // they stand *before* this record's sample lands, matching the
        // view a pre-commit `advise` call had.
        let mut future_category: BTreeMap<String, u8> = BTreeMap::new();
        if self.config.refiner.enabled {
            for kpi in &self.config.refiner.kpi_order {
                let (Some(sym), Some(forecast)) =
                    (self.symbolizers.get(kpi), record.forecasts.get(kpi))
                else {
                    continue;
                };
                let Some(&y1) = forecast.first() else {
                    continue;
                };
                if let Ok(rank) = sym.percentile_rank(y1) {
                    future_category.insert(
                        kpi.clone(),
                        categorize(rank, &sym.config().category_boundaries) as u8,
                    );
                }
            }
        }

        // Symbolize every declared KPI, updating its sketches.
        let mut joint = BTreeMap::new();
        for kpi in &self.config.kpis {
            let v = *record
                .kpis
                .get(&kpi.name)
                .expect("validated record covers every declared KPI");
            let forecast = record.forecasts.get(&kpi.name).map(|f| f.as_slice());
            let sym = self
                .symbolizers
                .get_mut(&kpi.name)
                .expect("every declared KPI has a symbolizer");
            let state = sym
                .observe(v, forecast)
                .map_err(|e| perr("symbolizer", record.t, e))?;
            joint.insert(kpi.name.clone(), state);
        }

        // Symbolize the executed action relative to the previous one.
        let action = self
            .config
            .action_space
            .symbolize(self.prev.as_ref().map(|p| &p.raw_action), &record.action)
            .map_err(|e| perr("action", record.t, e))?;

        // Local explanation against graphs that exclude this record.
        let influence = influence_report(&self.graphs, &joint, &action, &self.config.action_space)
            .map_err(|e| perr("explain", record.t, e))?;

        // Advisory refinement of the executed action.
        let refinement = if self.config.refiner.enabled {
            let mut future = BTreeMap::new();
            for kpi in &self.config.refiner.kpi_order {
                let (Some(&category), Some(forecast)) =
                    (future_category.get(kpi), record.forecasts.get(kpi))
                else {
                    continue;
                };
                let v_t = record.kpis[kpi];
                let theta = self
                    .config
                    .kpi(kpi)
                    .expect("refiner order names declared KPIs")
                    .theta;
                let predicate = detect_change(forecast[0], v_t, theta)
                    .map_err(|e| perr("refine", record.t, e))?;
                future.insert(
                    kpi.clone(),
                    SymbolicState {
                        predicate,
                        category,
                        trend: joint[kpi].trend,
                    },
                );
            }
            let decision =
                refine_action(&self.graphs, &joint, &future, &action, &self.config.refiner);
            self.advisory_decisions += 1;
            if decision.overridden {
                self.advisory_overrides += 1;
            }
            Some(decision)
        } else {
            None
        };

        // Global accumulators.
        self.mi.push(&joint, &action);
        self.policy.push(&action, record.reward);

        // This record's reward closes the previous transition.
        if let Some(prev) = &self.prev {
            for kpi in &self.config.kpis {
                let graph = self
                    .graphs
                    .get_mut(&kpi.name)
                    .expect("every declared KPI has a graph");
                graph
                    .update(
                        prev.joint[&kpi.name],
                        prev.action.clone(),
                        joint[&kpi.name],
                        record.reward,
                    )
                    .map_err(|e| perr("kg", record.t, e))?;
            }
        }

        let out = self.render_record(record.t, &action, influence, refinement);
        self.prev = Some(PrevStep {
            joint,
            action,
            raw_action: record.action.clone(),
        });
        self.last_t = Some(record.t);
        self.timesteps += 1;
        Ok(out)
    }

    fn render_record(
        &self,
        t: i64,
        action: &ActionSymbol,
        influence: InfluenceReport,
        refinement: Option<RefinementDecision>,
    ) -> ExplanationRecord {
        let space = &self.config.action_space;
        let kpis = influence
            .per_kpi
            .iter()
            .map(|(name, inf)| {
                let kpi_config = self
                    .config
                    .kpi(name)
                    .expect("influence covers declared KPIs");
                (
                    name.clone(),
                    KpiExplanation {
                        state: inf.state.render(kpi_config),
                        influence: inf.influence,
                        kl: inf.kl,
                        alignment: inf.alignment,
                        best_action: inf.best_action.as_ref().map(|a| space.render(a)),
                        cold_start: inf.cold_start,
                    },
                )
            })
            .collect();
        ExplanationRecord {
            t,
            action: space.render(action),
            cold_start: influence.cold_start,
            kpis,
            refinement: refinement.map(|d| RefinementSummary {
                original: space.render(&d.original),
                refined: space.render(&d.refined),
                overridden: d.overridden,
                triggering_kpi: d.triggering_kpi,
                r_best: d.r_best,
                r_agent: d.r_agent,
            }),
        }
    }

    /// Seal the run: the last observed joint state receives its terminal
    /// visit, and the global reports are built. `process` is rejected
    /// afterwards, as is a second `finish`.
    pub fn finish(&mut self) -> Result<FinalReport> {
        if self.finished {
            return Err(perr(
                "pipeline",
                self.last_t.unwrap_or(0),
                "finish called twice",
            ));
        }
        self.finished = true;
        if let Some(prev) = &self.prev {
            for (kpi, state) in &prev.joint {
                if let Some(graph) = self.graphs.get_mut(kpi) {
                    graph.observe_terminal(*state);
                }
            }
        }
        Ok(FinalReport {
            timesteps: self.timesteps,
            mi: self.mi.report(),
            policy: self.policy.build(&self.config.action_space),
            advisory_decisions: self.advisory_decisions,
            advisory_overrides: self.advisory_overrides,
        })
    }
}
