//! Per-component latency measurement over a seeded synthetic stream.
//!
//! Drives each stage of the pipeline directly — symbolization, knowledge
//! graph upkeep, influence scoring, action refinement — so every sample
//! attributes cleanly to one component, and sizes are parameterized so
//! scaling in the KPI count can be measured. Timings come from
//! `Instant`; one sample covers *all* KPIs for one decision step, which
//! is the unit a caller budgets for.

use std::collections::BTreeMap;
use std::time::Instant;

use rand::prelude::*;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::action::{ActionSpace, ActionValue};
use crate::error::{Error, Result};
use crate::explain::influence_report;
use crate::explain::mi::{MiAccumulator, MiChannelSpec};
use crate::explain::policy::PolicyAccumulator;
use crate::kg::KpiKnowledgeGraph;
use crate::refine::{refine_action, RefinerConfig};
use crate::symbolizer::{KpiConfig, KpiSymbolizer, SymbolicState};

/// How many times the global-report build is sampled across the stream.
const GLOBAL_CHECKPOINTS: usize = 5;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchConfig {
    pub kpi_count: usize,
    pub action_count: usize,
    pub steps: usize,
    pub seed: u64,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            kpi_count: 12,
            action_count: 6,
            steps: 2000,
            seed: 17,
        }
    }
}

impl BenchConfig {
    fn validate(&self) -> Result<()> {
        if self.kpi_count == 0 {
            return Err(Error::Config("kpi_count must be at least 1".into()));
        }
        if self.action_count < 2 {
            return Err(Error::Config("action_count must be at least 2".into()));
        }
        if self.steps < 10 {
            return Err(Error::Config("steps must be at least 10".into()));
        }
        Ok(())
    }
}

/// Latency summary for one component, in milliseconds per decision step.
#[derive(Debug, Clone, Serialize)]
pub struct ComponentTiming {
    pub component: String,
    pub mean_ms: f64,
    pub std_ms: f64,
    pub samples: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct BenchReport {
    pub kpi_count: usize,
    pub action_count: usize,
    pub steps: usize,
    pub timings: Vec<ComponentTiming>,
}

impl BenchReport {
    pub fn component(&self, name: &str) -> Option<&ComponentTiming> {
        self.timings.iter().find(|t| t.component == name)
    }

    /// Mean per-decision latency: the sum of every per-step component
    /// (everything except the on-demand global-report build).
    pub fn per_decision_ms(&self) -> f64 {
        self.timings
            .iter()
            .filter(|t| t.component != "global_explanation")
            .map(|t| t.mean_ms)
            .sum()
    }

    /// Fixed-width table, one row per component.
    pub fn to_text(&self) -> String {
        let mut out = format!(
            "{} KPIs, {} actions, {} steps\n{:<20} {:>12} {:>12} {:>9}\n",
            self.kpi_count,
            self.action_count,
            self.steps,
            "component",
            "mean_ms",
            "std_ms",
            "samples"
        );
        for t in &self.timings {
            out.push_str(&format!(
                "{:<20} {:>12.4} {:>12.4} {:>9}\n",
                t.component, t.mean_ms, t.std_ms, t.samples
            ));
        }
        out.push_str(&format!(
            "{:<20} {:>12.4}\n",
            "per-decision total",
            self.per_decision_ms()
        ));
        out
    }
}

fn mean_std(samples: &[f64]) -> (f64, f64) {
    if samples.is_empty() {
        return (0.0, 0.0);
    }
    let n = samples.len() as f64;
    let mean = samples.iter().sum::<f64>() / n;
    let var = samples.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
    (mean, var.sqrt())
}

fn timing(component: &str, samples: &[f64]) -> ComponentTiming {
    let (mean_ms, std_ms) = mean_std(samples);
    ComponentTiming {
        component: component.into(),
        mean_ms,
        std_ms,
        samples: samples.len(),
    }
}

/// Run the measurement loop and summarize per-component latencies.
///
/// Components: `symbolizer` (all KPI observations plus the action
/// symbol), `kg_update` (graph updates plus the constant-time global
/// accumulator pushes), `influence`, `refinement` (future-state
/// projection plus the consult), and `global_explanation` (building the
/// mutual-information and policy reports on demand, sampled at
/// checkpoints as the tables grow).
pub fn run_bench(config: &BenchConfig) -> Result<BenchReport> {
    config.validate()?;
    let horizon = 3usize;

    let kpi_names: Vec<String> = (0..config.kpi_count).map(|i| format!("k{i:02}")).collect();
    let mut symbolizers: Vec<KpiSymbolizer> = kpi_names
        .iter()
        .map(|n| KpiSymbolizer::new(KpiConfig::named(n).with_forecast()))
        .collect::<Result<_>>()?;
    let mut graphs: BTreeMap<String, KpiKnowledgeGraph> = kpi_names
        .iter()
        .map(|n| (n.clone(), KpiKnowledgeGraph::new(n)))
        .collect();
    let ladder: Vec<f64> = (1..=config.action_count)
        .map(|i| i as f64 * 100.0)
        .collect();
    let space = ActionSpace::Ordered {
        name: "act".into(),
        values: ladder.clone(),
        sigma: 1.0,
    };
    let refiner = RefinerConfig {
        tau: 0.05,
        kpi_order: kpi_names.clone(),
        enabled: true,
    };
    let mut mi = MiAccumulator::new(
        kpi_names
            .iter()
            .map(|n| MiChannelSpec {
                kpi: n.clone(),
                offset: 0,
            })
            .collect(),
    )?;
    let mut policy = PolicyAccumulator::new();

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut values = vec![50.0f64; config.kpi_count];
    let mut prev_joint: Option<BTreeMap<String, SymbolicState>> = None;
    let mut prev_action: Option<crate::action::ActionSymbol> = None;
    let mut prev_raw: Option<ActionValue> = None;

    let mut symbolizer_ms = Vec::with_capacity(config.steps);
    let mut kg_ms = Vec::with_capacity(config.steps);
    let mut influence_ms = Vec::with_capacity(config.steps);
    let mut refinement_ms = Vec::with_capacity(config.steps);
    let mut global_ms = Vec::with_capacity(GLOBAL_CHECKPOINTS);
    let checkpoint = (config.steps / GLOBAL_CHECKPOINTS).max(1);

    for t in 0..config.steps {
        // Untimed stream generation.
        for v in values.iter_mut() {
            *v += rng.gen_range(-3.0..=3.0);
        }
        let forecasts: Vec<Vec<f64>> = values
            .iter()
            .map(|v| {
                let mut f = Vec::with_capacity(horizon);
                let mut x = *v;
                for _ in 0..horizon {
                    x += rng.gen_range(-3.0..=3.0);
                    f.push(x);
                }
                f
            })
            .collect();
        let raw = ActionValue::Number(ladder[rng.gen_range(0..ladder.len())]);
        let reward = rng.gen_range(-1.0..=1.0);

        // Symbolization: every KPI observation plus the action symbol.
        let started = Instant::now();
        let mut joint = BTreeMap::new();
        for (i, sym) in symbolizers.iter_mut().enumerate() {
            let state = sym.observe(values[i], Some(&forecasts[i]))?;
            joint.insert(kpi_names[i].clone(), state);
        }
        let action = space.symbolize(prev_raw.as_ref(), &raw)?;
        symbolizer_ms.push(started.elapsed().as_secs_f64() * 1e3);

        // Influence scoring against the graphs as they stand.
        let started = Instant::now();
        let _ = influence_report(&graphs, &joint, &action, &space)?;
        influence_ms.push(started.elapsed().as_secs_f64() * 1e3);

        // Refinement: project each KPI one step ahead, then consult.
        let started = Instant::now();
        let mut future = BTreeMap::new();
        for (i, sym) in symbolizers.iter().enumerate() {
            let trend = sym.trend_readonly(Some(&forecasts[i]))?;
            let state = sym.symbolize_readonly(forecasts[i][0], Some(values[i]), trend)?;
            future.insert(kpi_names[i].clone(), state);
        }
        let _ = refine_action(&graphs, &joint, &future, &action, &refiner);
        refinement_ms.push(started.elapsed().as_secs_f64() * 1e3);

        // Knowledge-graph upkeep plus the global accumulator pushes.
        let started = Instant::now();
        if let (Some(prev), Some(pa)) = (&prev_joint, &prev_action) {
            for (kpi, graph) in graphs.iter_mut() {
                graph.update(prev[kpi], pa.clone(), joint[kpi], reward)?;
            }
        }
        mi.push(&joint, &action);
        policy.push(&action, reward);
        kg_ms.push(started.elapsed().as_secs_f64() * 1e3);

        if (t + 1) % checkpoint == 0 && global_ms.len() < GLOBAL_CHECKPOINTS {
            let started = Instant::now();
            let report = mi.report();
            let graph = policy.build(&space);
            global_ms.push(started.elapsed().as_secs_f64() * 1e3);
            // Keep the optimizer from discarding the builds.
            debug_assert!(report.channels.len() + graph.nodes.len() > 0);
        }

        prev_joint = Some(joint);
        prev_action = Some(action);
        prev_raw = Some(raw);
    }

    Ok(BenchReport {
        kpi_count: config.kpi_count,
        action_count: config.action_count,
        steps: config.steps,
        timings: vec![
            timing("symbolizer", &symbolizer_ms),
            timing("kg_update", &kg_ms),
            timing("influence", &influence_ms),
            timing("refinement", &refinement_ms),
            timing("global_explanation", &global_ms),
        ],
    })
}
