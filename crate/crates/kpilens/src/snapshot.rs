//! Durable snapshots of pipeline state.
//!
//! A snapshot directory holds one JSON document per KPI — its percentile
//! sketches, last raw value, and knowledge graph — plus `pipeline.json`
//! with the cross-KPI tail state (last timestep, the previous step's
//! joint state and action). States are stored in their rendered label
//! form so the files read naturally; every document embeds the SHA-256
//! fingerprint of the configuration's state-shaping fields, and loading
//! under a configuration with a different fingerprint is refused.
//!
//! Snapshots deliberately exclude the global report accumulators
//! (mutual information, policy bigrams): those are per-run reports. A
//! run resumed from a snapshot reproduces the per-record explanation
//! stream of the uninterrupted run exactly.

use std::collections::BTreeMap;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::action::{ActionSymbol, ActionValue};
use crate::config::PipelineConfig;
use crate::error::{Error, Result};
use crate::kg::{EdgeStats, KpiKnowledgeGraph};
use crate::pipeline::{Pipeline, PrevStep};
use crate::sketch::QuantileSketch;
use crate::symbolizer::{KpiSymbolizer, SymbolicState};

/// File carrying the cross-KPI state; the per-KPI files are named
/// `kpi.<name>.json`.
pub const PIPELINE_FILE: &str = "pipeline.json";

fn kpi_file(name: &str) -> String {
    format!("kpi.{name}.json")
}

#[derive(Serialize, Deserialize)]
struct PipelineDoc {
    fingerprint: String,
    last_t: Option<i64>,
    timesteps: u64,
    prev: Option<PrevDoc>,
}

#[derive(Serialize, Deserialize)]
struct PrevDoc {
    joint: BTreeMap<String, String>,
    action: ActionSymbol,
    raw_action: ActionValue,
}

#[derive(Serialize, Deserialize)]
struct KpiDoc {
    fingerprint: String,
    kpi: String,
    value_sketches: Vec<QuantileSketch>,
    slope_sketches: Vec<QuantileSketch>,
    last_value: Option<f64>,
    observations: u64,
    graph: GraphDoc,
}

#[derive(Serialize, Deserialize)]
struct GraphDoc {
    nodes: Vec<NodeDoc>,
    edges: Vec<EdgeDoc>,
}

#[derive(Serialize, Deserialize)]
struct NodeDoc {
    state: String,
    visits: u64,
}

#[derive(Serialize, Deserialize)]
struct EdgeDoc {
    from: String,
    action: ActionSymbol,
    to: String,
    count: u64,
    reward_sum: f64,
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    std::fs::write(path, text)?;
    Ok(())
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Snapshot(format!("cannot read {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| Error::Snapshot(format!("cannot parse {}: {e}", path.display())))
}

fn check_fingerprint(found: &str, expected: &str, file: &str) -> Result<()> {
    if found != expected {
        return Err(Error::Snapshot(format!(
            "{file} was written under a different configuration \
             (fingerprint {found}, expected {expected})"
        )));
    }
    Ok(())
}

/// Write the pipeline's full resumable state into `dir` (created if
/// needed). Call before `finish`: a sealed run's terminal visit belongs
/// to the run that ends there, not to the resumed one.
pub fn save_snapshot(pipeline: &Pipeline, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let config = pipeline.config();
    let fingerprint = config.fingerprint();
    for kpi in &config.kpis {
        let sym = &pipeline.symbolizers()[&kpi.name];
        let graph = &pipeline.graphs()[&kpi.name];
        let doc = KpiDoc {
            fingerprint: fingerprint.clone(),
            kpi: kpi.name.clone(),
            value_sketches: sym.value_sketches().to_vec(),
            slope_sketches: sym.slope_sketches().to_vec(),
            last_value: sym.last_value(),
            observations: sym.observations(),
            graph: GraphDoc {
                nodes: graph
                    .nodes()
                    .iter()
                    .map(|(state, visits)| NodeDoc {
                        state: state.render(kpi),
                        visits: *visits,
                    })
                    .collect(),
                edges: graph
                    .edges()
                    .map(|(from, action, to, stats)| EdgeDoc {
                        from: from.render(kpi),
                        action: action.clone(),
                        to: to.render(kpi),
                        count: stats.count,
                        reward_sum: stats.reward_sum,
                    })
                    .collect(),
            },
        };
        write_json(&dir.join(kpi_file(&kpi.name)), &doc)?;
    }
    let doc = PipelineDoc {
        fingerprint,
        last_t: pipeline.last_t(),
        timesteps: pipeline.timesteps(),
        prev: pipeline.prev().map(|p| PrevDoc {
            joint: p
                .joint
                .iter()
                .map(|(name, state)| {
                    let kpi = config
                        .kpi(name)
                        .expect("previous step covers declared KPIs");
                    (name.clone(), state.render(kpi))
                })
                .collect(),
            action: p.action.clone(),
            raw_action: p.raw_action.clone(),
        }),
    };
    write_json(&dir.join(PIPELINE_FILE), &doc)
}

/// Rebuild a pipeline from `dir` under `config`. Every document is
/// fingerprint-checked and re-validated; a tampered or foreign snapshot
/// is refused rather than trusted.
pub fn load_snapshot(mut config: PipelineConfig, dir: &Path) -> Result<Pipeline> {
    config.normalize();
    config.validate()?;
    let fingerprint = config.fingerprint();

    let pipeline_doc: PipelineDoc = read_json(&dir.join(PIPELINE_FILE))?;
    check_fingerprint(&pipeline_doc.fingerprint, &fingerprint, PIPELINE_FILE)?;

    let mut symbolizers = BTreeMap::new();
    let mut graphs = BTreeMap::new();
    for kpi in &config.kpis {
        let file = kpi_file(&kpi.name);
        let doc: KpiDoc = read_json(&dir.join(&file))?;
        check_fingerprint(&doc.fingerprint, &fingerprint, &file)?;
        if doc.kpi != kpi.name {
            return Err(Error::Snapshot(format!(
                "{file} describes KPI {}, expected {}",
                doc.kpi, kpi.name
            )));
        }
        let sym = KpiSymbolizer::from_parts(
            kpi.clone(),
            doc.value_sketches,
            doc.slope_sketches,
            doc.last_value,
            doc.observations,
        )?;
        let nodes = doc
            .graph
            .nodes
            .iter()
            .map(|n| Ok((SymbolicState::parse_rendered(&n.state, kpi)?, n.visits)))
            .collect::<Result<BTreeMap<_, _>>>()?;
        let edges = doc
            .graph
            .edges
            .iter()
            .map(|e| {
                Ok((
                    SymbolicState::parse_rendered(&e.from, kpi)?,
                    e.action.clone(),
                    SymbolicState::parse_rendered(&e.to, kpi)?,
                    EdgeStats {
                        count: e.count,
                        reward_sum: e.reward_sum,
                    },
                ))
            })
            .collect::<Result<Vec<_>>>()?;
        graphs.insert(
            kpi.name.clone(),
            KpiKnowledgeGraph::from_parts(&kpi.name, nodes, edges)?,
        );
        symbolizers.insert(kpi.name.clone(), sym);
    }

    let prev = match pipeline_doc.prev {
        None => None,
        Some(p) => {
            let mut joint = BTreeMap::new();
            for (name, rendered) in &p.joint {
                let kpi = config.kpi(name).ok_or_else(|| {
                    Error::Snapshot(format!("previous step names unknown KPI {name}"))
                })?;
                joint.insert(name.clone(), SymbolicState::parse_rendered(rendered, kpi)?);
            }
            Some(PrevStep {
                joint,
                action: p.action,
                raw_action: p.raw_action,
            })
        }
    };

    Pipeline::from_parts(
        config,
        symbolizers,
        graphs,
        prev,
        pipeline_doc.last_t,
        pipeline_doc.timesteps,
    )
}
