//! Local explanations: which KPI drove a decision?
//!
//! For the action `a_t` taken in joint symbolic state `{s_k}`, each KPI k
//! is scored as
//!
//! ```text
//! IS_k = D_KL( P_k(. | s_k) || P_0 ) * delta(a_t, a_k*)
//! ```
//!
//! where `P_k` is the empirical action distribution conditioned on the
//! KPI's current state (from its knowledge graph), `P_0` is the baseline —
//! the average of the non-empty conditionals, renormalized over their
//! union support — `a_k*` is the most likely action under `P_k`, and
//! `delta` is the action-space alignment weight (exact match for
//! categorical spaces, Gaussian index-distance decay for ordered ones).
//!
//! A KPI whose graph holds no evidence for the current state scores 0 and
//! is flagged as cold rather than guessed at.

pub mod mi;
pub mod policy;

use std::collections::{BTreeMap, BTreeSet};

use crate::action::{ActionSpace, ActionSymbol};
use crate::error::Result;
use crate::kg::KpiKnowledgeGraph;
use crate::symbolizer::SymbolicState;

/// Smoothing mass added to every cell of both distributions (over their
/// union support) before computing KL, so that zero cells stay defined.
pub const KL_EPSILON: f64 = 1e-9;

/// Kullback-Leibler divergence D(p || q) in nats, with epsilon smoothing
/// over the union support followed by renormalization. Inputs are
/// non-negative weights (typically already normalized); the result is
/// clamped at 0 to absorb float round-off on identical inputs.
pub fn kl_divergence(p: &BTreeMap<ActionSymbol, f64>, q: &BTreeMap<ActionSymbol, f64>) -> f64 {
    let support: BTreeSet<&ActionSymbol> = p.keys().chain(q.keys()).collect();
    if support.is_empty() {
        return 0.0;
    }
    let cells = support.len() as f64;
    let p_total: f64 = p.values().sum::<f64>() + KL_EPSILON * cells;
    let q_total: f64 = q.values().sum::<f64>() + KL_EPSILON * cells;
    let mut kl = 0.0;
    for a in support {
        let pa = (p.get(a).copied().unwrap_or(0.0) + KL_EPSILON) / p_total;
        let qa = (q.get(a).copied().unwrap_or(0.0) + KL_EPSILON) / q_total;
        kl += pa * (pa / qa).ln();
    }
    kl.max(0.0)
}

/// Baseline action distribution: the average of the conditionals
/// P_k(. | s_k) over KPIs whose graphs hold evidence for their current
/// state, renormalized over the union support. `None` when every KPI is
/// cold (callers emit a null explanation).
pub fn baseline_distribution(
    graphs: &BTreeMap<String, KpiKnowledgeGraph>,
    joint: &BTreeMap<String, SymbolicState>,
) -> Option<BTreeMap<ActionSymbol, f64>> {
    let mut sum: BTreeMap<ActionSymbol, f64> = BTreeMap::new();
    let mut informative = 0usize;
    for (kpi, state) in joint {
        let Some(graph) = graphs.get(kpi) else {
            continue;
        };
        let dist = graph.action_distribution(state);
        if dist.is_empty() {
            continue;
        }
        informative += 1;
        for (a, p) in dist {
            *sum.entry(a).or_insert(0.0) += p;
        }
    }
    if informative == 0 {
        return None;
    }
    let total: f64 = sum.values().sum();
    for p in sum.values_mut() {
        *p /= total;
    }
    Some(sum)
}

/// Most likely action under a conditional distribution; ties resolve to
/// the first action in the declared order.
pub fn most_likely_action(dist: &BTreeMap<ActionSymbol, f64>) -> Option<&ActionSymbol> {
    let mut best: Option<(&ActionSymbol, f64)> = None;
    for (a, p) in dist {
        match best {
            Some((_, bp)) if *p <= bp => {}
            _ => best = Some((a, *p)),
        }
    }
    best.map(|(a, _)| a)
}

/// Influence of one KPI on the action `a_t`, plus its audit components.
#[derive(Debug, Clone, PartialEq)]
pub struct KpiInfluence {
    pub state: SymbolicState,
    /// KL(P_k || baseline) * alignment; always >= 0.
    pub influence: f64,
    pub kl: f64,
    pub alignment: f64,
    /// Most likely action under P_k; `None` when the KPI is cold.
    pub best_action: Option<ActionSymbol>,
    /// The graph held no evidence for this KPI's current state.
    pub cold_start: bool,
}

/// Per-KPI influence scores for one decision.
#[derive(Debug, Clone, PartialEq)]
pub struct InfluenceReport {
    pub per_kpi: BTreeMap<String, KpiInfluence>,
    /// No KPI had evidence at all, so no baseline could be formed.
    pub cold_start: bool,
}

/// Score every KPI's influence on the executed action.
pub fn influence_report(
    graphs: &BTreeMap<String, KpiKnowledgeGraph>,
    joint: &BTreeMap<String, SymbolicState>,
    action: &ActionSymbol,
    space: &ActionSpace,
) -> Result<InfluenceReport> {
    let baseline = baseline_distribution(graphs, joint);
    let mut per_kpi = BTreeMap::new();
    for (kpi, state) in joint {
        let dist = graphs
            .get(kpi)
            .map(|g| g.action_distribution(state))
            .unwrap_or_default();
        let entry = match (&baseline, dist.is_empty()) {
            (Some(baseline), false) => {
                let kl = kl_divergence(&dist, baseline);
                let best = most_likely_action(&dist).cloned();
                let alignment = match &best {
                    Some(b) => space.alignment(action, b)?,
                    None => 0.0,
                };
                KpiInfluence {
                    state: *state,
                    influence: kl * alignment,
                    kl,
                    alignment,
                    best_action: best,
                    cold_start: false,
                }
            }
            _ => KpiInfluence {
                state: *state,
                influence: 0.0,
                kl: 0.0,
                alignment: 0.0,
                best_action: None,
                cold_start: true,
            },
        };
        per_kpi.insert(kpi.clone(), entry);
    }
    Ok(InfluenceReport {
        per_kpi,
        cold_start: baseline.is_none(),
    })
}
