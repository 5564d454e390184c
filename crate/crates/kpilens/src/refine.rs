//! Forecast-aware action refinement.
//!
//! Before an action executes, each forecast-bearing KPI is consulted in a
//! configured priority order: symbolize the KPI's predicted next state,
//! look up the best historical action for the transition
//! `s_current -> s_future` in that KPI's knowledge graph, and compare its
//! mean reward against the agent's own choice. The first KPI whose best
//! action beats the agent's by more than the margin `tau` overrides the
//! action; a KPI whose best action IS the agent's ends the consult with
//! no change. Otherwise the original stands. `tau = +inf` (or disabling
//! the refiner) makes refinement the identity.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::action::ActionSymbol;
use crate::error::{Error, Result};
use crate::kg::KpiKnowledgeGraph;
use crate::symbolizer::SymbolicState;

/// Refinement settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RefinerConfig {
    /// Minimum mean-reward advantage (absolute units) an alternative must
    /// show before it replaces the agent's action.
    #[serde(default)]
    pub tau: f64,
    /// Forecast-bearing KPIs to consult, highest priority first. Left
    /// empty, the pipeline fills it with every forecast KPI in declared
    /// order.
    #[serde(default)]
    pub kpi_order: Vec<String>,
    #[serde(default = "default_enabled")]
    pub enabled: bool,
}

fn default_enabled() -> bool {
    true
}

impl Default for RefinerConfig {
    fn default() -> Self {
        Self {
            tau: 0.0,
            kpi_order: Vec::new(),
            enabled: true,
        }
    }
}

impl RefinerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau.is_nan() {
            return Err(Error::Config("refiner tau must not be NaN".into()));
        }
        Ok(())
    }
}

/// Outcome of one refinement check, kept for audit whether or not the
/// action changed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RefinementDecision {
    pub original: ActionSymbol,
    pub refined: ActionSymbol,
    pub overridden: bool,
    /// KPI whose lookup produced the override, if any.
    pub triggering_kpi: Option<String>,
    /// Mean reward of the winning alternative (override only).
    pub r_best: Option<f64>,
    /// Mean reward of the agent's action in the triggering KPI's current
    /// state; 0.0 when no override fired or the action was unseen there.
    pub r_agent: f64,
}

impl RefinementDecision {
    fn identity(action: &ActionSymbol) -> Self {
        Self {
            original: action.clone(),
            refined: action.clone(),
            overridden: false,
            triggering_kpi: None,
            r_best: None,
            r_agent: 0.0,
        }
    }
}

/// Consult the knowledge graphs and decide whether to override `action`.
///
/// `current` and `future` map KPI names to their present and predicted
/// next symbolic states; KPIs missing from either map, or missing a
/// graph, are skipped. The first KPI in `config.kpi_order` whose best
/// transition action strictly beats the agent's mean reward by more than
/// `tau` wins.
pub fn refine_action(
    graphs: &BTreeMap<String, KpiKnowledgeGraph>,
    current: &BTreeMap<String, SymbolicState>,
    future: &BTreeMap<String, SymbolicState>,
    action: &ActionSymbol,
    config: &RefinerConfig,
) -> RefinementDecision {
    if !config.enabled {
        return RefinementDecision::identity(action);
    }
    for kpi in &config.kpi_order {
        let (Some(graph), Some(s_cur), Some(s_fut)) =
            (graphs.get(kpi), current.get(kpi), future.get(kpi))
        else {
            continue;
        };
        let Some((a_best, r_best)) = graph.best_action_for_transition(s_cur, s_fut) else {
            continue;
        };
        // The highest-priority KPI with an opinion endorses the agent's
        // own action: stop consulting, nothing to change.
        if a_best == *action {
            break;
        }
        let r_agent = graph.mean_reward(s_cur, action).unwrap_or(0.0);
        if r_best > r_agent + config.tau {
            return RefinementDecision {
                original: action.clone(),
                refined: a_best,
                overridden: true,
                triggering_kpi: Some(kpi.clone()),
                r_best: Some(r_best),
                r_agent,
            };
        }
    }
    RefinementDecision::identity(action)
}

/// Fraction of decisions that overrode the agent.
pub fn refinement_rate(decisions: &[RefinementDecision]) -> Result<f64> {
    if decisions.is_empty() {
        return Err(Error::Validation(
            "refinement rate is undefined over an empty history".into(),
        ));
    }
    let overridden = decisions.iter().filter(|d| d.overridden).count();
    Ok(overridden as f64 / decisions.len() as f64)
}
