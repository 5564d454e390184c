//! Per-KPI knowledge graphs.
//!
//! Each KPI gets its own graph whose nodes are the symbolic states the KPI
//! has visited and whose edges are observed transitions
//!
//! ```text
//! (state_prev) --action, count, reward_sum--> (state_curr)
//! ```
//!
//! Because the symbolizer emits at most a few dozen distinct states per
//! KPI and action spaces are declared up front, the maps stay small and
//! every update or query is effectively constant-time. Rewards are global
//! (one scalar per timestep) and are attributed to the corresponding edge
//! in every KPI's graph.
//!
//! All iteration is over `BTreeMap`s, so argmax scans resolve ties toward
//! the smallest key in the declared action order and every export is
//! deterministic.

use std::collections::BTreeMap;

use crate::action::ActionSymbol;
use crate::error::{Error, Result};
use crate::symbolizer::SymbolicState;

/// Count and accumulated reward for one (state, action, state) edge.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EdgeStats {
    pub count: u64,
    pub reward_sum: f64,
}

impl EdgeStats {
    pub fn mean_reward(&self) -> f64 {
        self.reward_sum / self.count as f64
    }
}

/// Knowledge graph of one KPI's symbolic transitions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct KpiKnowledgeGraph {
    kpi: String,
    /// Visit counts per state. A state is visited when a transition leaves
    /// it, or via [`KpiKnowledgeGraph::observe_terminal`] at end of stream.
    nodes: BTreeMap<SymbolicState, u64>,
    /// Outgoing edges per source state.
    edges: BTreeMap<SymbolicState, BTreeMap<(ActionSymbol, SymbolicState), EdgeStats>>,
}

impl KpiKnowledgeGraph {
    pub fn new(kpi: &str) -> Self {
        KpiKnowledgeGraph {
            kpi: kpi.into(),
            ..Default::default()
        }
    }

    /// Rebuild a graph from snapshot parts, re-checking the data.
    pub fn from_parts(
        kpi: &str,
        nodes: BTreeMap<SymbolicState, u64>,
        edge_list: Vec<(SymbolicState, ActionSymbol, SymbolicState, EdgeStats)>,
    ) -> Result<Self> {
        let mut g = KpiKnowledgeGraph::new(kpi);
        g.nodes = nodes;
        for (src, action, dst, stats) in edge_list {
            if stats.count == 0 {
                return Err(Error::Snapshot(format!(
                    "KPI `{kpi}`: edge with zero count"
                )));
            }
            if !stats.reward_sum.is_finite() {
                return Err(Error::Snapshot(format!(
                    "KPI `{kpi}`: edge with non-finite reward sum"
                )));
            }
            if g.edges
                .entry(src)
                .or_default()
                .insert((action, dst), stats)
                .is_some()
            {
                return Err(Error::Snapshot(format!("KPI `{kpi}`: duplicate edge")));
            }
        }
        Ok(g)
    }

    pub fn kpi(&self) -> &str {
        &self.kpi
    }

    /// Record one observed transition with the (global) reward earned on it.
    pub fn update(
        &mut self,
        s_prev: SymbolicState,
        action: ActionSymbol,
        s_curr: SymbolicState,
        reward: f64,
    ) -> Result<()> {
        if !reward.is_finite() {
            return Err(Error::Validation(format!(
                "KPI `{}`: non-finite reward {reward}",
                self.kpi
            )));
        }
        *self.nodes.entry(s_prev).or_insert(0) += 1;
        self.nodes.entry(s_curr).or_insert(0);
        let stats = self
            .edges
            .entry(s_prev)
            .or_default()
            .entry((action, s_curr))
            .or_insert(EdgeStats {
                count: 0,
                reward_sum: 0.0,
            });
        stats.count += 1;
        stats.reward_sum += reward;
        Ok(())
    }

    /// Count a visit to a state that has no successor (end of stream).
    pub fn observe_terminal(&mut self, s: SymbolicState) {
        *self.nodes.entry(s).or_insert(0) += 1;
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn nodes(&self) -> &BTreeMap<SymbolicState, u64> {
        &self.nodes
    }

    /// All edges in deterministic (source, action, destination) order.
    pub fn edges(
        &self,
    ) -> impl Iterator<Item = (&SymbolicState, &ActionSymbol, &SymbolicState, &EdgeStats)> {
        self.edges.iter().flat_map(|(src, inner)| {
            inner
                .iter()
                .map(move |((action, dst), stats)| (src, action, dst, stats))
        })
    }

    pub fn edge_count(&self) -> usize {
        self.edges.values().map(|m| m.len()).sum()
    }

    /// Total outgoing transition count from a state.
    pub fn outgoing_count(&self, s: &SymbolicState) -> u64 {
        self.edges
            .get(s)
            .map(|m| m.values().map(|e| e.count).sum())
            .unwrap_or(0)
    }

    /// Empirical action distribution conditioned on a state:
    /// P(a | s) = count(s, a, *) / count(s, *, *). Returns an empty map
    /// for states with no outgoing edges; callers decide how to degrade.
    pub fn action_distribution(&self, s: &SymbolicState) -> BTreeMap<ActionSymbol, f64> {
        let mut dist = BTreeMap::new();
        let Some(inner) = self.edges.get(s) else {
            return dist;
        };
        let total: u64 = inner.values().map(|e| e.count).sum();
        if total == 0 {
            return dist;
        }
        for ((action, _), stats) in inner {
            *dist.entry(action.clone()).or_insert(0.0) += stats.count as f64;
        }
        for p in dist.values_mut() {
            *p /= total as f64;
        }
        dist
    }

    /// Count-weighted mean reward of taking `action` in `s`, marginalized
    /// over destinations; `None` if the pair was never observed.
    pub fn mean_reward(&self, s: &SymbolicState, action: &ActionSymbol) -> Option<f64> {
        let inner = self.edges.get(s)?;
        let mut count = 0u64;
        let mut sum = 0.0;
        for ((a, _), stats) in inner {
            if a == action {
                count += stats.count;
                sum += stats.reward_sum;
            }
        }
        if count == 0 {
            None
        } else {
            Some(sum / count as f64)
        }
    }

    /// Among observed edges s --a--> s_next, the action with the highest
    /// per-edge mean reward and that mean. Ties resolve to the first
    /// action in the declared order.
    pub fn best_action_for_transition(
        &self,
        s: &SymbolicState,
        s_next: &SymbolicState,
    ) -> Option<(ActionSymbol, f64)> {
        let inner = self.edges.get(s)?;
        let mut best: Option<(&ActionSymbol, f64)> = None;
        for ((action, dst), stats) in inner {
            if dst != s_next {
                continue;
            }
            let mean = stats.mean_reward();
            match best {
                Some((_, m)) if mean <= m => {}
                _ => best = Some((action, mean)),
            }
        }
        best.map(|(a, m)| (a.clone(), m))
    }
}
