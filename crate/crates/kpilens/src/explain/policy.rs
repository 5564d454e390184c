//! Policy graphs: a global, action-level view of agent behaviour.
//!
//! Nodes are the symbolic actions the agent has taken, weighted by
//! occupancy (fraction of timesteps). Edges are consecutive bigrams
//! `a_t -> a_{t+1}`, labelled with the row-normalized transition
//! probability and the mean reward observed on the destination step.
//! The DOT export is fully deterministic so repeated runs over the same
//! history are byte-identical.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::action::{ActionSpace, ActionSymbol};

/// One action node.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyNode {
    pub action: ActionSymbol,
    /// Human-readable rendering under the configured action space.
    pub label: String,
    /// Fraction of all timesteps spent in this action.
    pub occupancy: f64,
    pub count: u64,
}

/// One bigram edge between node indices.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyEdge {
    pub from: usize,
    pub to: usize,
    /// P(next = to | current = from), normalized over observed bigrams.
    pub probability: f64,
    /// Mean reward collected on the destination step of this bigram.
    pub mean_reward: f64,
    pub count: u64,
}

/// Aggregated action-transition graph over a run.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyGraph {
    pub nodes: Vec<PolicyNode>,
    pub edges: Vec<PolicyEdge>,
    pub timesteps: u64,
}

impl PolicyGraph {
    /// Deterministic DOT rendering. The empty graph is still a valid
    /// (empty) digraph.
    pub fn to_dot(&self) -> String {
        let mut out = String::from("digraph policy {\n  rankdir=LR;\n");
        for (i, node) in self.nodes.iter().enumerate() {
            let _ = writeln!(
                out,
                "  n{} [label=\"{}\\n{:.1}%\"];",
                i,
                escape(&node.label),
                node.occupancy * 100.0
            );
        }
        for edge in &self.edges {
            let _ = writeln!(
                out,
                "  n{} -> n{} [label=\"{:.1}% / r={:.4}\"];",
                edge.from,
                edge.to,
                edge.probability * 100.0,
                edge.mean_reward
            );
        }
        out.push_str("}\n");
        out
    }
}

fn escape(label: &str) -> String {
    label.replace('\\', "\\\\").replace('"', "\\\"")
}

/// Streaming bigram/occupancy accumulator; memory is bounded by the
/// number of distinct actions squared.
#[derive(Debug, Clone, Default)]
pub struct PolicyAccumulator {
    node_counts: BTreeMap<ActionSymbol, u64>,
    bigrams: BTreeMap<(ActionSymbol, ActionSymbol), (u64, f64)>,
    prev: Option<ActionSymbol>,
    timesteps: u64,
}

impl PolicyAccumulator {
    pub fn new() -> Self {
        Self::default()
    }

    /// Record the action taken at step `t` and the reward collected on
    /// that same step.
    pub fn push(&mut self, action: &ActionSymbol, reward: f64) {
        if let Some(prev) = self.prev.take() {
            let cell = self
                .bigrams
                .entry((prev, action.clone()))
                .or_insert((0, 0.0));
            cell.0 += 1;
            cell.1 += reward;
        }
        *self.node_counts.entry(action.clone()).or_insert(0) += 1;
        self.timesteps += 1;
        self.prev = Some(action.clone());
    }

    /// Build the graph. Node order is the symbol order of the action
    /// space (ladder order for ordered spaces, declaration order for
    /// categorical ones); edges are sorted by (from, to).
    pub fn build(&self, space: &ActionSpace) -> PolicyGraph {
        let index: BTreeMap<&ActionSymbol, usize> = self
            .node_counts
            .keys()
            .enumerate()
            .map(|(i, a)| (a, i))
            .collect();
        let nodes: Vec<PolicyNode> = self
            .node_counts
            .iter()
            .map(|(a, c)| PolicyNode {
                action: a.clone(),
                label: space.render(a),
                occupancy: if self.timesteps == 0 {
                    0.0
                } else {
                    *c as f64 / self.timesteps as f64
                },
                count: *c,
            })
            .collect();

        let mut row_totals: BTreeMap<&ActionSymbol, u64> = BTreeMap::new();
        for ((from, _), (c, _)) in &self.bigrams {
            *row_totals.entry(from).or_insert(0) += c;
        }
        let edges: Vec<PolicyEdge> = self
            .bigrams
            .iter()
            .map(|((from, to), (c, reward_sum))| PolicyEdge {
                from: index[from],
                to: index[to],
                probability: *c as f64 / row_totals[from] as f64,
                mean_reward: reward_sum / *c as f64,
                count: *c,
            })
            .collect();
        PolicyGraph {
            nodes,
            edges,
            timesteps: self.timesteps,
        }
    }
}

/// Fold a complete (action, reward) history into a policy graph.
pub fn build_policy_graph(history: &[(ActionSymbol, f64)], space: &ActionSpace) -> PolicyGraph {
    let mut acc = PolicyAccumulator::new();
    for (a, r) in history {
        acc.push(a, *r);
    }
    acc.build(space)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::action::ActionValue;

    fn ladder() -> ActionSpace {
        ActionSpace::Ordered {
            name: "bitrate".into(),
            values: vec![300.0, 750.0, 1200.0],
            sigma: 1.0,
        }
    }

    fn step(space: &ActionSpace, prev: f64, next: f64) -> ActionSymbol {
        space
            .symbolize(Some(&ActionValue::Number(prev)), &ActionValue::Number(next))
            .unwrap()
    }

    /// a -> a -> b -> a with rewards 1, 2, 3, 4.
    fn small_history(space: &ActionSpace) -> Vec<(ActionSymbol, f64)> {
        let a = step(space, 300.0, 300.0);
        let b = step(space, 300.0, 750.0);
        vec![(a.clone(), 1.0), (a.clone(), 2.0), (b, 3.0), (a, 4.0)]
    }

    #[test]
    fn occupancy_and_probabilities_match_hand_count() {
        let sp = ladder();
        let g = build_policy_graph(&small_history(&sp), &sp);
        assert_eq!(g.timesteps, 4);
        assert_eq!(g.nodes.len(), 2);
        // Node order follows the ladder: const(300) before inc(300->750).
        assert!((g.nodes[0].occupancy - 0.75).abs() < 1e-12);
        assert!((g.nodes[1].occupancy - 0.25).abs() < 1e-12);

        // Bigrams: a->a (r=2), a->b (r=3), b->a (r=4).
        assert_eq!(g.edges.len(), 3);
        let aa = &g.edges[0];
        assert_eq!((aa.from, aa.to), (0, 0));
        assert!((aa.probability - 0.5).abs() < 1e-12);
        assert!((aa.mean_reward - 2.0).abs() < 1e-12);
        let ab = &g.edges[1];
        assert_eq!((ab.from, ab.to), (0, 1));
        assert!((ab.probability - 0.5).abs() < 1e-12);
        assert!((ab.mean_reward - 3.0).abs() < 1e-12);
        let ba = &g.edges[2];
        assert_eq!((ba.from, ba.to), (1, 0));
        assert!((ba.probability - 1.0).abs() < 1e-12);
        assert!((ba.mean_reward - 4.0).abs() < 1e-12);
    }

    #[test]
    fn rows_with_successors_sum_to_one() {
        let sp = ladder();
        let g = build_policy_graph(&small_history(&sp), &sp);
        let mut rows: BTreeMap<usize, f64> = BTreeMap::new();
        for e in &g.edges {
            *rows.entry(e.from).or_insert(0.0) += e.probability;
        }
        for (_, total) in rows {
            assert!((total - 1.0).abs() < 1e-9);
        }
    }

    #[test]
    fn dot_is_byte_stable_and_shaped() {
        let sp = ladder();
        let dot1 = build_policy_graph(&small_history(&sp), &sp).to_dot();
        let dot2 = build_policy_graph(&small_history(&sp), &sp).to_dot();
        assert_eq!(dot1, dot2);
        assert!(dot1.starts_with("digraph policy {\n  rankdir=LR;\n"));
        assert!(dot1.ends_with("}\n"));
        assert!(dot1.contains("n0 [label=\"const(bitrate, 300.0, 300.0)\\n75.0%\"];"));
        assert!(dot1.contains("n0 -> n1 [label=\"50.0% / r=3.0000\"];"));
    }

    #[test]
    fn empty_history_renders_valid_empty_digraph() {
        let sp = ladder();
        let g = build_policy_graph(&[], &sp);
        assert!(g.nodes.is_empty() && g.edges.is_empty());
        assert_eq!(g.to_dot(), "digraph policy {\n  rankdir=LR;\n}\n");
    }

    #[test]
    fn single_step_has_node_but_no_edges() {
        let sp = ladder();
        let a = step(&sp, 300.0, 300.0);
        let g = build_policy_graph(&[(a, 1.5)], &sp);
        assert_eq!(g.nodes.len(), 1);
        assert!((g.nodes[0].occupancy - 1.0).abs() < 1e-12);
        assert!(g.edges.is_empty());
    }

    #[test]
    fn accumulator_matches_batch_builder() {
        let sp = ladder();
        let hist = small_history(&sp);
        let mut acc = PolicyAccumulator::new();
        for (a, r) in &hist {
            acc.push(a, *r);
        }
        assert_eq!(acc.build(&sp), build_policy_graph(&hist, &sp));
    }

    #[test]
    fn labels_with_quotes_are_escaped() {
        assert_eq!(escape("a\"b\\c"), "a\\\"b\\\\c");
    }
}
