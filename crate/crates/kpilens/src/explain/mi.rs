//! Global explanations: mutual information between KPI states and actions.
//!
//! MI is estimated with the plug-in estimator over empirical joint counts,
//! in nats. Channels are declared per KPI as a list of time offsets: a
//! channel with offset `o` pairs the KPI's symbolic state at `t + o` with
//! the action taken at `t`, so negative offsets measure how predictive a
//! KPI's recent past is of the current decision and positive offsets how
//! much a decision anticipates the KPI's near future. Only bounded count
//! tables and a short ring buffer are kept, never the full history.

use std::collections::{BTreeMap, VecDeque};

use crate::action::ActionSymbol;
use crate::error::{Error, Result};
use crate::symbolizer::SymbolicState;

/// Plug-in mutual information (nats) from raw joint counts.
pub fn mi_from_counts(counts: &BTreeMap<(SymbolicState, ActionSymbol), u64>) -> f64 {
    let n: u64 = counts.values().sum();
    if n == 0 {
        return 0.0;
    }
    let n = n as f64;
    let mut state_marginal: BTreeMap<SymbolicState, u64> = BTreeMap::new();
    let mut action_marginal: BTreeMap<&ActionSymbol, u64> = BTreeMap::new();
    for ((s, a), c) in counts {
        *state_marginal.entry(*s).or_insert(0) += c;
        *action_marginal.entry(a).or_insert(0) += c;
    }
    let mut mi = 0.0;
    for ((s, a), c) in counts {
        if *c == 0 {
            continue;
        }
        let p_sa = *c as f64 / n;
        let p_s = state_marginal[s] as f64 / n;
        let p_a = action_marginal[a] as f64 / n;
        mi += p_sa * (p_sa / (p_s * p_a)).ln();
    }
    mi.max(0.0)
}

/// Mutual information (nats) between paired state and action samples.
pub fn mutual_information(pairs: &[(SymbolicState, ActionSymbol)]) -> f64 {
    let mut counts: BTreeMap<(SymbolicState, ActionSymbol), u64> = BTreeMap::new();
    for (s, a) in pairs {
        *counts.entry((*s, a.clone())).or_insert(0) += 1;
    }
    mi_from_counts(&counts)
}

/// One KPI/offset channel to track, e.g. `tput` at offset -2.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MiChannelSpec {
    pub kpi: String,
    pub offset: i64,
}

impl MiChannelSpec {
    /// Channel name used in reports: `tput` for offset 0, `tput@t-2`,
    /// `bwd@t+1` otherwise.
    pub fn channel_name(&self) -> String {
        match self.offset {
            0 => self.kpi.clone(),
            o if o < 0 => format!("{}@t-{}", self.kpi, -o),
            o => format!("{}@t+{}", self.kpi, o),
        }
    }
}

/// Per-channel result in a finished report.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MiChannel {
    pub mi_nats: f64,
    pub samples: u64,
}

/// Mutual information per declared channel.
#[derive(Debug, Clone, PartialEq, Default, serde::Serialize, serde::Deserialize)]
pub struct MiReport {
    pub channels: BTreeMap<String, MiChannel>,
}

impl MiReport {
    /// CSV rendering with a fixed header, one row per channel in name
    /// order. Byte-identical across runs over the same history.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("channel,mi_nats,samples\n");
        for (name, ch) in &self.channels {
            out.push_str(&format!("{},{:.6},{}\n", name, ch.mi_nats, ch.samples));
        }
        out
    }
}

/// Streaming accumulator over (joint state, action) steps.
///
/// Memory is bounded by the channel count tables plus a ring buffer of
/// depth `max |offset| + 1`; pushing step `t` completes every channel
/// pair whose two endpoints are now both known.
#[derive(Debug, Clone)]
pub struct MiAccumulator {
    channels: Vec<MiChannelSpec>,
    tables: Vec<BTreeMap<(SymbolicState, ActionSymbol), u64>>,
    ring: VecDeque<(BTreeMap<String, SymbolicState>, ActionSymbol)>,
    depth: usize,
}

impl MiAccumulator {
    pub fn new(channels: Vec<MiChannelSpec>) -> Result<Self> {
        let mut seen = std::collections::BTreeSet::new();
        for ch in &channels {
            if !seen.insert(ch.channel_name()) {
                return Err(Error::Config(format!(
                    "duplicate mutual-information channel {}",
                    ch.channel_name()
                )));
            }
        }
        let depth = channels
            .iter()
            .map(|c| c.offset.unsigned_abs() as usize)
            .max()
            .unwrap_or(0)
            + 1;
        let tables = vec![BTreeMap::new(); channels.len()];
        Ok(Self {
            channels,
            tables,
            ring: VecDeque::new(),
            depth,
        })
    }

    /// Record one step: the joint symbolic state observed at `t` and the
    /// action taken at `t`.
    pub fn push(&mut self, joint: &BTreeMap<String, SymbolicState>, action: &ActionSymbol) {
        self.ring.push_back((joint.clone(), action.clone()));
        if self.ring.len() > self.depth {
            self.ring.pop_front();
        }
        let newest = self.ring.len() - 1;
        for (idx, ch) in self.channels.iter().enumerate() {
            // A channel with offset o pairs state at t+o with action at t.
            // The newest entry supplies whichever endpoint comes later.
            let (state_pos, action_pos) = if ch.offset <= 0 {
                let back = (-ch.offset) as usize;
                if back > newest {
                    continue;
                }
                (newest - back, newest)
            } else {
                let back = ch.offset as usize;
                if back > newest {
                    continue;
                }
                (newest, newest - back)
            };
            let Some(state) = self.ring[state_pos].0.get(&ch.kpi) else {
                continue;
            };
            let action = self.ring[action_pos].1.clone();
            *self.tables[idx].entry((*state, action)).or_insert(0) += 1;
        }
    }

    pub fn report(&self) -> MiReport {
        let mut channels = BTreeMap::new();
        for (idx, ch) in self.channels.iter().enumerate() {
            let table = &self.tables[idx];
            channels.insert(
                ch.channel_name(),
                MiChannel {
                    mi_nats: mi_from_counts(table),
                    samples: table.values().sum(),
                },
            );
        }
        MiReport { channels }
    }
}
