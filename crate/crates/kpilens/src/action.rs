//! Action spaces and action symbolization.
//!
//! A [`ActionSpace`] declares what the agent's raw actions look like and
//! how two actions compare:
//!
//! * ordered discrete values (a ladder) — symbolized as a delta
//!   `inc|dec|const(name, prev, next)`, compared by ladder-index distance,
//! * categorical labels — symbolized as `toName(label)`, compared exactly,
//! * continuous scalars — kept numeric, compared by absolute distance.
//!
//! [`ActionSymbol`] implements a total order that follows the declared
//! space (ladder order for deltas, declaration order for labels, numeric
//! order for scalars); every "first action wins" tie-break in the crate is
//! defined in terms of this order.

use std::cmp::Ordering;

use ordered_float::OrderedFloat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::symbolizer::Predicate;

fn default_sigma() -> f64 {
    1.0
}

/// Raw action value as it appears in a trace record: a bare number for
/// ordered/continuous spaces, a bare string for categorical ones.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ActionValue {
    Number(f64),
    Label(String),
}

impl std::fmt::Display for ActionValue {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ActionValue::Number(v) => write!(f, "{v:?}"),
            ActionValue::Label(l) => f.write_str(l),
        }
    }
}

/// Declared shape of the agent's action space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
pub enum ActionSpace {
    /// Discrete values with a meaningful order, e.g. a bitrate ladder.
    /// `sigma` controls how fast alignment decays with index distance.
    Ordered {
        name: String,
        values: Vec<f64>,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
    /// Unordered labels in declaration order.
    Categorical { name: String, labels: Vec<String> },
    /// Free scalar; `sigma` controls alignment decay with absolute
    /// distance.
    Continuous {
        name: String,
        #[serde(default = "default_sigma")]
        sigma: f64,
    },
}

/// Symbolized action, usable as a knowledge-graph edge key.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum ActionSymbol {
    /// Move on an ordered ladder (direction is implied by prev/next but
    /// kept for rendering).
    Delta {
        direction: Predicate,
        prev: OrderedFloat<f64>,
        next: OrderedFloat<f64>,
    },
    /// Categorical choice; `index` is the position in the declared label
    /// list and defines ordering.
    Category { index: usize, label: String },
    /// Continuous scalar.
    Scalar { value: OrderedFloat<f64> },
}

impl Ord for ActionSymbol {
    fn cmp(&self, other: &Self) -> Ordering {
        use ActionSymbol::*;
        fn rank(a: &ActionSymbol) -> u8 {
            match a {
                Delta { .. } => 0,
                Category { .. } => 1,
                Scalar { .. } => 2,
            }
        }
        match (self, other) {
            (
                Delta {
                    direction: d1,
                    prev: p1,
                    next: n1,
                },
                Delta {
                    direction: d2,
                    prev: p2,
                    next: n2,
                },
            ) => n1.cmp(n2).then(p1.cmp(p2)).then(d1.cmp(d2)),
            (
                Category {
                    index: i1,
                    label: l1,
                },
                Category {
                    index: i2,
                    label: l2,
                },
            ) => i1.cmp(i2).then(l1.cmp(l2)),
            (Scalar { value: v1 }, Scalar { value: v2 }) => v1.cmp(v2),
            (a, b) => rank(a).cmp(&rank(b)),
        }
    }
}

impl PartialOrd for ActionSymbol {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl ActionSymbol {
    /// The raw value this symbol puts into effect.
    pub fn effective_value(&self) -> ActionValue {
        match self {
            ActionSymbol::Delta { next, .. } => ActionValue::Number(next.0),
            ActionSymbol::Category { label, .. } => ActionValue::Label(label.clone()),
            ActionSymbol::Scalar { value } => ActionValue::Number(value.0),
        }
    }
}

impl ActionSpace {
    pub fn name(&self) -> &str {
        match self {
            ActionSpace::Ordered { name, .. }
            | ActionSpace::Categorical { name, .. }
            | ActionSpace::Continuous { name, .. } => name,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let err = |reason: String| Err(Error::Config(reason));
        if self.name().is_empty() {
            return err("action space name must not be empty".into());
        }
        match self {
            ActionSpace::Ordered { values, sigma, .. } => {
                if values.is_empty() {
                    return err("ordered action space needs at least one value".into());
                }
                if values.iter().any(|v| !v.is_finite()) {
                    return err("ordered action values must be finite".into());
                }
                for w in values.windows(2) {
                    if w[0] >= w[1] {
                        return err("ordered action values must be strictly increasing".into());
                    }
                }
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return err(format!("sigma must be finite and > 0, got {sigma}"));
                }
            }
            ActionSpace::Categorical { labels, .. } => {
                if labels.is_empty() {
                    return err("categorical action space needs at least one label".into());
                }
                let mut seen = std::collections::BTreeSet::new();
                for l in labels {
                    if l.is_empty() {
                        return err("categorical labels must not be empty".into());
                    }
                    if !seen.insert(l) {
                        return err(format!("duplicate action label `{l}`"));
                    }
                }
            }
            ActionSpace::Continuous { sigma, .. } => {
                if !(sigma.is_finite() && *sigma > 0.0) {
                    return err(format!("sigma must be finite and > 0, got {sigma}"));
                }
            }
        }
        Ok(())
    }

    /// Index of a raw value on an ordered ladder (exact match).
    pub fn ordered_index(&self, v: f64) -> Option<usize> {
        match self {
            ActionSpace::Ordered { values, .. } => values.iter().position(|x| *x == v),
            _ => None,
        }
    }

    /// Symbolize the action taken at a timestep. For ordered spaces the
    /// previous action fixes the delta direction; a missing previous action
    /// (first timestep) yields a `const` delta from the value to itself.
    pub fn symbolize(
        &self,
        prev: Option<&ActionValue>,
        current: &ActionValue,
    ) -> Result<ActionSymbol> {
        match self {
            ActionSpace::Ordered { name, .. } => {
                let next = self.expect_member(name, current)?;
                let prev = match prev {
                    Some(p) => self.expect_member(name, p)?,
                    None => next,
                };
                let direction = match next.partial_cmp(&prev).unwrap() {
                    Ordering::Greater => Predicate::Inc,
                    Ordering::Less => Predicate::Dec,
                    Ordering::Equal => Predicate::Const,
                };
                Ok(ActionSymbol::Delta {
                    direction,
                    prev: OrderedFloat(prev),
                    next: OrderedFloat(next),
                })
            }
            ActionSpace::Categorical { name, labels } => match current {
                ActionValue::Label(l) => {
                    let index = labels.iter().position(|x| x == l).ok_or_else(|| {
                        Error::Validation(format!(
                            "action `{l}` is not one of the declared `{name}` labels"
                        ))
                    })?;
                    Ok(ActionSymbol::Category {
                        index,
                        label: l.clone(),
                    })
                }
                ActionValue::Number(v) => Err(Error::Validation(format!(
                    "categorical action space `{name}` expects a label, got {v}"
                ))),
            },
            ActionSpace::Continuous { name, .. } => match current {
                ActionValue::Number(v) if v.is_finite() => Ok(ActionSymbol::Scalar {
                    value: OrderedFloat(*v),
                }),
                other => Err(Error::Validation(format!(
                    "continuous action space `{name}` expects a finite number, got {other:?}"
                ))),
            },
        }
    }

    fn expect_member(&self, name: &str, v: &ActionValue) -> Result<f64> {
        match v {
            ActionValue::Number(x) => {
                if self.ordered_index(*x).is_none() {
                    return Err(Error::Validation(format!(
                        "action {x} is not on the declared `{name}` ladder"
                    )));
                }
                Ok(*x)
            }
            ActionValue::Label(l) => Err(Error::Validation(format!(
                "ordered action space `{name}` expects a number, got `{l}`"
            ))),
        }
    }

    /// Distance between what two symbols put into effect: ladder-index
    /// distance for ordered spaces, 0/1 for categorical, absolute
    /// difference for continuous.
    pub fn distance(&self, a: &ActionSymbol, b: &ActionSymbol) -> Result<f64> {
        match (self, a, b) {
            (
                ActionSpace::Ordered { name, .. },
                ActionSymbol::Delta { next: na, .. },
                ActionSymbol::Delta { next: nb, .. },
            ) => {
                let ia = self.ordered_index(na.0).ok_or_else(|| {
                    Error::Validation(format!("action {} left the `{name}` ladder", na.0))
                })?;
                let ib = self.ordered_index(nb.0).ok_or_else(|| {
                    Error::Validation(format!("action {} left the `{name}` ladder", nb.0))
                })?;
                Ok((ia as f64 - ib as f64).abs())
            }
            (ActionSpace::Categorical { .. }, a, b) => Ok(if a == b { 0.0 } else { 1.0 }),
            (
                ActionSpace::Continuous { .. },
                ActionSymbol::Scalar { value: va },
                ActionSymbol::Scalar { value: vb },
            ) => Ok((va.0 - vb.0).abs()),
            _ => Err(Error::Validation(
                "action symbols do not match the declared action space".into(),
            )),
        }
    }

    /// Alignment weight in [0, 1]: exact-match indicator for categorical
    /// spaces, Gaussian decay `exp(-d^2 / (2 sigma^2))` over the space's
    /// distance for ordered and continuous ones.
    pub fn alignment(&self, a: &ActionSymbol, b: &ActionSymbol) -> Result<f64> {
        let d = self.distance(a, b)?;
        Ok(match self {
            ActionSpace::Categorical { .. } => {
                if d == 0.0 {
                    1.0
                } else {
                    0.0
                }
            }
            ActionSpace::Ordered { sigma, .. } | ActionSpace::Continuous { sigma, .. } => {
                (-d * d / (2.0 * sigma * sigma)).exp()
            }
        })
    }

    /// Render a symbol for humans: `dec(bitrate, 1200.0, 750.0)`,
    /// `toPolicy(WF)`, `power(0.85)`.
    pub fn render(&self, a: &ActionSymbol) -> String {
        match (self, a) {
            (
                ActionSpace::Ordered { name, .. },
                ActionSymbol::Delta {
                    direction,
                    prev,
                    next,
                },
            ) => {
                format!("{direction}({name}, {:?}, {:?})", prev.0, next.0)
            }
            (ActionSpace::Categorical { name, .. }, ActionSymbol::Category { label, .. }) => {
                let mut chars = name.chars();
                let pred: String = match chars.next() {
                    Some(c) => c.to_uppercase().chain(chars).collect(),
                    None => "Category".into(),
                };
                format!("to{pred}({label})")
            }
            (ActionSpace::Continuous { name, .. }, ActionSymbol::Scalar { value }) => {
                format!("{name}({:?})", value.0)
            }
            // Mismatched pairs only arise from corrupted snapshots; render
            // something inspectable rather than panicking.
            (_, other) => format!("{other:?}"),
        }
    }
}
