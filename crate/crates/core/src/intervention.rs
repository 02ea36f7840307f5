//! Typed interventions and evidence shared by the pre-flight
//! screen and the causal engine.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

/// Splits `NODE.attr` into `(NODE, Some(attr))`; a bare id has no attribute.
pub fn split_target(target: &str) -> (&str, Option<&str>) {
    match target.split_once('.') {
        Some((node, attr)) if !attr.is_empty() => (node, Some(attr)),
        _ => (target, None),
    }
}

/// `do(...)` assignments plus channel severances and event invalidations.
///
/// Assignment keys are `NODE` or `NODE.attr`; a `null` value means the node
/// does not occur (events) or is disabled (objects, channels).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct InterventionSpec {
    #[serde(default)]
    pub assignments: BTreeMap<String, Option<f64>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub sever_channels: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub invalidate_events: Vec<String>,
}

impl InterventionSpec {
    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty() && self.sever_channels.is_empty() && self.invalidate_events.is_empty()
    }

    /// Every intervened variable with its context value, keyed by node id.
    pub fn variables(&self) -> BTreeMap<String, ContextValue> {
        let mut out = BTreeMap::new();
        for (target, v) in &self.assignments {
            let (node, attr) = split_target(target);
            let value = match v {
                Some(x) => ContextValue::num(*x),
                None => ContextValue::Off,
            };
            let key = match attr {
                Some(a) => format!("{node}.{a}"),
                None => node.to_string(),
            };
            out.insert(key, value);
        }
        for ch in &self.sever_channels {
            out.insert(ch.clone(), ContextValue::Off);
        }
        for ev in &self.invalidate_events {
            out.entry(ev.clone()).or_insert(ContextValue::Invalid);
        }
        out
    }

    /// Node ids touched by any part of the intervention.
    pub fn nodes(&self) -> Vec<String> {
        let mut out: Vec<String> = self
            .assignments
            .keys()
            .map(|t| split_target(t).0.to_string())
            .chain(self.sever_channels.iter().cloned())
            .chain(self.invalidate_events.iter().cloned())
            .collect();
        out.sort();
        out.dedup();
        out
    }
}

/// Intervention value as it enters a projected context. Numbers compare by
/// their exact bit pattern.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ContextValue {
    Num(u64),
    Off,
    Invalid,
}

impl ContextValue {
    pub fn num(x: f64) -> Self {
        // Normalise -0.0 so it shares a context with 0.0.
        let x = if x == 0.0 { 0.0 } else { x };
        ContextValue::Num(x.to_bits())
    }
}

impl fmt::Display for ContextValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ContextValue::Num(bits) => write!(f, "{}", f64::from_bits(*bits)),
            ContextValue::Off => f.write_str("off"),
            ContextValue::Invalid => f.write_str("invalid"),
        }
    }
}

/// Present-day observations for abduction, keyed `NODE` or `NODE.attr`.
///
/// A `null` value means "the value the factual world holds at its terminal
/// fabula time"; a bare entity id pulls every trait that way.
pub type Evidence = BTreeMap<String, Option<f64>>;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn split_and_variables() {
        assert_eq!(split_target("ENT_A.guilt"), ("ENT_A", Some("guilt")));
        assert_eq!(split_target("EVT_X"), ("EVT_X", None));
        let spec = InterventionSpec {
            assignments: [("ENT_A.guilt".to_string(), Some(-0.0)), ("EVT_X".to_string(), None)].into(),
            sever_channels: vec!["CHN_C".into()],
            invalidate_events: vec!["EVT_Y".into()],
        };
        let vars = spec.variables();
        assert_eq!(vars["ENT_A.guilt"], ContextValue::num(0.0));
        assert_eq!(vars["EVT_X"], ContextValue::Off);
        assert_eq!(vars["EVT_Y"], ContextValue::Invalid);
        assert_eq!(spec.nodes(), vec!["CHN_C", "ENT_A", "EVT_X", "EVT_Y"]);
    }
}
