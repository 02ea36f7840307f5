//! The do-operator: edge surgery, value pinning and provenance pruning.

use std::collections::{BTreeMap, BTreeSet};

use super::propagate::impulse_attr;
use super::CausalError;
use crate::ego::{Sandbox, SandboxEdgeKind};
use crate::intervention::{split_target, InterventionSpec};
use crate::world::{clamp_axis, clamp_unit, EventType, NodeFamily, TraitVector};

/// What the do-operator changed in a sandbox.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Surgery {
    pub intervened_nodes: Vec<String>,
    /// Pinned `(node, attr)` values.
    pub pinned: BTreeMap<(String, String), f64>,
    /// Events that do not occur (do-not-occur, invalidated, or riding a
    /// severed channel).
    pub inactive_events: BTreeSet<String>,
    /// Events forced to occur.
    pub forced_events: BTreeSet<String>,
    pub disabled_objects: BTreeSet<String>,
    pub disabled_channels: BTreeSet<String>,
    pub severed_edges: Vec<String>,
    pub pruned_beliefs_count: usize,
    pub pruned_utterance_event_ids: Vec<String>,
}

impl Surgery {
    pub fn is_pinned(&self, node: &str, attr: &str) -> bool {
        self.pinned.contains_key(&(node.to_string(), attr.to_string()))
    }
}

/// Applies `spec` to `sandbox`: cuts every causal edge into each intervened
/// variable, writes the assigned values, and drops beliefs whose provenance
/// cites a disabled event or channel.
pub fn apply_do(sandbox: &mut Sandbox, spec: &InterventionSpec) -> Result<Surgery, CausalError> {
    let mut s = Surgery {
        intervened_nodes: spec.nodes(),
        ..Default::default()
    };
    // (node, Some(attr)) cuts edges pushing that attribute; (node, None) cuts all.
    let mut cut: Vec<(String, Option<String>)> = Vec::new();

    for (target, value) in &spec.assignments {
        let (node, attr) = split_target(target);
        let family = *sandbox
            .nodes
            .get(node)
            .ok_or_else(|| CausalError::UnknownTarget(target.clone()))?;
        match (family, attr, value) {
            (NodeFamily::Entity, Some(a), Some(x)) => {
                let x = if a.starts_with("rel:") { clamp_axis(*x) } else { clamp_unit(*x) };
                sandbox.set_value(node, a, x);
                if let Some(ent) = sandbox.world.entity_mut(node).filter(|_| !a.starts_with("rel:")) {
                    ent.traits
                        .entry(a.to_string())
                        .or_insert_with(|| TraitVector::new(0.0, 0.5, Default::default()))
                        .set_value(x);
                }
                s.pinned.insert((node.to_string(), a.to_string()), x);
                cut.push((node.to_string(), Some(a.to_string())));
            }
            (NodeFamily::Location, Some(a), Some(x)) => {
                sandbox.set_value(node, a, clamp_unit(*x));
                s.pinned.insert((node.to_string(), a.to_string()), clamp_unit(*x));
                cut.push((node.to_string(), Some(a.to_string())));
            }
            (NodeFamily::GlobalTrait, None | Some("value"), Some(x)) => {
                sandbox.set_value(node, "value", clamp_unit(*x));
                s.pinned.insert((node.to_string(), "value".to_string()), clamp_unit(*x));
                cut.push((node.to_string(), None));
            }
            (NodeFamily::Event, None, v) => {
                if v.is_none_or(|x| x == 0.0) {
                    s.inactive_events.insert(node.to_string());
                } else {
                    s.forced_events.insert(node.to_string());
                }
                cut.push((node.to_string(), None));
            }
            (NodeFamily::Object, None, None) => {
                s.disabled_objects.insert(node.to_string());
                cut.push((node.to_string(), None));
            }
            (NodeFamily::Channel, None, None) => {
                s.disabled_channels.insert(node.to_string());
            }
            _ => {
                return Err(CausalError::Malformed(format!(
                    "cannot assign {} to `{target}`",
                    value.map_or("null".to_string(), |x| x.to_string())
                )))
            }
        }
    }
    for ch in &spec.sever_channels {
        if sandbox.nodes.get(ch) != Some(&NodeFamily::Channel) {
            return Err(CausalError::UnknownTarget(ch.clone()));
        }
        s.disabled_channels.insert(ch.clone());
    }
    for ev in &spec.invalidate_events {
        if sandbox.nodes.get(ev) != Some(&NodeFamily::Event) {
            return Err(CausalError::UnknownTarget(ev.clone()));
        }
        s.inactive_events.insert(ev.clone());
    }

    for ev in &sandbox.world.events {
        let rides_severed = ev.event_type == EventType::Utterance
            && ev
                .via_channel_id
                .as_ref()
                .is_some_and(|c| s.disabled_channels.contains(c));
        if rides_severed && !s.forced_events.contains(&ev.id) {
            s.inactive_events.insert(ev.id.clone());
            s.pruned_utterance_event_ids.push(ev.id.clone());
        }
    }

    let severs = |e: &crate::world::CausalEdge| {
        cut.iter().any(|(node, attr)| {
            e.target_id == *node && attr.as_ref().is_none_or(|a| impulse_attr(e) == *a)
        })
    };
    let mut kept = Vec::with_capacity(sandbox.world.causal_topology.len());
    for e in std::mem::take(&mut sandbox.world.causal_topology) {
        if severs(&e) {
            s.severed_edges.push(e.key());
        } else {
            kept.push(e);
        }
    }
    sandbox.world.causal_topology = kept;
    let severed: BTreeSet<&String> = s.severed_edges.iter().collect();
    sandbox
        .edges
        .retain(|e| e.kind != SandboxEdgeKind::Causal || e.key.as_ref().is_none_or(|k| !severed.contains(k)));

    s.pruned_beliefs_count = prune_beliefs(sandbox, &s.inactive_events, &s.disabled_channels);
    Ok(s)
}

/// Drops beliefs citing any of the given events or channels; returns the count.
pub(crate) fn prune_beliefs(sandbox: &mut Sandbox, events: &BTreeSet<String>, channels: &BTreeSet<String>) -> usize {
    let mut pruned = 0;
    for ent in &mut sandbox.world.entities {
        let before = ent.beliefs.len();
        ent.beliefs.retain(|b| {
            !b.acquired_via_event_id.as_ref().is_some_and(|e| events.contains(e))
                && !b.acquired_via_channel_id.as_ref().is_some_and(|c| channels.contains(c))
        });
        pruned += before - ent.beliefs.len();
    }
    pruned
}
