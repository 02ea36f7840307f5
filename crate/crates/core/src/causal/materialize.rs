//! Folding a query result back into a full shadow world.

use std::collections::BTreeMap;

use super::propagate::split_rel;
use super::{CausalPhysicsResult, MutationCause};
use crate::world::{
    clamp_axis, Axis, AxisMetric, BranchTag, NodeFamily, RelationshipEdge, TimelineEntry, TraitUpdate, WorldState,
    WorldTraitSnapshot,
};

/// Builds the shadow world a result describes: events that no longer occur
/// are removed with their provenance, retracted arcs are stripped, severed
/// channels close at the anchor, and every propagated value lands as state
/// at the end of the timeline.
pub fn materialize(world: &WorldState, result: &CausalPhysicsResult) -> WorldState {
    let mut out = world.clone();
    out.world_id = BranchTag::Shadow;

    for m in &result.mutations {
        let MutationCause::Retraction(event) = &m.cause else { continue };
        let Some(from) = world.event(event).map(|e| e.fabula_time) else { continue };
        if let Some(ent) = out.entity_mut(&m.node_id) {
            for entry in ent.state_timeline.iter_mut().filter(|x| x.fabula_time >= from) {
                entry.traits.remove(&m.attr);
            }
        }
    }
    for id in &result.deactivated_event_ids {
        out.remove_event(id);
    }
    out.renumber_syuzhet();

    for ch in &result.disabled_channel_ids {
        for ent in &mut out.entities {
            ent.beliefs.retain(|b| b.acquired_via_channel_id.as_deref() != Some(ch.as_str()));
            for entry in &mut ent.state_timeline {
                entry
                    .beliefs_added
                    .retain(|b| b.acquired_via_channel_id.as_deref() != Some(ch.as_str()));
            }
        }
        if let Some(c) = out.channels.iter_mut().find(|c| &c.id == ch) {
            let close = result.anchor_fabula.max(c.established_at_fabula.unwrap_or(i64::MIN));
            c.terminated_at_fabula = Some(c.terminated_at_fabula.map_or(close, |t| t.min(close)));
        }
    }

    let mut finals: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    let mut t_end = out.max_fabula();
    for m in result.mutations.iter().filter(|m| m.cause == MutationCause::Propagation) {
        finals.insert((m.node_id.as_str(), m.attr.as_str()), m.new);
        t_end = t_end.max(m.fabula_time);
    }

    let mut entries: BTreeMap<&str, TimelineEntry> = BTreeMap::new();
    for ((node, attr), value) in finals {
        match NodeFamily::of(node) {
            Some(NodeFamily::Entity) => match split_rel(attr) {
                Some((cp, axis)) => {
                    let Some(axis) = Axis::parse(axis) else { continue };
                    set_axis(&mut out, node, cp, axis, value, t_end);
                }
                None => {
                    entries
                        .entry(node)
                        .or_insert_with(|| TimelineEntry {
                            fabula_time: t_end,
                            ..Default::default()
                        })
                        .traits
                        .insert(
                            attr.to_string(),
                            TraitUpdate {
                                value: Some(value),
                                inertia: None,
                            },
                        );
                }
            },
            Some(NodeFamily::Location) => {
                if let Some(a) = out
                    .locations
                    .iter_mut()
                    .find(|l| l.id == node)
                    .and_then(|l| l.ambient_state.get_mut(attr))
                {
                    a.value = value;
                }
            }
            Some(NodeFamily::GlobalTrait) => {
                if let Some(w) = out.world_traits.iter_mut().find(|w| w.id == node) {
                    w.state_timeline.push(WorldTraitSnapshot {
                        fabula_time: t_end,
                        value: Some(value),
                        inertia: None,
                    });
                }
            }
            _ => {}
        }
    }
    for (node, entry) in entries {
        if let Some(ent) = out.entity_mut(node) {
            ent.state_timeline.push(entry);
        }
    }
    out
}

fn set_axis(world: &mut WorldState, source: &str, target: &str, axis: Axis, value: f64, t: i64) {
    let idx = match world
        .social_topology
        .iter()
        .position(|r| r.source_id == source && r.target_id == target)
    {
        Some(i) => i,
        None => {
            world.social_topology.push(RelationshipEdge {
                source_id: source.to_string(),
                target_id: target.to_string(),
                metrics: BTreeMap::new(),
            });
            world.social_topology.len() - 1
        }
    };
    let metric = world.social_topology[idx].metrics.entry(axis).or_insert(AxisMetric {
        value: 0.0,
        inertia: 0.0,
        evidence_strength: Default::default(),
        last_updated_fabula: t,
        observed: true,
    });
    metric.value = clamp_axis(value);
    metric.last_updated_fabula = t;
}
