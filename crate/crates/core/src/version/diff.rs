//! Structural difference between two worlds.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::world::{reconstruct_entity, BranchTag, NodeFamily, WorldState};

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FamilyDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub changed: Vec<String>,
}

impl FamilyDiff {
    fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

/// Edge changes keyed by edge identity (see `CausalEdge::key`).
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeDiff {
    pub added: Vec<String>,
    pub removed: Vec<String>,
    pub changed: Vec<String>,
}

impl EdgeDiff {
    fn is_empty(&self) -> bool {
        self.added.is_empty() && self.removed.is_empty() && self.changed.is_empty()
    }
}

/// One scalar that differs at the terminal fabula time.
///
/// `key` is a trait name for entities, `rel:<counterpart>:<axis>` for
/// relationship axes, `ambient:<name>` for locations and `value` for world
/// traits.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitChange {
    pub node_id: String,
    pub key: String,
    pub old: Option<f64>,
    pub new: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeliefChange {
    pub entity_id: String,
    pub target_id: String,
    pub change: BeliefChangeKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquired_via_event_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquired_via_channel_id: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BeliefChangeKind {
    Added,
    Removed,
    Changed,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldDiff {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub world_id: Option<(BranchTag, BranchTag)>,
    #[serde(default)]
    pub nodes: BTreeMap<NodeFamily, FamilyDiff>,
    #[serde(default)]
    pub edges: BTreeMap<String, EdgeDiff>,
    #[serde(default)]
    pub trait_changes: Vec<TraitChange>,
    #[serde(default)]
    pub belief_changes: Vec<BeliefChange>,
}

impl WorldDiff {
    pub fn is_empty(&self) -> bool {
        self.world_id.is_none() && self.only_branch_tags()
    }

    /// True when nothing but the branch tag differs.
    pub fn only_branch_tags(&self) -> bool {
        self.nodes.values().all(FamilyDiff::is_empty)
            && self.edges.values().all(EdgeDiff::is_empty)
            && self.trait_changes.is_empty()
            && self.belief_changes.is_empty()
    }

    pub fn added(&self, family: NodeFamily) -> &[String] {
        self.nodes.get(&family).map(|d| d.added.as_slice()).unwrap_or(&[])
    }

    pub fn removed(&self, family: NodeFamily) -> &[String] {
        self.nodes.get(&family).map(|d| d.removed.as_slice()).unwrap_or(&[])
    }
}

fn node_json(world: &WorldState, family: NodeFamily) -> BTreeMap<String, serde_json::Value> {
    fn collect<T: Serialize>(items: &[T], id: impl Fn(&T) -> &str) -> BTreeMap<String, serde_json::Value> {
        items
            .iter()
            .map(|n| (id(n).to_string(), serde_json::to_value(n).expect("node serializes")))
            .collect()
    }
    match family {
        NodeFamily::Entity => collect(&world.entities, |n| &n.id),
        NodeFamily::Event => collect(&world.events, |n| &n.id),
        NodeFamily::Location => collect(&world.locations, |n| &n.id),
        NodeFamily::Object => collect(&world.objects, |n| &n.id),
        NodeFamily::Channel => collect(&world.channels, |n| &n.id),
        NodeFamily::GlobalTrait => collect(&world.world_traits, |n| &n.id),
    }
}

fn keyed<T: Serialize>(items: &[T], key: impl Fn(&T) -> String) -> BTreeMap<String, serde_json::Value> {
    items
        .iter()
        .map(|e| (key(e), serde_json::to_value(e).expect("edge serializes")))
        .collect()
}

fn edge_json(world: &WorldState) -> BTreeMap<&'static str, BTreeMap<String, serde_json::Value>> {
    BTreeMap::from([
        ("causal", keyed(&world.causal_topology, |e| e.key())),
        ("social", keyed(&world.social_topology, |e| e.key())),
        ("spatial", keyed(&world.spatial_topology, |e| e.key())),
    ])
}

fn keyed_diff(
    a: &BTreeMap<String, serde_json::Value>,
    b: &BTreeMap<String, serde_json::Value>,
) -> (Vec<String>, Vec<String>, Vec<String>) {
    let added = b.keys().filter(|k| !a.contains_key(*k)).cloned().collect();
    let removed = a.keys().filter(|k| !b.contains_key(*k)).cloned().collect();
    let changed = a
        .iter()
        .filter(|(k, v)| b.get(*k).is_some_and(|w| w != *v))
        .map(|(k, _)| k.clone())
        .collect();
    (added, removed, changed)
}

pub(crate) fn scalars(world: &WorldState) -> BTreeMap<(String, String), f64> {
    let t = world.max_fabula();
    let mut out = BTreeMap::new();
    for ent in &world.entities {
        let snap = reconstruct_entity(world, &ent.id, t).expect("entity exists");
        for (name, tv) in snap.traits {
            out.insert((ent.id.clone(), name), tv.value);
        }
    }
    for rel in &world.social_topology {
        for (axis, m) in &rel.metrics {
            out.insert(
                (rel.source_id.clone(), format!("rel:{}:{}", rel.target_id, axis.as_str())),
                m.value,
            );
        }
    }
    for loc in &world.locations {
        for (name, a) in &loc.ambient_state {
            out.insert((loc.id.clone(), format!("ambient:{name}")), a.value);
        }
    }
    for w in &world.world_traits {
        out.insert((w.id.clone(), "value".into()), w.value_at(t).0);
    }
    out
}

type BeliefKey = (String, String);

fn beliefs(world: &WorldState) -> BTreeMap<BeliefKey, crate::world::Belief> {
    let t = world.max_fabula();
    let mut out = BTreeMap::new();
    for ent in &world.entities {
        let snap = reconstruct_entity(world, &ent.id, t).expect("entity exists");
        for b in snap.beliefs {
            out.insert((ent.id.clone(), b.target_id.clone()), b);
        }
    }
    out
}

/// Difference from `a` to `b`. Scalars and beliefs are compared at each
/// world's terminal fabula time; scalars are listed only for nodes present
/// in both worlds.
pub fn diff_worlds(a: &WorldState, b: &WorldState) -> WorldDiff {
    let mut diff = WorldDiff {
        world_id: (a.world_id != b.world_id).then_some((a.world_id, b.world_id)),
        ..Default::default()
    };
    for family in NodeFamily::ALL {
        let (added, removed, changed) = keyed_diff(&node_json(a, family), &node_json(b, family));
        diff.nodes.insert(family, FamilyDiff { added, removed, changed });
    }
    let (ea, eb) = (edge_json(a), edge_json(b));
    for (name, left) in &ea {
        let (added, removed, changed) = keyed_diff(left, &eb[name]);
        diff.edges.insert(name.to_string(), EdgeDiff { added, removed, changed });
    }

    let (sa, sb) = (scalars(a), scalars(b));
    let shared: BTreeSet<&str> = a
        .ids(NodeFamily::Entity)
        .into_iter()
        .chain(a.ids(NodeFamily::Location))
        .chain(a.ids(NodeFamily::GlobalTrait))
        .filter(|id| b.contains_node(id))
        .collect();
    let keys: BTreeSet<&(String, String)> = sa.keys().chain(sb.keys()).collect();
    for key in keys {
        if !shared.contains(key.0.as_str()) {
            continue;
        }
        let (old, new) = (sa.get(key).copied(), sb.get(key).copied());
        if old != new {
            diff.trait_changes.push(TraitChange {
                node_id: key.0.clone(),
                key: key.1.clone(),
                old,
                new,
            });
        }
    }

    let (ba, bb) = (beliefs(a), beliefs(b));
    let keys: BTreeSet<&BeliefKey> = ba.keys().chain(bb.keys()).collect();
    for key in keys {
        let kind = match (ba.get(key), bb.get(key)) {
            (None, Some(_)) => BeliefChangeKind::Added,
            (Some(_), None) => BeliefChangeKind::Removed,
            (Some(x), Some(y)) if x != y => BeliefChangeKind::Changed,
            _ => continue,
        };
        let src = bb.get(key).or_else(|| ba.get(key)).expect("one side present");
        diff.belief_changes.push(BeliefChange {
            entity_id: key.0.clone(),
            target_id: key.1.clone(),
            change: kind,
            acquired_via_event_id: src.acquired_via_event_id.clone(),
            acquired_via_channel_id: src.acquired_via_channel_id.clone(),
        });
    }
    diff
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Entity, EventNode, EventType};

    #[test]
    fn identical_worlds_diff_empty() {
        let mut w = WorldState::default();
        w.entities.push(Entity::new("ENT_A").with_trait("guilt", 0.1, 0.25));
        assert!(diff_worlds(&w, &w).is_empty());
    }

    #[test]
    fn removed_event_and_trait_change() {
        let mut a = WorldState::default();
        a.entities.push(Entity::new("ENT_A").with_trait("guilt", 0.1, 0.25));
        a.events.push(EventNode::new("EVT_DUNCAN_MURDER", EventType::Action, 100, 0));
        let mut b = a.clone();
        b.events.clear();
        b.entities[0].traits.get_mut("guilt").unwrap().value = 0.2;
        b.world_id = BranchTag::Shadow;
        let d = diff_worlds(&a, &b);
        assert_eq!(d.removed(NodeFamily::Event), ["EVT_DUNCAN_MURDER".to_string()]);
        assert_eq!(d.nodes[&NodeFamily::Entity].changed, vec!["ENT_A".to_string()]);
        assert_eq!(d.trait_changes.len(), 1);
        assert_eq!(d.trait_changes[0].new, Some(0.2));
        assert_eq!(d.world_id, Some((BranchTag::Factual, BranchTag::Shadow)));
    }
}
