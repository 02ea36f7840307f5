//! Content-carrying deltas: a patch from `a` to `b` that, applied to `a`,
//! rebuilds `b` exactly.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::world::{
    BranchTag, CausalEdge, Channel, Entity, EventNode, GlobalTrait, Location, Object, RelationshipEdge, SpatialEdge,
    WorldState,
};

/// Per-collection change set. `order` is the identity order in the target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ListPatch<T> {
    pub removed: Vec<String>,
    pub upserted: BTreeMap<String, T>,
    pub order: Vec<String>,
}

impl<T> Default for ListPatch<T> {
    fn default() -> Self {
        Self {
            removed: Vec::new(),
            upserted: BTreeMap::new(),
            order: Vec::new(),
        }
    }
}

impl<T: Clone + PartialEq> ListPatch<T> {
    fn between(a: &[T], b: &[T], key: impl Fn(&T) -> String) -> Self {
        let left: BTreeMap<String, &T> = a.iter().map(|x| (key(x), x)).collect();
        let right: BTreeMap<String, &T> = b.iter().map(|x| (key(x), x)).collect();
        Self {
            removed: left.keys().filter(|k| !right.contains_key(*k)).cloned().collect(),
            upserted: right
                .iter()
                .filter(|(k, v)| left.get(*k) != Some(*v))
                .map(|(k, v)| (k.clone(), (*v).clone()))
                .collect(),
            order: b.iter().map(key).collect(),
        }
    }

    fn apply(&self, a: &[T], key: impl Fn(&T) -> String) -> Vec<T> {
        let left: BTreeMap<String, &T> = a.iter().map(|x| (key(x), x)).collect();
        self.order
            .iter()
            .filter_map(|k| self.upserted.get(k).or_else(|| left.get(k).copied()).cloned())
            .collect()
    }

    pub fn is_empty(&self) -> bool {
        self.removed.is_empty() && self.upserted.is_empty()
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct WorldPatch {
    pub title: Option<String>,
    pub world_id: BranchTag,
    pub fabula_time_spacing: i64,
    pub intelligibility_threshold: f64,
    pub entities: ListPatch<Entity>,
    pub events: ListPatch<EventNode>,
    pub locations: ListPatch<Location>,
    pub objects: ListPatch<Object>,
    pub channels: ListPatch<Channel>,
    pub world_traits: ListPatch<GlobalTrait>,
    pub causal_topology: ListPatch<CausalEdge>,
    pub social_topology: ListPatch<RelationshipEdge>,
    pub spatial_topology: ListPatch<SpatialEdge>,
}

pub fn make_patch(a: &WorldState, b: &WorldState) -> WorldPatch {
    WorldPatch {
        title: b.title.clone(),
        world_id: b.world_id,
        fabula_time_spacing: b.fabula_time_spacing,
        intelligibility_threshold: b.intelligibility_threshold,
        entities: ListPatch::between(&a.entities, &b.entities, |x| x.id.clone()),
        events: ListPatch::between(&a.events, &b.events, |x| x.id.clone()),
        locations: ListPatch::between(&a.locations, &b.locations, |x| x.id.clone()),
        objects: ListPatch::between(&a.objects, &b.objects, |x| x.id.clone()),
        channels: ListPatch::between(&a.channels, &b.channels, |x| x.id.clone()),
        world_traits: ListPatch::between(&a.world_traits, &b.world_traits, |x| x.id.clone()),
        causal_topology: ListPatch::between(&a.causal_topology, &b.causal_topology, CausalEdge::key),
        social_topology: ListPatch::between(&a.social_topology, &b.social_topology, RelationshipEdge::key),
        spatial_topology: ListPatch::between(&a.spatial_topology, &b.spatial_topology, SpatialEdge::key),
    }
}

pub fn apply_patch(a: &WorldState, p: &WorldPatch) -> WorldState {
    WorldState {
        title: p.title.clone(),
        world_id: p.world_id,
        fabula_time_spacing: p.fabula_time_spacing,
        intelligibility_threshold: p.intelligibility_threshold,
        entities: p.entities.apply(&a.entities, |x| x.id.clone()),
        events: p.events.apply(&a.events, |x| x.id.clone()),
        locations: p.locations.apply(&a.locations, |x| x.id.clone()),
        objects: p.objects.apply(&a.objects, |x| x.id.clone()),
        channels: p.channels.apply(&a.channels, |x| x.id.clone()),
        world_traits: p.world_traits.apply(&a.world_traits, |x| x.id.clone()),
        causal_topology: p.causal_topology.apply(&a.causal_topology, CausalEdge::key),
        social_topology: p.social_topology.apply(&a.social_topology, RelationshipEdge::key),
        spatial_topology: p.spatial_topology.apply(&a.spatial_topology, SpatialEdge::key),
    }
}
