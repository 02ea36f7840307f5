//! Focal neighbourhood slicing and sandbox mirroring.
//!
//! [`slice_ego_graph`] cuts the k-hop neighbourhood of a focal set at a
//! fabula anchor, with entity state reconstructed at that anchor so later
//! information cannot leak in. [`create_sandbox`] mirrors the slice as a
//! typed multigraph with its own value store and a restricted copy of the
//! world that simulations may edit freely.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::world::{
    reconstruct_entity, CausalEdge, EntitySnapshot, NodeFamily, RelationshipEdge, SpatialEdge, WorldError,
    WorldState,
};

pub const DEFAULT_HOPS: usize = 2;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EgoError {
    #[error("unknown focal `{0}`")]
    UnknownFocal(String),
    #[error("hop limit must be at least 1")]
    ZeroHops,
    #[error(transparent)]
    World(#[from] WorldError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EgoPayload {
    pub focal_ids: Vec<String>,
    pub anchor_fabula: i64,
    pub hop_limit: usize,
    pub nodes: BTreeMap<NodeFamily, Vec<String>>,
    pub snapshots: BTreeMap<String, EntitySnapshot>,
    pub causal_edges: Vec<CausalEdge>,
    pub relationship_edges: Vec<RelationshipEdge>,
    pub spatial_edges: Vec<SpatialEdge>,
}

impl EgoPayload {
    pub fn contains(&self, id: &str) -> bool {
        NodeFamily::of(id)
            .and_then(|f| self.nodes.get(&f))
            .is_some_and(|ids| ids.binary_search_by(|x| x.as_str().cmp(id)).is_ok())
    }

    pub fn node_ids(&self) -> BTreeSet<&str> {
        self.nodes.values().flatten().map(String::as_str).collect()
    }
}

type Adjacency = BTreeMap<String, BTreeSet<String>>;

fn link(adj: &mut Adjacency, a: &str, b: &str) {
    if a == b {
        return;
    }
    adj.entry(a.to_string()).or_default().insert(b.to_string());
    adj.entry(b.to_string()).or_default().insert(a.to_string());
}

/// Undirected adjacency over the three topologies, placement, ownership,
/// event participation and channel membership. Events in `hidden` are left
/// out entirely so the walk cannot pass through them.
fn adjacency(world: &WorldState, anchor: i64, hidden: &BTreeSet<&str>) -> Adjacency {
    let mut adj = Adjacency::new();
    let visible = |id: &str| !hidden.contains(id);

    for e in &world.causal_topology {
        if visible(&e.source_id) && visible(&e.target_id) {
            link(&mut adj, &e.source_id, &e.target_id);
            if let Some(cp) = &e.rel_counterpart_id {
                link(&mut adj, &e.source_id, cp);
            }
        }
    }
    for r in &world.social_topology {
        link(&mut adj, &r.source_id, &r.target_id);
    }
    for s in &world.spatial_topology {
        link(&mut adj, &s.source_id, &s.target_id);
    }
    for ent in &world.entities {
        if let Ok(snap) = reconstruct_entity(world, &ent.id, anchor) {
            if let Some(loc) = &snap.location_id {
                link(&mut adj, &ent.id, loc);
            }
        }
    }
    for obj in &world.objects {
        if let Some(loc) = &obj.location_id {
            link(&mut adj, &obj.id, loc);
        }
        if let Some(owner) = &obj.owner_id {
            link(&mut adj, &obj.id, owner);
        }
    }
    for ev in world.events.iter().filter(|e| visible(&e.id)) {
        for p in ev
            .actor_ids
            .iter()
            .chain(&ev.target_ids)
            .chain(ev.speaker_id.iter())
            .chain(&ev.addressee_ids)
            .chain(ev.location_id.iter())
            .chain(ev.via_channel_id.iter())
        {
            if visible(p) {
                link(&mut adj, &ev.id, p);
            }
        }
    }
    for ch in &world.channels {
        for (i, a) in ch.participant_ids.iter().enumerate() {
            link(&mut adj, &ch.id, a);
            for b in &ch.participant_ids[i + 1..] {
                link(&mut adj, a, b);
            }
        }
    }
    adj
}

/// k-hop neighbourhood of `focal_ids` at `anchor_fabula`.
///
/// Events after the anchor are excluded unless listed in `query_targets`;
/// listed targets are always included. World traits are always included.
pub fn slice_ego_graph(
    world: &WorldState,
    focal_ids: &[String],
    anchor_fabula: i64,
    k: usize,
    query_targets: &[String],
) -> Result<EgoPayload, EgoError> {
    if k == 0 {
        return Err(EgoError::ZeroHops);
    }
    for f in focal_ids {
        if !world.contains_node(f) {
            return Err(EgoError::UnknownFocal(f.clone()));
        }
    }
    let targets: BTreeSet<&str> = query_targets
        .iter()
        .map(String::as_str)
        .filter(|t| world.contains_node(t))
        .collect();
    let hidden: BTreeSet<&str> = world
        .events
        .iter()
        .filter(|e| e.fabula_time > anchor_fabula && !targets.contains(e.id.as_str()))
        .map(|e| e.id.as_str())
        .collect();
    let adj = adjacency(world, anchor_fabula, &hidden);

    let mut depth: BTreeMap<String, usize> = BTreeMap::new();
    let mut queue = VecDeque::new();
    for f in focal_ids {
        if !hidden.contains(f.as_str()) && depth.insert(f.clone(), 0).is_none() {
            queue.push_back(f.clone());
        }
    }
    while let Some(node) = queue.pop_front() {
        let d = depth[&node];
        if d == k {
            continue;
        }
        for next in adj.get(&node).into_iter().flatten() {
            if !depth.contains_key(next) {
                depth.insert(next.clone(), d + 1);
                queue.push_back(next.clone());
            }
        }
    }

    let mut included: BTreeSet<String> = depth.into_keys().collect();
    included.extend(targets.iter().map(|t| t.to_string()));
    included.extend(world.world_traits.iter().map(|w| w.id.clone()));

    let mut nodes: BTreeMap<NodeFamily, Vec<String>> = NodeFamily::ALL.iter().map(|f| (*f, Vec::new())).collect();
    for id in &included {
        if let Some(f) = NodeFamily::of(id) {
            nodes.get_mut(&f).expect("all families present").push(id.clone());
        }
    }

    let mut snapshots = BTreeMap::new();
    for id in &nodes[&NodeFamily::Entity] {
        snapshots.insert(id.clone(), reconstruct_entity(world, id, anchor_fabula)?);
    }

    let has = |id: &str| included.contains(id);
    let causal_edges = world
        .causal_topology
        .iter()
        .filter(|e| has(&e.source_id) && has(&e.target_id))
        .filter(|e| e.rel_counterpart_id.as_deref().is_none_or(has))
        .cloned()
        .collect();
    let relationship_edges = world
        .social_topology
        .iter()
        .filter(|e| has(&e.source_id) && has(&e.target_id))
        .cloned()
        .collect();
    let spatial_edges = world
        .spatial_topology
        .iter()
        .filter(|e| has(&e.source_id) && has(&e.target_id))
        .cloned()
        .collect();

    Ok(EgoPayload {
        focal_ids: focal_ids.to_vec(),
        anchor_fabula,
        hop_limit: k,
        nodes,
        snapshots,
        causal_edges,
        relationship_edges,
        spatial_edges,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryType {
    Observation,
    Intervention,
    Counterfactual,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SandboxEdgeKind {
    LocatedIn,
    OwnedBy,
    Causal,
    Relationship,
    ConnectedTo,
    CommunicatingWith,
    EavesdroppedBy,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SandboxEdge {
    pub source: String,
    pub target: String,
    pub kind: SandboxEdgeKind,
    /// Originating edge key for causal, relationship and spatial edges;
    /// channel id for channel-derived edges.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key: Option<String>,
}

/// Isolated simulation graph. Owns every value it holds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Sandbox {
    pub query_type: QueryType,
    pub anchor_fabula: i64,
    pub nodes: BTreeMap<String, NodeFamily>,
    pub edges: Vec<SandboxEdge>,
    /// Scalar store keyed by node id then attribute name.
    pub values: BTreeMap<String, BTreeMap<String, f64>>,
    /// Restricted world copy with entity state rebased to the anchor.
    pub world: WorldState,
    pub mutation_log: Vec<String>,
    pub blocked_log: Vec<String>,
}

impl Sandbox {
    pub fn value(&self, node: &str, attr: &str) -> Option<f64> {
        self.values.get(node).and_then(|m| m.get(attr)).copied()
    }

    pub fn set_value(&mut self, node: &str, attr: &str, v: f64) {
        self.values
            .entry(node.to_string())
            .or_default()
            .insert(attr.to_string(), v);
    }

    pub fn edges_of_kind(&self, kind: SandboxEdgeKind) -> impl Iterator<Item = &SandboxEdge> {
        self.edges.iter().filter(move |e| e.kind == kind)
    }
}

/// Restriction of `world` to the payload, with entities rebased to their
/// anchor snapshot and timelines cut at the anchor.
pub fn restrict_world(world: &WorldState, payload: &EgoPayload) -> WorldState {
    let keep = |id: &str| payload.contains(id);
    let mut out = world.clone();
    out.entities.retain(|e| keep(&e.id));
    for ent in &mut out.entities {
        let snap = &payload.snapshots[&ent.id];
        ent.traits = snap.traits.clone();
        ent.beliefs = snap.beliefs.clone();
        ent.status = snap.status;
        ent.location_id = snap.location_id.clone().filter(|l| keep(l));
        ent.state_timeline.clear();
    }
    out.events.retain(|e| keep(&e.id));
    out.locations.retain(|e| keep(&e.id));
    out.objects.retain(|e| keep(&e.id));
    out.channels.retain(|e| keep(&e.id));
    out.world_traits.retain(|e| keep(&e.id));
    for w in &mut out.world_traits {
        let (v, i) = w.value_at(payload.anchor_fabula);
        w.value = v;
        w.inertia = i;
        w.state_timeline.clear();
    }
    out.causal_topology = payload.causal_edges.clone();
    out.social_topology = payload.relationship_edges.clone();
    out.spatial_topology = payload.spatial_edges.clone();
    out
}

/// Mirrors a payload as a sandbox multigraph.
pub fn create_sandbox(world: &WorldState, payload: &EgoPayload, query_type: QueryType) -> Sandbox {
    let restricted = restrict_world(world, payload);
    let mut nodes = BTreeMap::new();
    for (family, ids) in &payload.nodes {
        for id in ids {
            nodes.insert(id.clone(), *family);
        }
    }
    let mut edges = BTreeSet::new();
    let mut edge = |source: &str, target: &str, kind, key: Option<String>| {
        edges.insert(SandboxEdge {
            source: source.to_string(),
            target: target.to_string(),
            kind,
            key,
        });
    };
    for ent in &restricted.entities {
        if let Some(loc) = &ent.location_id {
            edge(&ent.id, loc, SandboxEdgeKind::LocatedIn, None);
        }
    }
    for obj in &restricted.objects {
        if let Some(loc) = obj.location_id.as_deref().filter(|l| payload.contains(l)) {
            edge(&obj.id, loc, SandboxEdgeKind::LocatedIn, None);
        }
        if let Some(owner) = obj.owner_id.as_deref().filter(|o| payload.contains(o)) {
            edge(&obj.id, owner, SandboxEdgeKind::OwnedBy, None);
        }
    }
    for e in &restricted.causal_topology {
        edge(&e.source_id, &e.target_id, SandboxEdgeKind::Causal, Some(e.key()));
    }
    for r in &restricted.social_topology {
        edge(&r.source_id, &r.target_id, SandboxEdgeKind::Relationship, Some(r.key()));
    }
    for s in &restricted.spatial_topology {
        edge(&s.source_id, &s.target_id, SandboxEdgeKind::ConnectedTo, Some(s.key()));
    }
    let threshold = restricted.intelligibility_threshold;
    for ch in &restricted.channels {
        let members: Vec<&String> = ch.participant_ids.iter().filter(|p| payload.contains(p)).collect();
        for a in &members {
            for b in &members {
                if a != b {
                    edge(a, b, SandboxEdgeKind::CommunicatingWith, Some(ch.id.clone()));
                }
            }
        }
        for (listener, v) in &ch.intelligibility {
            let outsider = !ch.participant_ids.contains(listener);
            if outsider && *v >= threshold && payload.contains(listener) {
                edge(&ch.id, listener, SandboxEdgeKind::EavesdroppedBy, Some(ch.id.clone()));
            }
        }
    }

    let mut values: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ent in &restricted.entities {
        let slot = values.entry(ent.id.clone()).or_default();
        for (name, t) in &ent.traits {
            slot.insert(name.clone(), t.value);
        }
    }
    for loc in &restricted.locations {
        let slot = values.entry(loc.id.clone()).or_default();
        for (name, a) in &loc.ambient_state {
            slot.insert(name.clone(), a.value);
        }
    }
    for w in &restricted.world_traits {
        values.entry(w.id.clone()).or_default().insert("value".into(), w.value);
    }
    for r in &restricted.social_topology {
        let slot = values.entry(r.source_id.clone()).or_default();
        for (axis, m) in &r.metrics {
            slot.insert(format!("rel:{}:{}", r.target_id, axis.as_str()), m.value);
        }
    }

    Sandbox {
        query_type,
        anchor_fabula: payload.anchor_fabula,
        nodes,
        edges: edges.into_iter().collect(),
        values,
        world: restricted,
        mutation_log: Vec::new(),
        blocked_log: Vec::new(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::world::{Channel, Entity, EventNode, EventType};

    fn chain_world() -> WorldState {
        let mut w = WorldState::default();
        for id in ["ENT_A", "ENT_B", "ENT_C", "ENT_LONE"] {
            w.entities.push(Entity::new(id).with_trait("x", 0.5, 0.5));
        }
        let mut e1 = EventNode::new("EVT_1", EventType::Action, 100, 0);
        e1.actor_ids = vec!["ENT_A".into()];
        e1.target_ids = vec!["ENT_B".into()];
        let mut e2 = EventNode::new("EVT_2", EventType::Action, 900, 1);
        e2.actor_ids = vec!["ENT_B".into()];
        e2.target_ids = vec!["ENT_C".into()];
        w.events = vec![e1, e2];
        w
    }

    #[test]
    fn isolated_entity_slices_to_itself() {
        let w = chain_world();
        let p = slice_ego_graph(&w, &["ENT_LONE".into()], 1000, 1, &[]).unwrap();
        assert_eq!(p.node_ids().into_iter().collect::<Vec<_>>(), vec!["ENT_LONE"]);
    }

    #[test]
    fn future_events_are_cut_unless_targeted() {
        let w = chain_world();
        let p = slice_ego_graph(&w, &["ENT_A".into()], 500, 4, &[]).unwrap();
        assert!(p.contains("EVT_1") && p.contains("ENT_B"));
        assert!(!p.contains("EVT_2") && !p.contains("ENT_C"));
        let p = slice_ego_graph(&w, &["ENT_A".into()], 500, 4, &["EVT_2".into()]).unwrap();
        assert!(p.contains("EVT_2") && p.contains("ENT_C"));
    }

    #[test]
    fn unknown_focal_and_zero_hops() {
        let w = chain_world();
        assert_eq!(
            slice_ego_graph(&w, &["ENT_Q".into()], 0, 1, &[]),
            Err(EgoError::UnknownFocal("ENT_Q".into()))
        );
        assert_eq!(slice_ego_graph(&w, &["ENT_A".into()], 0, 0, &[]), Err(EgoError::ZeroHops));
    }

    #[test]
    fn channel_edges_in_sandbox() {
        let mut w = chain_world();
        w.channels.push(Channel {
            id: "CHN_X".into(),
            medium: "speech".into(),
            directionality: "bidirectional".into(),
            participant_ids: vec!["ENT_A".into(), "ENT_B".into()],
            intelligibility: [("ENT_C".to_string(), 0.8), ("ENT_LONE".to_string(), 0.3)].into(),
            established_at_fabula: None,
            terminated_at_fabula: None,
        });
        let focals: Vec<String> = ["ENT_A", "ENT_C", "ENT_LONE"].map(String::from).to_vec();
        let p = slice_ego_graph(&w, &focals, 1000, 2, &[]).unwrap();
        let sb = create_sandbox(&w, &p, QueryType::Intervention);
        let comm: Vec<_> = sb.edges_of_kind(SandboxEdgeKind::CommunicatingWith).collect();
        assert_eq!(comm.len(), 2);
        let eaves: Vec<_> = sb
            .edges_of_kind(SandboxEdgeKind::EavesdroppedBy)
            .map(|e| e.target.as_str())
            .collect();
        assert_eq!(eaves, vec!["ENT_C"]);
    }
}
