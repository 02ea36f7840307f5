//! Typed storyworld schema.
//!
//! A [`WorldState`] is the whole story as a graph: six node families
//! (entities, events, locations, objects, channels, world traits), three
//! edge families (causal, relationship, spatial) and a branch tag. Values
//! are plain data; every engine stage reads a world and produces a new
//! one rather than mutating it in place.

mod reconstruct;
mod validate;

use std::collections::{BTreeMap, VecDeque};
use std::fmt;

use serde::{Deserialize, Deserializer, Serialize, Serializer};
use sha2::{Digest, Sha256};

pub use reconstruct::{reconstruct_entity, terminal_actual, EntitySnapshot};
pub use validate::{validate_world, Finding, Severity, ValidationReport};

/// Errors raised by point-in-time reads over a world.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum WorldError {
    #[error("unknown entity `{0}`")]
    UnknownEntity(String),
    #[error("entity `{entity}` carries no trait `{trait_name}`")]
    TraitAbsent { entity: String, trait_name: String },
    #[error("malformed world JSON: {0}")]
    Parse(String),
}

/// The six node families, identified by id prefix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum NodeFamily {
    Entity,
    #[serde(alias = "EventNode")]
    Event,
    Location,
    Object,
    Channel,
    #[serde(alias = "WorldTrait")]
    GlobalTrait,
}

impl NodeFamily {
    pub const ALL: [NodeFamily; 6] = [
        NodeFamily::Entity,
        NodeFamily::Event,
        NodeFamily::Location,
        NodeFamily::Object,
        NodeFamily::Channel,
        NodeFamily::GlobalTrait,
    ];

    pub fn prefix(self) -> &'static str {
        match self {
            NodeFamily::Entity => "ENT_",
            NodeFamily::Event => "EVT_",
            NodeFamily::Location => "LOC_",
            NodeFamily::Object => "OBJ_",
            NodeFamily::Channel => "CHN_",
            NodeFamily::GlobalTrait => "WORLD_",
        }
    }

    /// Family implied by an id's prefix, if any.
    pub fn of(id: &str) -> Option<NodeFamily> {
        NodeFamily::ALL.into_iter().find(|f| id.starts_with(f.prefix()))
    }

    /// Families that carry mutable state (traits, ambient values, world values).
    pub fn is_state(self) -> bool {
        matches!(
            self,
            NodeFamily::Entity | NodeFamily::GlobalTrait | NodeFamily::Location
        )
    }
}

impl fmt::Display for NodeFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = match self {
            NodeFamily::Entity => "entity",
            NodeFamily::Event => "event",
            NodeFamily::Location => "location",
            NodeFamily::Object => "object",
            NodeFamily::Channel => "channel",
            NodeFamily::GlobalTrait => "world_trait",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EvidenceStrength {
    Weak,
    #[default]
    Moderate,
    Strong,
}

impl EvidenceStrength {
    /// Evidence-strength weight used by propagation and the scorers.
    pub fn weight(self) -> f64 {
        match self {
            EvidenceStrength::Weak => 0.25,
            EvidenceStrength::Moderate => 0.5,
            EvidenceStrength::Strong => 0.75,
        }
    }
}

/// Branch tag carried by a world and, implicitly, by all of its nodes and edges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BranchTag {
    #[default]
    Factual,
    Shadow,
}

impl fmt::Display for BranchTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BranchTag::Factual => "factual",
            BranchTag::Shadow => "shadow",
        })
    }
}

pub fn clamp_unit(v: f64) -> f64 {
    v.clamp(0.0, 1.0)
}

pub fn clamp_axis(v: f64) -> f64 {
    v.clamp(-1.0, 1.0)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitVector {
    pub value: f64,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default)]
    pub evidence_strength: EvidenceStrength,
}

fn default_inertia() -> f64 {
    0.5
}

impl TraitVector {
    pub fn new(value: f64, inertia: f64, evidence_strength: EvidenceStrength) -> Self {
        Self {
            value: clamp_unit(value),
            inertia: clamp_unit(inertia),
            evidence_strength,
        }
    }

    pub fn set_value(&mut self, v: f64) {
        self.value = clamp_unit(v);
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Belief {
    pub target_id: String,
    #[serde(default)]
    pub perceived_state: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default = "default_confidence")]
    pub confidence: f64,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default)]
    pub established_at_fabula: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquired_via_event_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub acquired_via_channel_id: Option<String>,
}

fn default_confidence() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EntityStatus {
    #[default]
    Alive,
    Dead,
    Unknown,
}

/// A sparse change to one trait: absolute value and/or inertia.
///
/// Accepts either `{"value": 0.85, "inertia": 0.4}` or a bare number.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct TraitUpdate {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
}

impl<'de> Deserialize<'de> for TraitUpdate {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Bare(f64),
            Full {
                #[serde(default)]
                value: Option<f64>,
                #[serde(default)]
                inertia: Option<f64>,
            },
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Bare(v) => TraitUpdate {
                value: Some(v),
                inertia: None,
            },
            Repr::Full { value, inertia } => TraitUpdate { value, inertia },
        })
    }
}

/// One entry of an entity's `state_timeline`.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TimelineEntry {
    pub fabula_time: i64,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub traits: BTreeMap<String, TraitUpdate>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beliefs_added: Vec<Belief>,
    /// Target ids whose beliefs are withdrawn.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub beliefs_invalidated: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub status: Option<EntityStatus>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Entity {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub traits: BTreeMap<String, TraitVector>,
    #[serde(default)]
    pub beliefs: Vec<Belief>,
    #[serde(default)]
    pub constants: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_id: Option<String>,
    #[serde(default)]
    pub status: EntityStatus,
    #[serde(default)]
    pub state_timeline: Vec<TimelineEntry>,
}

impl Entity {
    pub fn new(id: impl Into<String>) -> Self {
        Self {
            id: id.into(),
            name: None,
            traits: BTreeMap::new(),
            beliefs: Vec::new(),
            constants: Vec::new(),
            location_id: None,
            status: EntityStatus::Alive,
            state_timeline: Vec::new(),
        }
    }

    pub fn with_trait(mut self, name: &str, value: f64, inertia: f64) -> Self {
        self.traits.insert(
            name.to_string(),
            TraitVector::new(value, inertia, EvidenceStrength::Moderate),
        );
        self
    }
}

/// Event kinds. The set is open: unrecognised names survive a round trip
/// as [`EventType::Other`].
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum EventType {
    Action,
    Utterance,
    Outcome,
    Revelation,
    Choice,
    Other(String),
}

impl EventType {
    pub fn as_str(&self) -> &str {
        match self {
            EventType::Action => "action",
            EventType::Utterance => "utterance",
            EventType::Outcome => "outcome",
            EventType::Revelation => "revelation",
            EventType::Choice => "choice",
            EventType::Other(s) => s,
        }
    }

    pub fn parse(s: &str) -> Self {
        match s {
            "action" => EventType::Action,
            "utterance" => EventType::Utterance,
            "outcome" => EventType::Outcome,
            "revelation" => EventType::Revelation,
            "choice" => EventType::Choice,
            other => EventType::Other(other.to_string()),
        }
    }
}

impl Serialize for EventType {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(self.as_str())
    }
}

impl<'de> Deserialize<'de> for EventType {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        Ok(EventType::parse(&s))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TruthValue {
    True,
    False,
    Uncertain,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EventNode {
    pub id: String,
    pub event_type: EventType,
    #[serde(default)]
    pub actor_ids: Vec<String>,
    #[serde(default)]
    pub target_ids: Vec<String>,
    pub fabula_time: i64,
    pub syuzhet_index: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_id: Option<String>,
    /// Narrative intensity; 1 when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub speaker_id: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub addressee_ids: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via_channel_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub content: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub truth_value: Option<TruthValue>,
}

impl EventNode {
    pub fn new(id: impl Into<String>, event_type: EventType, fabula_time: i64, syuzhet_index: i64) -> Self {
        Self {
            id: id.into(),
            event_type,
            actor_ids: Vec::new(),
            target_ids: Vec::new(),
            fabula_time,
            syuzhet_index,
            location_id: None,
            weight: None,
            description: None,
            speaker_id: None,
            addressee_ids: Vec::new(),
            via_channel_id: None,
            content: None,
            truth_value: None,
        }
    }

    pub fn intensity(&self) -> f64 {
        self.weight.unwrap_or(1.0)
    }

    /// Entities that take part in the event: actors, targets, speaker and addressees.
    pub fn participants(&self) -> impl Iterator<Item = &str> {
        self.actor_ids
            .iter()
            .chain(self.target_ids.iter())
            .chain(self.speaker_id.iter())
            .chain(self.addressee_ids.iter())
            .map(String::as_str)
            .filter(|id| NodeFamily::of(id) == Some(NodeFamily::Entity))
    }

    pub fn involves(&self, entity_id: &str) -> bool {
        self.participants().any(|p| p == entity_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AmbientVector {
    pub value: f64,
    /// Stored for fidelity with authored fixtures; no computation reads it.
    #[serde(default)]
    pub volatility: f64,
    #[serde(default)]
    pub evidence_strength: EvidenceStrength,
}

impl<'de> Deserialize<'de> for AmbientVector {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Repr {
            Bare(f64),
            Full {
                value: f64,
                #[serde(default)]
                volatility: f64,
                #[serde(default)]
                evidence_strength: EvidenceStrength,
            },
        }
        Ok(match Repr::deserialize(d)? {
            Repr::Bare(value) => AmbientVector {
                value,
                volatility: 0.0,
                evidence_strength: EvidenceStrength::Moderate,
            },
            Repr::Full {
                value,
                volatility,
                evidence_strength,
            } => AmbientVector {
                value,
                volatility,
                evidence_strength,
            },
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default)]
    pub ambient_state: BTreeMap<String, AmbientVector>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub capacity: Option<u32>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Affordance {
    pub action: String,
    pub target_type: NodeFamily,
    /// Trait the wielder must carry at or above the support threshold.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub required_trait: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Object {
    pub id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub location_id: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub owner_id: Option<String>,
    #[serde(default)]
    pub properties: BTreeMap<String, String>,
    #[serde(default)]
    pub affordances: Vec<Affordance>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Channel {
    pub id: String,
    #[serde(default)]
    pub medium: String,
    #[serde(default)]
    pub directionality: String,
    #[serde(default)]
    pub participant_ids: Vec<String>,
    #[serde(default)]
    pub intelligibility: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub established_at_fabula: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub terminated_at_fabula: Option<i64>,
}

impl Channel {
    /// Per-entity intelligibility; participants without an entry hear clearly.
    pub fn intelligibility_for(&self, entity_id: &str) -> f64 {
        match self.intelligibility.get(entity_id) {
            Some(v) => *v,
            None if self.participant_ids.iter().any(|p| p == entity_id) => 1.0,
            None => 0.0,
        }
    }

    pub fn is_open_at(&self, t: i64) -> bool {
        self.established_at_fabula.is_none_or(|s| s <= t)
            && self.terminated_at_fabula.is_none_or(|e| t < e)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldTraitSnapshot {
    pub fabula_time: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inertia: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalTrait {
    pub id: String,
    pub value: f64,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default)]
    pub evidence_strength: EvidenceStrength,
    #[serde(default)]
    pub state_timeline: Vec<WorldTraitSnapshot>,
}

impl GlobalTrait {
    pub fn value_at(&self, t: i64) -> (f64, f64) {
        let mut value = self.value;
        let mut inertia = self.inertia;
        let mut entries: Vec<&WorldTraitSnapshot> = self.state_timeline.iter().collect();
        entries.sort_by_key(|e| e.fabula_time);
        for e in entries.into_iter().filter(|e| e.fabula_time <= t) {
            if let Some(v) = e.value {
                value = clamp_unit(v);
            }
            if let Some(i) = e.inertia {
                inertia = clamp_unit(i);
            }
        }
        (value, inertia)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CausalityType {
    ChainReaction,
    Mutation,
    MutationSocial,
    AffordanceGate,
    AmbientPropagation,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalEdge {
    /// Optional stable id; derived from endpoints when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub id: Option<String>,
    pub source_id: String,
    pub target_id: String,
    pub causality_type: CausalityType,
    #[serde(default)]
    pub mechanism: String,
    #[serde(default)]
    pub evidence_strength: EvidenceStrength,
    #[serde(default)]
    pub causal_force: f64,
    #[serde(default)]
    pub fabula_time: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub propagation_delay: Option<i64>,
    /// Attribute of the source read as the parent value (trait, ambient key).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_trait: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trait_target: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trait_delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rel_counterpart_id: Option<String>,
}

impl CausalEdge {
    pub fn new(source: &str, target: &str, causality_type: CausalityType) -> Self {
        Self {
            id: None,
            source_id: source.to_string(),
            target_id: target.to_string(),
            causality_type,
            mechanism: String::new(),
            evidence_strength: EvidenceStrength::Moderate,
            causal_force: 5.0,
            fabula_time: 0,
            propagation_delay: None,
            source_trait: None,
            trait_target: None,
            trait_delta: None,
            rel_counterpart_id: None,
        }
    }

    /// Stable identity used by results, diffs and briefs.
    pub fn key(&self) -> String {
        if let Some(id) = &self.id {
            return id.clone();
        }
        let mut key = format!("{}->{}", self.source_id, self.target_id);
        if let Some(t) = &self.trait_target {
            key.push('.');
            key.push_str(t);
        }
        if let Some(c) = &self.rel_counterpart_id {
            key.push('@');
            key.push_str(c);
        }
        key
    }

    /// Edge weight: evidence-strength weight times normalised causal force.
    pub fn weight(&self) -> f64 {
        self.evidence_strength.weight() * (self.causal_force.clamp(0.0, 10.0) / 10.0)
    }

    /// True for edges that push a trait or relationship axis rather than
    /// enabling an event.
    pub fn is_trait_impulse(&self) -> bool {
        self.trait_target.is_some()
            && matches!(
                NodeFamily::of(&self.target_id),
                Some(NodeFamily::Entity | NodeFamily::GlobalTrait | NodeFamily::Location)
            )
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Axis {
    Affinity,
    Fear,
    PowerDynamic,
}

impl Axis {
    pub const ALL: [Axis; 3] = [Axis::Affinity, Axis::Fear, Axis::PowerDynamic];

    pub fn as_str(self) -> &'static str {
        match self {
            Axis::Affinity => "affinity",
            Axis::Fear => "fear",
            Axis::PowerDynamic => "power_dynamic",
        }
    }

    pub fn parse(s: &str) -> Option<Axis> {
        Axis::ALL.into_iter().find(|a| a.as_str() == s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisMetric {
    pub value: f64,
    #[serde(default = "default_inertia")]
    pub inertia: f64,
    #[serde(default)]
    pub evidence_strength: EvidenceStrength,
    #[serde(default)]
    pub last_updated_fabula: i64,
    #[serde(default = "default_true")]
    pub observed: bool,
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationshipEdge {
    pub source_id: String,
    pub target_id: String,
    #[serde(default)]
    pub metrics: BTreeMap<Axis, AxisMetric>,
}

impl RelationshipEdge {
    pub fn key(&self) -> String {
        format!("{}->{}", self.source_id, self.target_id)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpatialEdge {
    pub source_id: String,
    pub target_id: String,
    #[serde(default)]
    pub is_locked: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub barrier_item_id: Option<String>,
}

impl SpatialEdge {
    pub fn key(&self) -> String {
        format!("{}->{}", self.source_id, self.target_id)
    }
}

/// The full typed graph of one story version.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(default)]
    pub world_id: BranchTag,
    #[serde(default = "default_spacing")]
    pub fabula_time_spacing: i64,
    #[serde(default = "default_threshold")]
    pub intelligibility_threshold: f64,
    #[serde(default)]
    pub entities: Vec<Entity>,
    #[serde(default)]
    pub events: Vec<EventNode>,
    #[serde(default)]
    pub locations: Vec<Location>,
    #[serde(default)]
    pub objects: Vec<Object>,
    #[serde(default)]
    pub channels: Vec<Channel>,
    #[serde(default)]
    pub world_traits: Vec<GlobalTrait>,
    #[serde(default)]
    pub causal_topology: Vec<CausalEdge>,
    #[serde(default)]
    pub social_topology: Vec<RelationshipEdge>,
    #[serde(default)]
    pub spatial_topology: Vec<SpatialEdge>,
}

fn default_spacing() -> i64 {
    100
}

fn default_threshold() -> f64 {
    0.5
}

impl Default for WorldState {
    fn default() -> Self {
        Self {
            title: None,
            world_id: BranchTag::Factual,
            fabula_time_spacing: default_spacing(),
            intelligibility_threshold: default_threshold(),
            entities: Vec::new(),
            events: Vec::new(),
            locations: Vec::new(),
            objects: Vec::new(),
            channels: Vec::new(),
            world_traits: Vec::new(),
            causal_topology: Vec::new(),
            social_topology: Vec::new(),
            spatial_topology: Vec::new(),
        }
    }
}

impl WorldState {
    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        serde_json::from_str(text).map_err(|e| WorldError::Parse(e.to_string()))
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("world state serializes")
    }

    /// SHA-256 over the compact JSON encoding.
    pub fn content_hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("world state serializes");
        hex::encode(Sha256::digest(&bytes))
    }

    pub fn entity(&self, id: &str) -> Option<&Entity> {
        self.entities.iter().find(|e| e.id == id)
    }

    pub fn entity_mut(&mut self, id: &str) -> Option<&mut Entity> {
        self.entities.iter_mut().find(|e| e.id == id)
    }

    pub fn event(&self, id: &str) -> Option<&EventNode> {
        self.events.iter().find(|e| e.id == id)
    }

    pub fn location(&self, id: &str) -> Option<&Location> {
        self.locations.iter().find(|e| e.id == id)
    }

    pub fn object(&self, id: &str) -> Option<&Object> {
        self.objects.iter().find(|e| e.id == id)
    }

    pub fn channel(&self, id: &str) -> Option<&Channel> {
        self.channels.iter().find(|e| e.id == id)
    }

    pub fn world_trait(&self, id: &str) -> Option<&GlobalTrait> {
        self.world_traits.iter().find(|e| e.id == id)
    }

    pub fn relationship(&self, source: &str, target: &str) -> Option<&RelationshipEdge> {
        self.social_topology
            .iter()
            .find(|r| r.source_id == source && r.target_id == target)
    }

    /// Whether a node with this id exists in the family its prefix names.
    pub fn contains_node(&self, id: &str) -> bool {
        match NodeFamily::of(id) {
            Some(NodeFamily::Entity) => self.entity(id).is_some(),
            Some(NodeFamily::Event) => self.event(id).is_some(),
            Some(NodeFamily::Location) => self.location(id).is_some(),
            Some(NodeFamily::Object) => self.object(id).is_some(),
            Some(NodeFamily::Channel) => self.channel(id).is_some(),
            Some(NodeFamily::GlobalTrait) => self.world_trait(id).is_some(),
            None => false,
        }
    }

    /// All node ids of one family, in collection order.
    pub fn ids(&self, family: NodeFamily) -> Vec<&str> {
        match family {
            NodeFamily::Entity => self.entities.iter().map(|n| n.id.as_str()).collect(),
            NodeFamily::Event => self.events.iter().map(|n| n.id.as_str()).collect(),
            NodeFamily::Location => self.locations.iter().map(|n| n.id.as_str()).collect(),
            NodeFamily::Object => self.objects.iter().map(|n| n.id.as_str()).collect(),
            NodeFamily::Channel => self.channels.iter().map(|n| n.id.as_str()).collect(),
            NodeFamily::GlobalTrait => self.world_traits.iter().map(|n| n.id.as_str()).collect(),
        }
    }

    /// Latest fabula time mentioned anywhere in the world.
    pub fn max_fabula(&self) -> i64 {
        let events = self.events.iter().map(|e| e.fabula_time);
        let timelines = self
            .entities
            .iter()
            .flat_map(|e| e.state_timeline.iter().map(|t| t.fabula_time));
        let world = self
            .world_traits
            .iter()
            .flat_map(|w| w.state_timeline.iter().map(|t| t.fabula_time));
        events.chain(timelines).chain(world).max().unwrap_or(0)
    }

    pub fn min_syuzhet(&self) -> Option<i64> {
        self.events.iter().map(|e| e.syuzhet_index).min()
    }

    pub fn max_syuzhet(&self) -> Option<i64> {
        self.events.iter().map(|e| e.syuzhet_index).max()
    }

    /// Renumbers syuzhet indices to a contiguous run that keeps the current
    /// order and starting index.
    pub fn renumber_syuzhet(&mut self) {
        let Some(start) = self.min_syuzhet() else {
            return;
        };
        let mut order: Vec<usize> = (0..self.events.len()).collect();
        order.sort_by_key(|&i| (self.events[i].syuzhet_index, self.events[i].id.clone()));
        for (rank, i) in order.into_iter().enumerate() {
            self.events[i].syuzhet_index = start + rank as i64;
        }
    }

    /// Fewest unlocked spatial hops between two locations, treating spatial
    /// edges as undirected. `None` when no unlocked route exists.
    pub fn spatial_hops(&self, from: &str, to: &str) -> Option<usize> {
        let mut dist: BTreeMap<&str, usize> = BTreeMap::from([(from, 0)]);
        let mut queue: VecDeque<&str> = VecDeque::from([from]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                return dist.get(n).copied();
            }
            let d = dist[n];
            for s in self.spatial_topology.iter().filter(|s| !s.is_locked) {
                let next = if s.source_id == n {
                    s.target_id.as_str()
                } else if s.target_id == n {
                    s.source_id.as_str()
                } else {
                    continue;
                };
                if !dist.contains_key(next) {
                    dist.insert(next, d + 1);
                    queue.push_back(next);
                }
            }
        }
        None
    }

    /// Removes an event together with every edge and provenance that cites it.
    pub fn remove_event(&mut self, id: &str) -> bool {
        let before = self.events.len();
        self.events.retain(|e| e.id != id);
        if self.events.len() == before {
            return false;
        }
        self.causal_topology
            .retain(|e| e.source_id != id && e.target_id != id);
        for ent in &mut self.entities {
            ent.beliefs
                .retain(|b| b.acquired_via_event_id.as_deref() != Some(id) && b.target_id != id);
            for entry in &mut ent.state_timeline {
                entry
                    .beliefs_added
                    .retain(|b| b.acquired_via_event_id.as_deref() != Some(id) && b.target_id != id);
                entry.beliefs_invalidated.retain(|t| t != id);
            }
        }
        for ev in &mut self.events {
            ev.target_ids.retain(|t| t != id);
        }
        true
    }
}
