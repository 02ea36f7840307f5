//! Programmatic schema validation. Findings are data, never failures.

use std::collections::{BTreeMap, BTreeSet};

use petgraph::graph::DiGraph;
use serde::{Deserialize, Serialize};

use super::{reconstruct_entity, Axis, CausalEdge, CausalityType, EntityStatus, EventType, NodeFamily, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Finding {
    pub subject_id: String,
    pub rule: String,
    pub message: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub errors: Vec<Finding>,
    pub warnings: Vec<Finding>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.errors.is_empty()
    }

    pub fn has_rule(&self, rule: &str) -> bool {
        self.errors.iter().chain(&self.warnings).any(|f| f.rule == rule)
    }
}

struct Collector {
    errors: BTreeSet<Finding>,
    warnings: BTreeSet<Finding>,
}

impl Collector {
    fn push(&mut self, severity: Severity, subject: &str, rule: &str, message: String) {
        let f = Finding {
            subject_id: subject.to_string(),
            rule: rule.to_string(),
            message,
        };
        match severity {
            Severity::Error => self.errors.insert(f),
            Severity::Warning => self.warnings.insert(f),
        };
    }

    fn error(&mut self, subject: &str, rule: &str, message: String) {
        self.push(Severity::Error, subject, rule, message);
    }

    fn warn(&mut self, subject: &str, rule: &str, message: String) {
        self.push(Severity::Warning, subject, rule, message);
    }
}

/// Checks id closure, type constraints, modality endpoints, syuzhet
/// contiguity, value ranges, timeline order and the alive-actor rule.
///
/// The report is sorted, so it does not depend on collection order.
pub fn validate_world(world: &WorldState) -> ValidationReport {
    let mut c = Collector {
        errors: BTreeSet::new(),
        warnings: BTreeSet::new(),
    };

    check_ids(world, &mut c);
    check_references(world, &mut c);
    check_events(world, &mut c);
    check_ranges(world, &mut c);
    check_causal(world, &mut c);
    check_social(world, &mut c);
    check_timelines(world, &mut c);

    ValidationReport {
        errors: c.errors.into_iter().collect(),
        warnings: c.warnings.into_iter().collect(),
    }
}

fn check_ids(world: &WorldState, c: &mut Collector) {
    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for family in NodeFamily::ALL {
        for id in world.ids(family) {
            *seen.entry(id).or_default() += 1;
            if !id.starts_with(family.prefix()) {
                c.error(
                    id,
                    "id_prefix",
                    format!("{family} id must start with `{}`", family.prefix()),
                );
            }
        }
    }
    for (id, n) in seen {
        if n > 1 {
            c.error(id, "duplicate_id", format!("id declared {n} times"));
        }
    }
}

fn expect_ref(world: &WorldState, c: &mut Collector, subject: &str, field: &str, id: &str, allowed: &[NodeFamily]) {
    let family = NodeFamily::of(id);
    let family_ok = family.is_some_and(|f| allowed.contains(&f));
    if !family_ok || !world.contains_node(id) {
        c.error(
            subject,
            "unresolved_reference",
            format!("{field} references `{id}` which does not resolve"),
        );
    }
}

const ANY: &[NodeFamily] = &NodeFamily::ALL;
const ENT: &[NodeFamily] = &[NodeFamily::Entity];
const LOC: &[NodeFamily] = &[NodeFamily::Location];
const EVT: &[NodeFamily] = &[NodeFamily::Event];
const CHN: &[NodeFamily] = &[NodeFamily::Channel];
const OBJ: &[NodeFamily] = &[NodeFamily::Object];

fn check_references(world: &WorldState, c: &mut Collector) {
    for ent in &world.entities {
        if let Some(loc) = &ent.location_id {
            expect_ref(world, c, &ent.id, "location_id", loc, LOC);
        }
        let timeline_beliefs = ent.state_timeline.iter().flat_map(|e| e.beliefs_added.iter());
        for b in ent.beliefs.iter().chain(timeline_beliefs) {
            expect_ref(world, c, &ent.id, "belief.target_id", &b.target_id, ANY);
            if let Some(e) = &b.acquired_via_event_id {
                expect_ref(world, c, &ent.id, "belief.acquired_via_event_id", e, EVT);
            }
            if let Some(ch) = &b.acquired_via_channel_id {
                expect_ref(world, c, &ent.id, "belief.acquired_via_channel_id", ch, CHN);
            }
        }
        for entry in &ent.state_timeline {
            if let Some(loc) = &entry.location_id {
                expect_ref(world, c, &ent.id, "state_timeline.location_id", loc, LOC);
            }
            for t in &entry.beliefs_invalidated {
                expect_ref(world, c, &ent.id, "state_timeline.beliefs_invalidated", t, ANY);
            }
        }
    }
    for ev in &world.events {
        for a in &ev.actor_ids {
            expect_ref(world, c, &ev.id, "actor_ids", a, ANY);
        }
        for t in &ev.target_ids {
            expect_ref(world, c, &ev.id, "target_ids", t, ANY);
        }
        if let Some(loc) = &ev.location_id {
            expect_ref(world, c, &ev.id, "location_id", loc, LOC);
        }
        if let Some(s) = &ev.speaker_id {
            expect_ref(world, c, &ev.id, "speaker_id", s, ENT);
        }
        for a in &ev.addressee_ids {
            expect_ref(world, c, &ev.id, "addressee_ids", a, ENT);
        }
        if let Some(ch) = &ev.via_channel_id {
            expect_ref(world, c, &ev.id, "via_channel_id", ch, CHN);
        }
    }
    for obj in &world.objects {
        if let Some(loc) = &obj.location_id {
            expect_ref(world, c, &obj.id, "location_id", loc, LOC);
        }
        if let Some(owner) = &obj.owner_id {
            expect_ref(world, c, &obj.id, "owner_id", owner, ENT);
        }
    }
    for ch in &world.channels {
        for p in &ch.participant_ids {
            expect_ref(world, c, &ch.id, "participant_ids", p, ENT);
        }
        for p in ch.intelligibility.keys() {
            expect_ref(world, c, &ch.id, "intelligibility", p, ENT);
        }
    }
    for e in &world.causal_topology {
        let key = e.key();
        expect_ref(world, c, &key, "source_id", &e.source_id, ANY);
        expect_ref(world, c, &key, "target_id", &e.target_id, ANY);
        if let Some(cp) = &e.rel_counterpart_id {
            expect_ref(world, c, &key, "rel_counterpart_id", cp, ENT);
        }
    }
    for r in &world.social_topology {
        let key = r.key();
        expect_ref(world, c, &key, "source_id", &r.source_id, ENT);
        expect_ref(world, c, &key, "target_id", &r.target_id, ENT);
    }
    for s in &world.spatial_topology {
        let key = s.key();
        expect_ref(world, c, &key, "source_id", &s.source_id, LOC);
        expect_ref(world, c, &key, "target_id", &s.target_id, LOC);
        if let Some(b) = &s.barrier_item_id {
            expect_ref(world, c, &key, "barrier_item_id", b, OBJ);
        }
    }
}

fn check_events(world: &WorldState, c: &mut Collector) {
    let mut by_index: BTreeMap<i64, Vec<&str>> = BTreeMap::new();
    for ev in &world.events {
        by_index.entry(ev.syuzhet_index).or_default().push(&ev.id);
        let is_utt = ev.event_type == EventType::Utterance;
        if let EventType::Other(name) = &ev.event_type {
            c.warn(&ev.id, "event_type_unknown", format!("event_type `{name}` is not a known kind"));
        }
        if is_utt {
            let mut missing = Vec::new();
            if ev.speaker_id.is_none() {
                missing.push("speaker_id");
            }
            if ev.via_channel_id.is_none() {
                missing.push("via_channel_id");
            }
            if ev.truth_value.is_none() {
                missing.push("truth_value");
            }
            if !missing.is_empty() {
                c.error(
                    &ev.id,
                    "utterance_fields",
                    format!("utterance is missing {}", missing.join(", ")),
                );
            }
        } else {
            let present = ev.speaker_id.is_some()
                || !ev.addressee_ids.is_empty()
                || ev.via_channel_id.is_some()
                || ev.content.is_some()
                || ev.truth_value.is_some();
            if present {
                c.error(
                    &ev.id,
                    "utterance_fields",
                    format!("{} event carries utterance-only fields", ev.event_type.as_str()),
                );
            }
        }
        if let Some(w) = ev.weight {
            if !(w.is_finite() && w >= 0.0) {
                c.error(&ev.id, "value_range", format!("weight {w} must be non-negative"));
            }
        }
        for actor in ev.actor_ids.iter().filter(|a| NodeFamily::of(a) == Some(NodeFamily::Entity)) {
            // Status just before the event, so an actor dying in the event is not flagged.
            if let Ok(snap) = reconstruct_entity(world, actor, ev.fabula_time - 1) {
                if snap.status == EntityStatus::Dead {
                    c.error(
                        &ev.id,
                        "alive_actor",
                        format!("actor `{actor}` is dead at fabula {}", ev.fabula_time),
                    );
                }
            }
        }
    }
    for (idx, ids) in &by_index {
        if ids.len() > 1 {
            for id in ids {
                c.error(id, "syuzhet_unique", format!("syuzhet_index {idx} is shared by {} events", ids.len()));
            }
        }
    }
    if let (Some((&lo, _)), Some((&hi, _))) = (by_index.first_key_value(), by_index.last_key_value()) {
        let expected = (hi - lo + 1) as usize;
        if by_index.len() != expected {
            let gaps: Vec<String> = (lo..=hi)
                .filter(|i| !by_index.contains_key(i))
                .take(5)
                .map(|i| i.to_string())
                .collect();
            c.error(
                "WORLD",
                "syuzhet_contiguous",
                format!("syuzhet indices skip {}", gaps.join(", ")),
            );
        }
    }
}

fn in_unit(v: f64) -> bool {
    (0.0..=1.0).contains(&v)
}

fn check_ranges(world: &WorldState, c: &mut Collector) {
    let unit = |c: &mut Collector, subject: &str, what: String, v: f64| {
        if !in_unit(v) {
            c.error(subject, "value_range", format!("{what} = {v} outside [0, 1]"));
        }
    };
    for ent in &world.entities {
        for (name, t) in &ent.traits {
            unit(c, &ent.id, format!("trait {name}.value"), t.value);
            unit(c, &ent.id, format!("trait {name}.inertia"), t.inertia);
        }
        let timeline_beliefs = ent.state_timeline.iter().flat_map(|e| e.beliefs_added.iter());
        for b in ent.beliefs.iter().chain(timeline_beliefs) {
            unit(c, &ent.id, format!("belief {}.confidence", b.target_id), b.confidence);
            unit(c, &ent.id, format!("belief {}.inertia", b.target_id), b.inertia);
        }
        for entry in &ent.state_timeline {
            for (name, u) in &entry.traits {
                if let Some(v) = u.value {
                    unit(c, &ent.id, format!("timeline {name}.value"), v);
                }
                if let Some(i) = u.inertia {
                    unit(c, &ent.id, format!("timeline {name}.inertia"), i);
                }
            }
        }
    }
    for loc in &world.locations {
        for (name, a) in &loc.ambient_state {
            unit(c, &loc.id, format!("ambient {name}.value"), a.value);
        }
    }
    for ch in &world.channels {
        for (p, v) in &ch.intelligibility {
            unit(c, &ch.id, format!("intelligibility[{p}]"), *v);
        }
    }
    for w in &world.world_traits {
        unit(c, &w.id, "value".into(), w.value);
        unit(c, &w.id, "inertia".into(), w.inertia);
    }
    for e in &world.causal_topology {
        if !(0.0..=10.0).contains(&e.causal_force) {
            c.error(
                &e.key(),
                "value_range",
                format!("causal_force = {} outside [0, 10]", e.causal_force),
            );
        }
    }
    for r in &world.social_topology {
        for (axis, m) in &r.metrics {
            if !(-1.0..=1.0).contains(&m.value) {
                c.error(
                    &r.key(),
                    "value_range",
                    format!("{} = {} outside [-1, 1]", axis.as_str(), m.value),
                );
            }
            unit(c, &r.key(), format!("{}.inertia", axis.as_str()), m.inertia);
        }
    }
    if !in_unit(world.intelligibility_threshold) {
        c.error(
            "WORLD",
            "value_range",
            format!("intelligibility_threshold = {} outside [0, 1]", world.intelligibility_threshold),
        );
    }
}

/// Allowed (source, target) families per modality.
pub(crate) fn modality_allows(edge: &CausalEdge) -> Result<(), String> {
    use NodeFamily::*;
    let src = NodeFamily::of(&edge.source_id);
    let tgt = NodeFamily::of(&edge.target_id);
    let (Some(src), Some(tgt)) = (src, tgt) else {
        return Err("endpoint has no recognised family prefix".into());
    };
    let ok = |allowed_src: &[NodeFamily], allowed_tgt: &[NodeFamily]| {
        allowed_src.contains(&src) && allowed_tgt.contains(&tgt)
    };
    match edge.causality_type {
        CausalityType::ChainReaction => {
            if !ok(&[Event], &[Event]) {
                return Err(format!("chain_reaction needs event -> event, got {src} -> {tgt}"));
            }
        }
        CausalityType::Mutation => {
            if !ok(&[Event, Entity, GlobalTrait, Location], &[Entity, GlobalTrait]) {
                return Err(format!("mutation needs a state-bearing target, got {src} -> {tgt}"));
            }
            if edge.trait_target.is_none() {
                return Err("mutation needs trait_target".into());
            }
        }
        CausalityType::MutationSocial => {
            if !ok(&[Event, Entity], &[Entity]) {
                return Err(format!("mutation_social needs event/entity -> entity, got {src} -> {tgt}"));
            }
            match edge.trait_target.as_deref().map(Axis::parse) {
                Some(Some(_)) => {}
                _ => return Err("mutation_social needs a relationship axis as trait_target".into()),
            }
            match edge.rel_counterpart_id.as_deref().map(NodeFamily::of) {
                Some(Some(Entity)) => {}
                _ => return Err("mutation_social needs an entity rel_counterpart_id".into()),
            }
        }
        CausalityType::AffordanceGate => {
            if !ok(&[Object, Location], &[Event]) {
                return Err(format!("affordance_gate needs object/location -> event, got {src} -> {tgt}"));
            }
        }
        CausalityType::AmbientPropagation => {
            if !ok(&[Location, GlobalTrait], &[Entity, Event, Location, GlobalTrait]) {
                return Err(format!(
                    "ambient_propagation needs location/world -> state or event, got {src} -> {tgt}"
                ));
            }
        }
    }
    Ok(())
}

fn check_causal(world: &WorldState, c: &mut Collector) {
    let mut keys: BTreeMap<String, usize> = BTreeMap::new();
    for e in &world.causal_topology {
        *keys.entry(e.key()).or_default() += 1;
        if let Err(msg) = modality_allows(e) {
            c.error(&e.key(), "modality", msg);
        }
    }
    for (k, n) in keys {
        if n > 1 {
            c.error(&k, "duplicate_edge", format!("causal edge key used {n} times"));
        }
    }

    let mut graph = DiGraph::<&str, ()>::new();
    let mut index = BTreeMap::new();
    for e in &world.causal_topology {
        for id in [&e.source_id, &e.target_id] {
            index
                .entry(id.as_str())
                .or_insert_with(|| graph.add_node(id.as_str()));
        }
        graph.add_edge(index[e.source_id.as_str()], index[e.target_id.as_str()], ());
    }
    for scc in petgraph::algo::tarjan_scc(&graph) {
        let self_loop = scc.len() == 1 && graph.contains_edge(scc[0], scc[0]);
        if scc.len() > 1 || self_loop {
            let mut members: Vec<&str> = scc.iter().map(|i| graph[*i]).collect();
            members.sort();
            c.warn(
                members[0],
                "causal_cycle",
                format!("causal cycle through {}", members.join(", ")),
            );
        }
    }
}

fn check_social(world: &WorldState, c: &mut Collector) {
    let mut pairs: BTreeMap<(&str, &str), usize> = BTreeMap::new();
    for r in &world.social_topology {
        *pairs.entry((&r.source_id, &r.target_id)).or_default() += 1;
        if r.source_id == r.target_id {
            c.error(&r.key(), "relationship_self", "relationship edge loops onto itself".into());
        }
        for (axis, m) in &r.metrics {
            if !m.observed {
                continue;
            }
            let covered = world.causal_topology.iter().any(|e| {
                e.causality_type == CausalityType::MutationSocial
                    && e.target_id == r.source_id
                    && e.rel_counterpart_id.as_deref() == Some(r.target_id.as_str())
                    && e.trait_target.as_deref() == Some(axis.as_str())
            });
            if !covered {
                c.warn(
                    &r.key(),
                    "axis_parity",
                    format!("observed {} axis has no mutation_social edge", axis.as_str()),
                );
            }
        }
    }
    for ((s, t), n) in pairs {
        if n > 1 {
            c.error(
                &format!("{s}->{t}"),
                "relationship_pair_unique",
                format!("{n} relationship edges for one ordered pair"),
            );
        }
    }
}

fn check_timelines(world: &WorldState, c: &mut Collector) {
    for ent in &world.entities {
        if ent.state_timeline.windows(2).any(|w| w[0].fabula_time > w[1].fabula_time) {
            c.error(&ent.id, "timeline_order", "state_timeline is not sorted by fabula_time".into());
        }
    }
    for w in &world.world_traits {
        if w.state_timeline.windows(2).any(|p| p[0].fabula_time > p[1].fabula_time) {
            c.error(&w.id, "timeline_order", "state_timeline is not sorted by fabula_time".into());
        }
    }
}
