//! The creative brief: typed constraints derived from a winning candidate.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::candidates::{after_anchor, candidate_world, tells, CandidateScoreReport, Verdict};
use super::{AssemblySettings, Directive, Guard, ENVELOPE_SLACK};
use crate::causal::materialize;
use crate::narrative::{effect_traits, path_strengths, score, Anchor, Breakdown, Bucket, Forecast, Scorer};
use crate::version::scalars;
use crate::world::{reconstruct_entity, Axis, CausalEdge, EventType, NodeFamily, WorldState};

/// Depth of the backward search for hidden predecessors.
const PREDECESSOR_DEPTH: usize = 4;

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum BriefError {
    #[error("candidate `{0}` was pruned and cannot be briefed")]
    Pruned(String),
    #[error("brief references `{0}`, which does not resolve in the source world")]
    Unresolved(String),
}

/// Allowed terminal range for one scalar. `key` uses the diff convention:
/// a trait name, `rel:<counterpart>:<axis>`, `ambient:<name>` or `value`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitEnvelope {
    pub node_id: String,
    pub key: String,
    pub value: f64,
    pub lo: f64,
    pub hi: f64,
    pub inertia: f64,
}

impl TraitEnvelope {
    pub fn contains(&self, v: f64) -> bool {
        v >= self.lo - 1e-12 && v <= self.hi + 1e-12
    }
}

/// Causes of a mystery effect the reader has not been shown.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenPredecessors {
    pub effect_id: String,
    pub predecessor_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitKl {
    pub entity_id: String,
    pub trait_name: String,
    pub kl: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftDirection {
    Raise,
    Lower,
}

/// Which way a trait must move to strengthen an emotion, and how far it can.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShiftConstraint {
    pub metric: Scorer,
    pub entity_id: String,
    pub trait_name: String,
    pub direction: ShiftDirection,
    pub current: f64,
    pub headroom: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreativeBrief {
    pub candidate_id: String,
    pub source_world_hash: String,
    pub syuzhet_window: (i64, i64),
    pub must_events: Vec<String>,
    pub must_not_events: Vec<String>,
    pub envelopes: Vec<TraitEnvelope>,
    /// Causal edges a rendering may add.
    pub licensed_edges: Vec<CausalEdge>,
    pub hidden_predecessors: Vec<HiddenPredecessors>,
    pub guards: Vec<Guard>,
    pub threat_table: Vec<Forecast>,
    pub hope_table: Vec<Forecast>,
    /// Channels carrying utterances the reader has not yet seen.
    pub hidden_channels: Vec<String>,
    pub kl_by_trait: Vec<TraitKl>,
    pub shift_constraints: Vec<ShiftConstraint>,
    /// Events of the source world, so removals can be told from omissions.
    pub source_event_ids: Vec<String>,
}

impl CreativeBrief {
    pub fn envelope(&self, node_id: &str, key: &str) -> Option<&TraitEnvelope> {
        self.envelopes.iter().find(|e| e.node_id == node_id && e.key == key)
    }

    /// Every node id the brief mentions.
    pub fn referenced_ids(&self) -> BTreeSet<&str> {
        let mut out: BTreeSet<&str> = BTreeSet::new();
        out.extend(self.must_events.iter().map(String::as_str));
        out.extend(self.must_not_events.iter().map(String::as_str));
        out.extend(self.envelopes.iter().map(|e| e.node_id.as_str()));
        for e in &self.licensed_edges {
            out.insert(&e.source_id);
            out.insert(&e.target_id);
        }
        for h in &self.hidden_predecessors {
            out.insert(&h.effect_id);
            out.extend(h.predecessor_ids.iter().map(String::as_str));
        }
        for g in &self.guards {
            out.insert(&g.entity_id);
            out.insert(&g.about_id);
        }
        for f in self.threat_table.iter().chain(&self.hope_table) {
            out.insert(&f.event_id);
            out.insert(&f.focal_id);
        }
        out.extend(self.hidden_channels.iter().map(String::as_str));
        out.extend(self.kl_by_trait.iter().map(|k| k.entity_id.as_str()));
        out.extend(self.shift_constraints.iter().map(|s| s.entity_id.as_str()));
        out.extend(self.source_event_ids.iter().map(String::as_str));
        out
    }
}

fn diff_key(node_id: &str, attr: &str) -> String {
    match NodeFamily::of(node_id) {
        Some(NodeFamily::Location) => format!("ambient:{attr}"),
        _ => attr.to_string(),
    }
}

fn inertia_of(world: &WorldState, node_id: &str, key: &str) -> f64 {
    let t = world.max_fabula();
    match NodeFamily::of(node_id) {
        Some(NodeFamily::Entity) => match key.strip_prefix("rel:").and_then(|r| r.split_once(':')) {
            Some((cp, axis)) => world
                .relationship(node_id, cp)
                .zip(Axis::parse(axis))
                .and_then(|(r, a)| r.metrics.get(&a))
                .map_or(0.0, |m| m.inertia),
            None => reconstruct_entity(world, node_id, t)
                .ok()
                .and_then(|s| s.traits.get(key).map(|tv| tv.inertia))
                .unwrap_or(0.5),
        },
        Some(NodeFamily::GlobalTrait) => world.world_trait(node_id).map_or(0.5, |w| w.value_at(t).1),
        _ => 0.5,
    }
}

/// Packages a surviving candidate as a brief. Ids are checked against the
/// source world with the candidate's own event spliced in.
pub fn assemble_brief(
    world: &WorldState,
    directive: &Directive,
    winner: &CandidateScoreReport,
    settings: &AssemblySettings,
) -> Result<CreativeBrief, BriefError> {
    let cand = &winner.candidate;
    let result = match (&winner.verdict, &winner.result) {
        (Verdict::Survived, Some(r)) => r,
        _ => return Err(BriefError::Pruned(cand.id.clone())),
    };
    let cand_world = candidate_world(world, cand);
    let after = materialize(&cand_world, result);
    let anchor = after_anchor(world, &cand_world, &after, cand, directive);

    let mut must_not: BTreeSet<String> = result.deactivated_event_ids.iter().cloned().collect();
    for g in &directive.guards {
        must_not.extend(cand_world.events.iter().filter(|e| tells(e, g)).map(|e| e.id.clone()));
        if let Ok(snap) = reconstruct_entity(&cand_world, &g.entity_id, cand_world.max_fabula()) {
            must_not.extend(
                snap.beliefs
                    .iter()
                    .filter(|b| b.target_id == g.about_id)
                    .filter_map(|b| b.acquired_via_event_id.clone()),
            );
        }
    }

    let finals = scalars(&after);
    let mut seen = BTreeSet::new();
    let mut envelopes = Vec::new();
    for m in result.mutations.iter().rev() {
        let key = diff_key(&m.node_id, &m.attr);
        if !seen.insert((m.node_id.clone(), key.clone())) {
            continue;
        }
        let value = finals.get(&(m.node_id.clone(), key.clone())).copied().unwrap_or(m.new);
        let inertia = inertia_of(&after, &m.node_id, &key);
        let slack = (1.0 - inertia) * ENVELOPE_SLACK;
        let (min, max) = if key.starts_with("rel:") { (-1.0, 1.0) } else { (0.0, 1.0) };
        envelopes.push(TraitEnvelope {
            node_id: m.node_id.clone(),
            key,
            value,
            lo: (value - slack).max(min),
            hi: (value + slack).min(max),
            inertia,
        });
    }
    envelopes.sort_by(|a, b| (&a.node_id, &a.key).cmp(&(&b.node_id, &b.key)));

    let mut brief = CreativeBrief {
        candidate_id: cand.id.clone(),
        source_world_hash: world.content_hash(),
        syuzhet_window: directive.syuzhet_window.unwrap_or((
            world.min_syuzhet().unwrap_or(0),
            world.max_syuzhet().unwrap_or(0),
        )),
        must_events: cand.event.iter().map(|e| e.id.clone()).collect(),
        must_not_events: must_not.into_iter().collect(),
        envelopes,
        licensed_edges: cand.edges.clone(),
        hidden_predecessors: Vec::new(),
        guards: directive.guards.clone(),
        threat_table: Vec::new(),
        hope_table: Vec::new(),
        hidden_channels: Vec::new(),
        kl_by_trait: Vec::new(),
        shift_constraints: Vec::new(),
        source_event_ids: world.events.iter().map(|e| e.id.clone()).collect(),
    };
    brief.source_event_ids.sort();

    for m in &directive.metrics {
        let report = score(&after, m.metric, &directive.focal_ids, &anchor, &settings.scorer, settings.options);
        match report.breakdown {
            Breakdown::Mystery(b) => {
                for eff in b.effects.iter().filter(|e| e.hidden_mass > 0.0) {
                    let predecessor_ids = path_strengths(&after, &eff.effect_id, PREDECESSOR_DEPTH)
                        .into_keys()
                        .filter(|id| after.event(id).is_some_and(|e| !anchor.reveals(e)))
                        .collect();
                    brief.hidden_predecessors.push(HiddenPredecessors {
                        effect_id: eff.effect_id.clone(),
                        predecessor_ids,
                    });
                }
            }
            Breakdown::Suspense(b) => {
                for f in b.forecasts {
                    match f.bucket {
                        Bucket::Threat => brief.threat_table.push(f),
                        Bucket::Hope => brief.hope_table.push(f),
                    }
                }
                brief.hidden_channels = hidden_channels(&after, &anchor);
            }
            Breakdown::Surprise(b) => {
                brief.kl_by_trait.extend(b.traits.into_iter().map(|t| TraitKl {
                    entity_id: t.entity_id,
                    trait_name: t.trait_name,
                    kl: t.kl,
                }));
            }
            Breakdown::Emotion { .. } => {
                if let Some(effect) = m.metric.effect() {
                    brief
                        .shift_constraints
                        .extend(shifts(&after, &directive.focal_ids, &anchor, m.metric, effect_traits(effect)));
                }
            }
            Breakdown::Irony(_) => {}
        }
    }

    let resolves = |id: &str| cand_world.contains_node(id) || NodeFamily::of(id).is_none();
    if let Some(bad) = brief.referenced_ids().into_iter().find(|id| !resolves(id)) {
        return Err(BriefError::Unresolved(bad.to_string()));
    }
    Ok(brief)
}

fn hidden_channels(world: &WorldState, anchor: &Anchor) -> Vec<String> {
    let set: BTreeSet<String> = world
        .events
        .iter()
        .filter(|e| e.event_type == EventType::Utterance && !anchor.reveals(e))
        .filter_map(|e| e.via_channel_id.clone())
        .collect();
    set.into_iter().collect()
}

fn shifts(
    world: &WorldState,
    focals: &[String],
    anchor: &Anchor,
    metric: Scorer,
    (pos, inv): (&[&str], &[&str]),
) -> Vec<ShiftConstraint> {
    let mut out = Vec::new();
    for f in focals {
        let Ok(snap) = reconstruct_entity(world, f, anchor.fabula) else { continue };
        let traits: BTreeMap<&str, f64> = snap.traits.iter().map(|(k, v)| (k.as_str(), v.value)).collect();
        for (names, direction) in [(pos, ShiftDirection::Raise), (inv, ShiftDirection::Lower)] {
            for name in names {
                let Some(&current) = traits.get(name) else { continue };
                out.push(ShiftConstraint {
                    metric,
                    entity_id: f.clone(),
                    trait_name: name.to_string(),
                    direction,
                    current,
                    headroom: match direction {
                        ShiftDirection::Raise => 1.0 - current,
                        ShiftDirection::Lower => current,
                    },
                });
            }
        }
    }
    out
}
