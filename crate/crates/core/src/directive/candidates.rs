//! Candidate interventions, plausibility gates and ranking.

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AssemblySettings, Directive, Guard, AFFORDANCE_TRAIT_THRESHOLD};
use crate::causal::{execute, materialize, CausalPhysicsResult, CausalQuery};
use crate::ego::QueryType;
use crate::intervention::InterventionSpec;
use crate::narrative::{score, Anchor, Scorer};
use crate::world::{reconstruct_entity, CausalEdge, EventNode, EventType, TruthValue, WorldState};

/// A proposed change: an optional new event with its causal edges, plus
/// any further `do(...)` the change implies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateEvent {
    pub id: String,
    /// Inserted at its syuzhet index; later positions shift by one.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub event: Option<EventNode>,
    #[serde(default)]
    pub edges: Vec<CausalEdge>,
    #[serde(default)]
    pub intervention: InterventionSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub uses_object: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub action: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gate {
    Affordance,
    Spatial,
    Guard,
    Propagation,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GateReason {
    pub gate: Gate,
    pub detail: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Survived,
    Pruned,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CandidateScoreReport {
    pub candidate: CandidateEvent,
    pub verdict: Verdict,
    pub gate_reasons: Vec<GateReason>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub result: Option<CausalPhysicsResult>,
    pub scores_before: BTreeMap<Scorer, f64>,
    pub scores_after: BTreeMap<Scorer, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub combined_score: Option<f64>,
}

impl CandidateScoreReport {
    fn pruned(candidate: &CandidateEvent, gate_reasons: Vec<GateReason>) -> Self {
        Self {
            candidate: candidate.clone(),
            verdict: Verdict::Pruned,
            gate_reasons,
            result: None,
            scores_before: BTreeMap::new(),
            scores_after: BTreeMap::new(),
            combined_score: None,
        }
    }
}

/// The source world with the candidate's event and edges spliced in.
pub fn candidate_world(world: &WorldState, candidate: &CandidateEvent) -> WorldState {
    let mut out = world.clone();
    if let Some(ev) = &candidate.event {
        for e in out.events.iter_mut().filter(|e| e.syuzhet_index >= ev.syuzhet_index) {
            e.syuzhet_index += 1;
        }
        out.events.push(ev.clone());
    }
    out.causal_topology.extend(candidate.edges.iter().cloned());
    out
}

/// Locked spatial edges on a fewest-hop route that ignores locks, or `None`
/// when no route exists at all.
fn locked_on_route(world: &WorldState, from: &str, to: &str) -> Option<Vec<String>> {
    let mut prev: BTreeMap<&str, (&str, usize)> = BTreeMap::new();
    let mut queue: VecDeque<&str> = VecDeque::from([from]);
    let mut seen: BTreeSet<&str> = BTreeSet::from([from]);
    while let Some(n) = queue.pop_front() {
        if n == to {
            let mut locked = Vec::new();
            let mut cur = to;
            while let Some(&(p, i)) = prev.get(cur) {
                if world.spatial_topology[i].is_locked {
                    locked.push(world.spatial_topology[i].key());
                }
                cur = p;
            }
            locked.reverse();
            return Some(locked);
        }
        for (i, s) in world.spatial_topology.iter().enumerate() {
            let next = if s.source_id == n {
                s.target_id.as_str()
            } else if s.target_id == n {
                s.source_id.as_str()
            } else {
                continue;
            };
            if seen.insert(next) {
                prev.insert(next, (n, i));
                queue.push_back(next);
            }
        }
    }
    None
}

fn affordance_gate(world: &WorldState, c: &CandidateEvent) -> Option<GateReason> {
    let obj_id = c.uses_object.as_deref()?;
    let reason = |detail: String| {
        Some(GateReason {
            gate: Gate::Affordance,
            detail,
        })
    };
    let Some(obj) = world.object(obj_id) else {
        return reason(format!("{obj_id} does not exist"));
    };
    if c.intervention.assignments.get(obj_id).is_some_and(Option::is_none) {
        return reason(format!("{obj_id} is disabled by the candidate's own intervention"));
    }
    let aff = match &c.action {
        Some(a) => obj.affordances.iter().find(|x| &x.action == a),
        None => obj.affordances.first(),
    };
    let Some(aff) = aff else {
        return reason(format!(
            "{obj_id} affords no `{}`",
            c.action.as_deref().unwrap_or("action")
        ));
    };
    let (Some(req), Some(ev)) = (&aff.required_trait, &c.event) else {
        return None;
    };
    let best = ev
        .actor_ids
        .iter()
        .map(|a| {
            let v = reconstruct_entity(world, a, ev.fabula_time)
                .ok()
                .and_then(|s| s.trait_value(req))
                .unwrap_or(0.0);
            (a.as_str(), v)
        })
        .max_by(|x, y| x.1.total_cmp(&y.1));
    match best {
        Some((_, v)) if v >= AFFORDANCE_TRAIT_THRESHOLD => None,
        Some((a, v)) => reason(format!(
            "{a}.{req} = {v} is below {AFFORDANCE_TRAIT_THRESHOLD} for {obj_id}:{}",
            aff.action
        )),
        None => reason(format!("no actor wields {obj_id}")),
    }
}

fn spatial_gate(world: &WorldState, c: &CandidateEvent) -> Vec<GateReason> {
    let Some(ev) = &c.event else { return Vec::new() };
    let Some(dest) = ev.location_id.as_deref() else { return Vec::new() };
    let mut out = Vec::new();
    for actor in &ev.actor_ids {
        let Some(origin) = reconstruct_entity(world, actor, ev.fabula_time)
            .ok()
            .and_then(|s| s.location_id)
        else {
            continue;
        };
        if world.spatial_hops(&origin, dest).is_some() {
            continue;
        }
        let detail = match locked_on_route(world, &origin, dest) {
            Some(locked) if !locked.is_empty() => locked.join(", "),
            _ => format!("no route from {origin} to {dest}"),
        };
        out.push(GateReason {
            gate: Gate::Spatial,
            detail,
        });
    }
    out
}

/// Whether `ev` is a truthful utterance telling `guard.entity_id` about
/// `guard.about_id`.
pub(crate) fn tells(ev: &EventNode, guard: &Guard) -> bool {
    ev.event_type == EventType::Utterance
        && ev.truth_value != Some(TruthValue::False)
        && ev.addressee_ids.contains(&guard.entity_id)
        && ev.target_ids.contains(&guard.about_id)
}

fn guard_gate(after: &WorldState, guards: &[Guard]) -> Vec<GateReason> {
    let mut out = Vec::new();
    for g in guards {
        for ev in after.events.iter().filter(|e| tells(e, g)) {
            out.push(GateReason {
                gate: Gate::Guard,
                detail: format!("{} tells {} about {}", ev.id, g.entity_id, g.about_id),
            });
        }
        let Ok(snap) = reconstruct_entity(after, &g.entity_id, after.max_fabula()) else { continue };
        for b in snap.beliefs.iter().filter(|b| b.target_id == g.about_id) {
            if let Some(via) = b.acquired_via_event_id.as_deref().filter(|id| after.event(id).is_some()) {
                out.push(GateReason {
                    gate: Gate::Guard,
                    detail: format!("{} still learns about {} via {via}", g.entity_id, g.about_id),
                });
            }
        }
    }
    out
}

/// Anchor for the directive window in the source world.
pub(crate) fn source_anchor(world: &WorldState, directive: &Directive) -> Anchor {
    let hi = directive
        .syuzhet_window
        .map(|w| w.1)
        .or(world.max_syuzhet())
        .unwrap_or(0);
    Anchor::syuzhet(world, hi)
}

/// The window end carried through candidate insertion and event removal.
pub(crate) fn after_anchor(
    world: &WorldState,
    cand_world: &WorldState,
    after: &WorldState,
    c: &CandidateEvent,
    directive: &Directive,
) -> Anchor {
    let hi = source_anchor(world, directive).syuzhet.unwrap_or(0);
    let hi = match &c.event {
        Some(ev) if ev.syuzhet_index <= hi => hi + 1,
        _ => hi,
    };
    let s = after
        .events
        .iter()
        .filter(|e| cand_world.event(&e.id).is_some_and(|x| x.syuzhet_index <= hi))
        .map(|e| e.syuzhet_index)
        .max()
        .unwrap_or(after.min_syuzhet().unwrap_or(0) - 1);
    Anchor::syuzhet(after, s)
}

fn scores_at(
    world: &WorldState,
    directive: &Directive,
    anchor: &Anchor,
    settings: &AssemblySettings,
) -> BTreeMap<Scorer, f64> {
    directive
        .metrics
        .iter()
        .map(|m| {
            let r = score(world, m.metric, &directive.focal_ids, anchor, &settings.scorer, settings.options);
            (m.metric, r.score)
        })
        .collect()
}

/// The causal query a candidate runs: force its event and apply its own
/// intervention, anchored at the end of the story.
pub(crate) fn candidate_query(c: &CandidateEvent, directive: &Directive, anchor_fabula: i64) -> CausalQuery {
    let mut q = CausalQuery::new(QueryType::Intervention);
    q.intervention = c.intervention.clone();
    if let Some(ev) = &c.event {
        q.intervention.assignments.insert(ev.id.clone(), Some(1.0));
    }
    q.focal_ids = directive.focal_ids.clone();
    q.anchor_fabula = Some(anchor_fabula);
    q.seed = Some(0);
    q
}

fn evaluate_one(
    world: &WorldState,
    directive: &Directive,
    c: &CandidateEvent,
    before: &BTreeMap<Scorer, f64>,
    settings: &AssemblySettings,
) -> CandidateScoreReport {
    let mut reasons: Vec<GateReason> = affordance_gate(world, c).into_iter().collect();
    reasons.extend(spatial_gate(world, c));
    if !reasons.is_empty() {
        return CandidateScoreReport::pruned(c, reasons);
    }
    let cand_world = candidate_world(world, c);
    let q = candidate_query(c, directive, cand_world.max_fabula());
    let result = match execute(&cand_world, &q, &settings.causal) {
        Ok(r) => r,
        Err(e) => {
            return CandidateScoreReport::pruned(
                c,
                vec![GateReason {
                    gate: Gate::Propagation,
                    detail: e.to_string(),
                }],
            )
        }
    };
    if result.short_circuited {
        return CandidateScoreReport::pruned(
            c,
            vec![GateReason {
                gate: Gate::Propagation,
                detail: "every intervention was pruned as vacuous".into(),
            }],
        );
    }
    let after = materialize(&cand_world, &result);
    let guard = guard_gate(&after, &directive.guards);
    if !guard.is_empty() {
        let mut r = CandidateScoreReport::pruned(c, guard);
        r.result = Some(result);
        return r;
    }
    let anchor = after_anchor(world, &cand_world, &after, c, directive);
    let scores_after = scores_at(&after, directive, &anchor, settings);
    let combined = directive.combine(&scores_after);
    CandidateScoreReport {
        candidate: c.clone(),
        verdict: Verdict::Survived,
        gate_reasons: Vec::new(),
        result: Some(result),
        scores_before: before.clone(),
        scores_after,
        combined_score: Some(combined),
    }
}

/// Survivors first by descending combined score, then pruned candidates;
/// ties break by candidate id.
pub fn rank(reports: &mut [CandidateScoreReport]) {
    reports.sort_by(|a, b| {
        let key = |r: &CandidateScoreReport| r.combined_score.filter(|_| r.verdict == Verdict::Survived);
        match (key(a), key(b)) {
            (Some(x), Some(y)) => y.total_cmp(&x),
            (Some(_), None) => Ordering::Less,
            (None, Some(_)) => Ordering::Greater,
            (None, None) => Ordering::Equal,
        }
        .then_with(|| a.candidate.id.cmp(&b.candidate.id))
    });
}

/// Evaluates every candidate in its own sandbox, in parallel, and ranks them.
pub fn evaluate_candidates(
    world: &WorldState,
    directive: &Directive,
    candidates: &[CandidateEvent],
    settings: &AssemblySettings,
) -> Vec<CandidateScoreReport> {
    if candidates.is_empty() {
        return Vec::new();
    }
    let before = scores_at(world, directive, &source_anchor(world, directive), settings);
    let mut out: Vec<CandidateScoreReport> = candidates
        .par_iter()
        .map(|c| evaluate_one(world, directive, c, &before, settings))
        .collect();
    rank(&mut out);
    out
}

/// One candidate per (focal actor, object affordance): the actor uses the
/// object at the object's location at `fabula_time`, inserted at
/// `syuzhet_index`. Gates are left to [`evaluate_candidates`].
pub fn enumerate_affordance_candidates(
    world: &WorldState,
    actors: &[String],
    fabula_time: i64,
    syuzhet_index: i64,
) -> Vec<CandidateEvent> {
    let mut out = Vec::new();
    for obj in &world.objects {
        for aff in &obj.affordances {
            for actor in actors {
                let tail = |s: &str| s.split_once('_').map_or(s.to_string(), |(_, r)| r.to_string());
                let id = format!(
                    "EVT_CAND_{}_{}_{}",
                    tail(actor),
                    aff.action.to_ascii_uppercase(),
                    tail(&obj.id)
                );
                let mut ev = EventNode::new(id.clone(), EventType::Action, fabula_time, syuzhet_index);
                ev.actor_ids = vec![actor.clone()];
                ev.location_id = obj.location_id.clone();
                let mut edge = CausalEdge::new(&obj.id, &id, crate::world::CausalityType::AffordanceGate);
                edge.fabula_time = fabula_time;
                out.push(CandidateEvent {
                    id,
                    event: Some(ev),
                    edges: vec![edge],
                    intervention: InterventionSpec::default(),
                    uses_object: Some(obj.id.clone()),
                    action: Some(aff.action.clone()),
                });
            }
        }
    }
    out.sort_by(|a, b| a.id.cmp(&b.id));
    out
}
