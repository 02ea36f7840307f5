//! Dramatic irony: what the reader has seen that a character does not know.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{event_harm, existing, Anchor, ScorerSettings};
use crate::world::{reconstruct_entity, EventNode, EventType, NodeFamily, TruthValue, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IronyBreakdown {
    /// Gap per focal entity.
    pub gaps: BTreeMap<String, f64>,
    /// Revealed events each focal entity does not know about.
    pub unknown_events: BTreeMap<String, Vec<String>>,
    pub max_gap: f64,
    pub mean_gap: f64,
}

struct Knowledge {
    events: BTreeSet<String>,
    believed_entities: BTreeSet<String>,
}

fn intelligible(world: &WorldState, e: &EventNode, c: &str) -> bool {
    match e.via_channel_id.as_deref().and_then(|id| world.channel(id)) {
        Some(ch) => ch.intelligibility_for(c) >= world.intelligibility_threshold,
        None => true,
    }
}

fn knowledge(world: &WorldState, c: &str, anchor: &Anchor, frontier: i64) -> Knowledge {
    let mut events = BTreeSet::new();
    let mut believed_entities = BTreeSet::new();
    for e in existing(world, anchor) {
        if e.involves(c) && e.fabula_time <= frontier {
            events.insert(e.id.clone());
        }
        // A false report conveys no knowledge of the event it cites, and
        // an addressee only hears what the channel lets through.
        let heard = e.event_type == EventType::Utterance
            && e.truth_value != Some(TruthValue::False)
            && (e.speaker_id.as_deref() == Some(c)
                || (e.addressee_ids.iter().any(|a| a == c) && intelligible(world, e, c)));
        if heard {
            events.extend(
                e.target_ids
                    .iter()
                    .filter(|t| NodeFamily::of(t) == Some(NodeFamily::Event))
                    .cloned(),
            );
        }
    }
    if let Ok(snap) = reconstruct_entity(world, c, anchor.fabula) {
        for b in snap.beliefs {
            let grounded = b.acquired_via_event_id.as_deref().is_none_or(|id| world.event(id).is_some());
            if !grounded {
                continue;
            }
            match NodeFamily::of(&b.target_id) {
                Some(NodeFamily::Event) => {
                    events.insert(b.target_id);
                }
                Some(NodeFamily::Entity) => {
                    believed_entities.insert(b.target_id);
                }
                _ => {}
            }
        }
    }
    Knowledge {
        events,
        believed_entities,
    }
}

/// Syuzhet distance to the first later position at which `c` witnesses an
/// event no earlier in fabula than `e`.
fn closure_distance(world: &WorldState, c: &str, e: &EventNode, anchor: &Anchor) -> Option<i64> {
    let s = anchor.syuzhet?;
    existing(world, anchor)
        .filter(|x| x.syuzhet_index > s && x.fabula_time >= e.fabula_time && x.involves(c))
        .map(|x| x.syuzhet_index - s)
        .min()
}

pub fn score_irony(
    world: &WorldState,
    focals: &[String],
    anchor: &Anchor,
    settings: &ScorerSettings,
) -> (f64, IronyBreakdown) {
    let revealed: Vec<&EventNode> = existing(world, anchor).filter(|e| anchor.reveals(e)).collect();
    let mut out = IronyBreakdown {
        gaps: BTreeMap::new(),
        unknown_events: BTreeMap::new(),
        max_gap: 0.0,
        mean_gap: 0.0,
    };
    if focals.is_empty() || revealed.is_empty() {
        for c in focals {
            out.gaps.insert(c.clone(), 0.0);
        }
        return (0.0, out);
    }
    let frontier = revealed.iter().map(|e| e.fabula_time).max().unwrap_or(i64::MIN);
    let denom: f64 = revealed.iter().map(|e| e.intensity()).sum::<f64>() + settings.irony_surface_k;

    for c in focals {
        let k = knowledge(world, c, anchor, frontier);
        let acts = revealed.iter().filter(|e| e.actor_ids.iter().any(|a| a == c)).count() as f64;
        let a_c = (1.0 + settings.irony_action_alpha * acts).min(settings.irony_action_weight_cap);
        let mut num = 0.0;
        let mut unknown = Vec::new();
        for e in revealed.iter().filter(|e| !k.events.contains(&e.id)) {
            let (_, sigma) = event_harm(world, &e.id, settings);
            let phi = if e.actor_ids.iter().any(|a| k.believed_entities.contains(a)) {
                settings.irony_false_belief_mult
            } else {
                1.0
            };
            let rho = match closure_distance(world, c, e, anchor) {
                Some(d) => (-(d as f64) / settings.irony_proximity_tau_syuzhet)
                    .exp()
                    .max(settings.irony_proximity_floor),
                None => settings.irony_proximity_floor,
            };
            num += e.intensity() * sigma * phi * rho;
            unknown.push(e.id.clone());
        }
        out.gaps.insert(c.clone(), a_c * num / denom);
        out.unknown_events.insert(c.clone(), unknown);
    }
    let n = out.gaps.len() as f64;
    out.max_gap = out.gaps.values().copied().fold(0.0, f64::max);
    out.mean_gap = out.gaps.values().sum::<f64>() / n;
    let beta = settings.irony_aggregator_beta;
    let score = (beta * out.max_gap + (1.0 - beta) * out.mean_gap).min(1.0);
    (score, out)
}
