//! Share of explanatory causal mass the reader has not yet been shown.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{event_harm, existing, Anchor, ScorerSettings};
use crate::world::{EventNode, WorldState};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MysteryEffect {
    pub effect_id: String,
    pub proximity: f64,
    pub hidden_mass: f64,
    pub total_mass: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MysteryBreakdown {
    pub hidden_mass: f64,
    pub total_mass: f64,
    pub effects: Vec<MysteryEffect>,
}

/// Strongest product of edge weights along any backward path of at most
/// `depth` hops ending at `target`, for every node that reaches it.
/// Zero-weight edges carry nothing and are skipped. `target` itself is
/// not included.
pub fn path_strengths(world: &WorldState, target: &str, depth: usize) -> BTreeMap<String, f64> {
    let mut best: BTreeMap<String, f64> = BTreeMap::new();
    let mut frontier: BTreeMap<String, f64> = BTreeMap::from([(target.to_string(), 1.0)]);
    for _ in 0..depth {
        let mut next: BTreeMap<String, f64> = BTreeMap::new();
        for (node, strength) in &frontier {
            for e in world.causal_topology.iter().filter(|e| &e.target_id == node) {
                let w = e.weight();
                if w <= 0.0 || e.source_id == target {
                    continue;
                }
                let cand = strength * w;
                if best.get(&e.source_id).is_none_or(|b| cand > *b) {
                    best.insert(e.source_id.clone(), cand);
                    next.insert(e.source_id.clone(), cand);
                }
            }
        }
        if next.is_empty() {
            break;
        }
        frontier = next;
    }
    best
}

pub fn score_mystery(
    world: &WorldState,
    focals: &[String],
    anchor: &Anchor,
    settings: &ScorerSettings,
) -> (f64, MysteryBreakdown) {
    let events: BTreeMap<&str, &EventNode> = existing(world, anchor).map(|e| (e.id.as_str(), e)).collect();

    let mut effects: Vec<(String, f64)> = events
        .values()
        .filter(|e| anchor.reveals(e) && focals.iter().any(|f| e.involves(f)))
        .map(|e| {
            let gap = anchor.syuzhet.map_or(0, |s| s - e.syuzhet_index) as f64;
            (e.id.clone(), (-gap / settings.mystery_proximity_tau_syuzhet).exp())
        })
        .collect();
    effects.extend(
        focals
            .iter()
            .filter(|f| world.entity(f).is_some())
            .map(|f| (f.clone(), 1.0)),
    );

    let mut out = MysteryBreakdown {
        hidden_mass: 0.0,
        total_mass: 0.0,
        effects: Vec::new(),
    };
    for (effect_id, rho) in effects {
        let mut term = MysteryEffect {
            effect_id: effect_id.clone(),
            proximity: rho,
            hidden_mass: 0.0,
            total_mass: 0.0,
        };
        for (anc, strength) in path_strengths(world, &effect_id, settings.mystery_path_decay_depth) {
            let Some(a) = events.get(anc.as_str()) else { continue };
            let (_, sigma) = event_harm(world, &a.id, settings);
            let mass = rho * sigma * strength;
            term.total_mass += mass;
            if !anchor.reveals(a) {
                term.hidden_mass += mass;
            }
        }
        out.hidden_mass += term.hidden_mass;
        out.total_mass += term.total_mass;
        out.effects.push(term);
    }
    let score = if out.total_mass > 0.0 {
        out.hidden_mass / out.total_mass
    } else {
        0.0
    };
    (score, out)
}
