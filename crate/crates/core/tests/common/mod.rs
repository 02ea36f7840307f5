//! World builders and independent oracles shared by the scorer suites.
#![allow(dead_code)]

use std::path::PathBuf;

use fabula_core::narrative::*;
use fabula_core::world::{
    Axis, AxisMetric, CausalEdge, CausalityType, Entity, EventNode, EventType, EvidenceStrength, RelationshipEdge,
    WorldState,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture(name: &str) -> WorldState {
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name);
    WorldState::from_json(&std::fs::read_to_string(path).unwrap()).unwrap()
}

pub fn ev(id: &str, fabula: i64, syuzhet: i64, actors: &[&str], targets: &[&str]) -> EventNode {
    let mut e = EventNode::new(id, EventType::Action, fabula, syuzhet);
    e.actor_ids = actors.iter().map(|s| s.to_string()).collect();
    e.target_ids = targets.iter().map(|s| s.to_string()).collect();
    e
}

pub fn edge(src: &str, tgt: &str, strength: EvidenceStrength, force: f64, mechanism: &str) -> CausalEdge {
    let mut e = CausalEdge::new(src, tgt, CausalityType::ChainReaction);
    e.evidence_strength = strength;
    e.causal_force = force;
    e.mechanism = mechanism.to_string();
    e
}

pub fn affinity(src: &str, tgt: &str, v: f64) -> RelationshipEdge {
    RelationshipEdge {
        source_id: src.into(),
        target_id: tgt.into(),
        metrics: [(
            Axis::Affinity,
            AxisMetric {
                value: v,
                inertia: 0.5,
                evidence_strength: EvidenceStrength::Moderate,
                last_updated_fabula: 0,
                observed: true,
            },
        )]
        .into(),
    }
}

pub fn ids(xs: &[&str]) -> Vec<String> {
    xs.iter().map(|s| s.to_string()).collect()
}

pub fn close(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

pub fn three_ancestor_world() -> WorldState {
    let mut w = WorldState {
        entities: vec![Entity::new("ENT_X")],
        events: vec![
            ev("EVT_A1", 100, 0, &[], &[]),
            ev("EVT_EFFECT", 400, 1, &["ENT_X"], &[]),
            ev("EVT_A2", 200, 2, &[], &[]),
            ev("EVT_A3", 300, 3, &[], &[]),
        ],
        ..Default::default()
    };
    for a in ["EVT_A1", "EVT_A2", "EVT_A3"] {
        w.causal_topology
            .push(edge(a, "EVT_EFFECT", EvidenceStrength::Strong, 10.0, "existential"));
    }
    w
}

/// Best product over every simple backward path of at most `depth` hops.
pub fn enumerate_paths(w: &WorldState, node: &str, target: &str, depth: usize, seen: &mut Vec<String>) -> f64 {
    if node == target {
        return 1.0;
    }
    if depth == 0 {
        return 0.0;
    }
    let mut best: f64 = 0.0;
    for e in w.causal_topology.iter().filter(|e| e.source_id == node) {
        if seen.contains(&e.target_id) {
            continue;
        }
        seen.push(e.target_id.clone());
        best = best.max(e.weight() * enumerate_paths(w, &e.target_id, target, depth - 1, seen));
        seen.pop();
    }
    best
}

pub fn mystery_oracle(w: &WorldState, focals: &[String], t_s: i64, settings: &ScorerSettings) -> f64 {
    let harm = |id: &str| -> f64 {
        let kinds: Vec<f64> = w
            .causal_topology
            .iter()
            .filter(|e| e.source_id == id || e.target_id == id)
            .filter_map(|e| fabula_core::causal::mechanism_kind(&e.mechanism))
            .map(|k| settings.harm_salience(k))
            .collect();
        if kinds.is_empty() {
            settings.harm_salience("physical")
        } else {
            kinds.into_iter().fold(0.0, f64::max)
        }
    };
    let mut effects: Vec<(String, f64)> = w
        .events
        .iter()
        .filter(|e| e.syuzhet_index <= t_s && focals.iter().any(|f| e.involves(f)))
        .map(|e| (e.id.clone(), (-((t_s - e.syuzhet_index) as f64) / 8.0).exp()))
        .collect();
    effects.extend(focals.iter().map(|f| (f.clone(), 1.0)));
    let (mut hidden, mut total) = (0.0, 0.0);
    for (eff, rho) in &effects {
        for a in &w.events {
            if &a.id == eff {
                continue;
            }
            let pi = enumerate_paths(w, &a.id, eff, 4, &mut vec![a.id.clone()]);
            let mass = rho * harm(&a.id) * pi;
            total += mass;
            if a.syuzhet_index > t_s {
                hidden += mass;
            }
        }
    }
    if total > 0.0 {
        hidden / total
    } else {
        0.0
    }
}

/// Threat-side Beta mean arithmetic written out from pseudo-counts.
pub fn efk_oracle(a: f64, b: f64, cands: &[(bool, f64, f64)]) -> f64 {
    let alpha = 1.0 + a;
    let beta = 1.0 + b;
    let mean = alpha / (alpha + beta);
    let z: f64 = cands.iter().map(|c| c.2).sum();
    let mut var = 0.0;
    for &(threat, w, rho) in cands {
        let next = if threat {
            (alpha + w) / (alpha + beta + w)
        } else {
            alpha / (alpha + beta + w)
        };
        var += rho / z * (next - mean) * (next - mean);
    }
    let total: f64 = cands.iter().map(|c| c.1).sum();
    let up = (alpha + total) / (alpha + beta + total) - mean;
    let down = alpha / (alpha + beta + total) - mean;
    (var / up.powi(2).max(down.powi(2))).min(1.0)
}

pub fn three_edge_world() -> WorldState {
    let mut w = WorldState {
        entities: vec![
            Entity::new("ENT_X").with_trait("ambition", 0.9, 0.5),
            Entity::new("ENT_A").with_trait("ambition", 0.2, 0.5),
            Entity::new("ENT_B").with_trait("ambition", 0.4, 0.5),
        ],
        events: vec![
            ev("EVT_1", 100, 0, &["ENT_X"], &[]),
            ev("EVT_2", 200, 1, &["ENT_X"], &[]),
            ev("EVT_3", 300, 2, &["ENT_X"], &[]),
        ],
        ..Default::default()
    };
    for (src, force) in [("EVT_1", 10.0), ("EVT_2", 6.0), ("EVT_3", 4.0)] {
        let mut e = edge(src, "ENT_X", EvidenceStrength::Strong, force, "psychological");
        e.causality_type = CausalityType::Mutation;
        e.trait_target = Some("ambition".into());
        w.causal_topology.push(e);
    }
    let mut out = edge("ENT_X", "EVT_3", EvidenceStrength::Moderate, 10.0, "psychological");
    out.causality_type = CausalityType::ChainReaction;
    w.causal_topology.push(out);
    w
}

pub const MECHANISMS: [&str; 8] = [
    "existential",
    "physical",
    "betrayal",
    "psychological",
    "emotional",
    "social",
    "epistemic",
    "",
];
pub const TRAITS: [&str; 8] = ["ambition", "guilt", "courage", "fear", "despair", "hope", "literacy", "love"];

/// A random world. With `focal_out_of_events` the focal entity takes part
/// in no event, so the mystery effect set is the same at every anchor.
pub fn random_world(seed: u64, focal_out_of_events: bool) -> WorldState {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_ent = rng.random_range(2..=4);
    let n_ev = rng.random_range(3..=8);
    let mut w = WorldState::default();
    for i in 0..n_ent {
        let mut e = Entity::new(format!("ENT_{i}"));
        for t in TRAITS {
            if rng.random_bool(0.5) {
                e = e.with_trait(t, rng.random_range(0.0..=1.0), rng.random_range(0.0..=1.0));
            }
        }
        w.entities.push(e);
    }
    let mut order: Vec<i64> = (0..n_ev as i64).collect();
    order.shuffle(&mut rng);
    let first_actor = if focal_out_of_events { 1 } else { 0 };
    for (i, &syuzhet) in order.iter().enumerate() {
        let mut e = EventNode::new(format!("EVT_{i}"), EventType::Action, 100 * (i as i64 + 1), syuzhet);
        e.actor_ids = vec![format!("ENT_{}", rng.random_range(first_actor..n_ent))];
        if rng.random_bool(0.5) {
            e.target_ids = vec![format!("ENT_{}", rng.random_range(first_actor..n_ent))];
        }
        w.events.push(e);
    }
    for i in 0..n_ev {
        for j in (i + 1)..n_ev {
            if rng.random_bool(0.35) {
                let mut e = edge(
                    &format!("EVT_{i}"),
                    &format!("EVT_{j}"),
                    [EvidenceStrength::Weak, EvidenceStrength::Moderate, EvidenceStrength::Strong][rng.random_range(0..3)],
                    rng.random_range(0.0..=10.0),
                    MECHANISMS[rng.random_range(0..MECHANISMS.len())],
                );
                e.fabula_time = 100 * (i as i64 + 1);
                w.causal_topology.push(e);
            }
        }
        for k in 0..n_ent {
            if rng.random_bool(0.25) {
                let mut e = edge(
                    &format!("EVT_{i}"),
                    &format!("ENT_{k}"),
                    EvidenceStrength::Moderate,
                    rng.random_range(1.0..=10.0),
                    MECHANISMS[rng.random_range(0..MECHANISMS.len())],
                );
                e.causality_type = CausalityType::Mutation;
                e.trait_target = Some(TRAITS[rng.random_range(0..TRAITS.len())].to_string());
                w.causal_topology.push(e);
            }
        }
    }
    for a in 0..n_ent {
        for b in 0..n_ent {
            if a != b && rng.random_bool(0.4) {
                w.social_topology.push(affinity(
                    &format!("ENT_{a}"),
                    &format!("ENT_{b}"),
                    rng.random_range(-1.0..=1.0),
                ));
            }
        }
    }
    w
}

pub fn all_entities(w: &WorldState) -> Vec<String> {
    w.entities.iter().map(|e| e.id.clone()).collect()
}
