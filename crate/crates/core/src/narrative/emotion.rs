//! Closeness of an entity's trait profile to a named emotional effect.
//!
//! Each effect lists positive indicator traits, which count toward the
//! effect as they rise, and inverse indicators, which count as they fall.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Anchor;
use crate::world::{reconstruct_entity, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Effect {
    Grief,
    Rage,
    Joy,
    Regret,
    Love,
    Fear,
}

/// `(positive, inverse)` indicator traits for an effect.
pub fn effect_traits(effect: Effect) -> (&'static [&'static str], &'static [&'static str]) {
    match effect {
        Effect::Grief => (
            &["despair", "shame", "longing", "grief", "anguish", "mourning"],
            &["hope", "joy", "contentment", "satisfaction"],
        ),
        Effect::Rage => (
            &["rage", "anger", "vengeance", "resentment", "wrath", "hatred"],
            &["calm", "patience", "serenity", "contentment"],
        ),
        Effect::Joy => (
            &["joy", "happiness", "contentment", "hope", "satisfaction"],
            &["despair", "grief", "sorrow", "shame"],
        ),
        Effect::Regret => (
            &["guilt", "remorse", "despair", "regret", "shame"],
            &["satisfaction", "pride", "contentment"],
        ),
        Effect::Love => (
            &["love", "affection", "devotion", "tenderness"],
            &["hatred", "resentment", "contempt"],
        ),
        Effect::Fear => (
            &["fear", "paranoia", "anxiety", "dread", "terror"],
            &["courage", "confidence", "security"],
        ),
    }
}

/// Closeness of one trait map to `effect`; 1.0 when no indicator is present.
pub fn emotion_score(traits: &BTreeMap<String, f64>, effect: Effect) -> f64 {
    let (pos, inv) = effect_traits(effect);
    let mut sum = 0.0;
    let mut n = 0usize;
    for (name, v) in traits {
        if pos.contains(&name.as_str()) {
            sum += v;
            n += 1;
        } else if inv.contains(&name.as_str()) {
            sum += 1.0 - v;
            n += 1;
        }
    }
    if n == 0 {
        1.0
    } else {
        sum / n as f64
    }
}

/// Per-focal closeness at the anchor's fabula cursor, and their mean.
/// Unknown entities are skipped.
pub fn score_emotion(world: &WorldState, focals: &[String], anchor: &Anchor, effect: Effect) -> (f64, BTreeMap<String, f64>) {
    let mut per_entity = BTreeMap::new();
    for f in focals {
        let Ok(snap) = reconstruct_entity(world, f, anchor.fabula) else { continue };
        let traits: BTreeMap<String, f64> = snap.traits.into_iter().map(|(k, v)| (k, v.value)).collect();
        per_entity.insert(f.clone(), emotion_score(&traits, effect));
    }
    let score = if per_entity.is_empty() {
        0.0
    } else {
        per_entity.values().sum::<f64>() / per_entity.len() as f64
    };
    (score, per_entity)
}
