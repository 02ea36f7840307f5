//! Reader-state scorers: mystery, dramatic irony, suspense and surprise,
//! plus six emotion closeness scores, evaluated at a (fabula, syuzhet)
//! anchor.

mod emotion;
mod irony;
mod mystery;
mod settings;
mod surprise;
mod suspense;
mod trajectory;

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::causal::mechanism_kind;
use crate::world::{EventNode, WorldState};

pub use emotion::{effect_traits, emotion_score, score_emotion, Effect};
pub use irony::{score_irony, IronyBreakdown};
pub use mystery::{path_strengths, score_mystery, MysteryBreakdown, MysteryEffect};
pub use settings::{ScorerSettings, SettingsError, ENV_PREFIX};
pub use surprise::{
    anachrony, bernoulli_kl, score_surprise, trait_posterior, SurpriseBreakdown, SurpriseMode, TraitSurprise,
};
pub use suspense::{efk_cell, score_suspense, Bucket, Forecast, KindTotals, SuspenseBreakdown, SuspenseCell, SuspenseMode};
pub use trajectory::{even_anchors, fabula_anchors, sample_trajectory, score, ScoreOptions};

/// Fabula and syuzhet cursors. An absent syuzhet cursor stands for an
/// omniscient reader who has seen everything.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Anchor {
    pub fabula: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syuzhet: Option<i64>,
}

impl Anchor {
    /// Syuzhet cursor at `s` with the fabula cursor at the world's end.
    pub fn syuzhet(world: &WorldState, s: i64) -> Self {
        Self {
            fabula: world.max_fabula(),
            syuzhet: Some(s),
        }
    }

    pub fn omniscient(fabula: i64) -> Self {
        Self { fabula, syuzhet: None }
    }

    /// Whether the reader has seen `e` by this anchor.
    pub fn reveals(&self, e: &EventNode) -> bool {
        self.syuzhet.is_none_or(|s| e.syuzhet_index <= s)
    }

    /// Whether `e` has happened in the story by the fabula cursor.
    pub fn exists(&self, e: &EventNode) -> bool {
        e.fabula_time <= self.fabula
    }
}

/// The ten scorers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scorer {
    Mystery,
    Irony,
    Suspense,
    Surprise,
    Grief,
    Rage,
    Joy,
    Regret,
    Love,
    Fear,
}

impl Scorer {
    pub const ALL: [Scorer; 10] = [
        Scorer::Mystery,
        Scorer::Irony,
        Scorer::Suspense,
        Scorer::Surprise,
        Scorer::Grief,
        Scorer::Rage,
        Scorer::Joy,
        Scorer::Regret,
        Scorer::Love,
        Scorer::Fear,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Scorer::Mystery => "mystery",
            Scorer::Irony => "irony",
            Scorer::Suspense => "suspense",
            Scorer::Surprise => "surprise",
            Scorer::Grief => "grief",
            Scorer::Rage => "rage",
            Scorer::Joy => "joy",
            Scorer::Regret => "regret",
            Scorer::Love => "love",
            Scorer::Fear => "fear",
        }
    }

    pub fn effect(self) -> Option<Effect> {
        match self {
            Scorer::Grief => Some(Effect::Grief),
            Scorer::Rage => Some(Effect::Rage),
            Scorer::Joy => Some(Effect::Joy),
            Scorer::Regret => Some(Effect::Regret),
            Scorer::Love => Some(Effect::Love),
            Scorer::Fear => Some(Effect::Fear),
            _ => None,
        }
    }
}

impl fmt::Display for Scorer {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
#[error("unknown scorer `{0}`")]
pub struct UnknownScorer(pub String);

impl FromStr for Scorer {
    type Err = UnknownScorer;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Scorer::ALL
            .into_iter()
            .find(|x| x.as_str() == s)
            .ok_or_else(|| UnknownScorer(s.to_string()))
    }
}

/// Per-scorer detail from which the scalar can be recomputed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Breakdown {
    Mystery(MysteryBreakdown),
    Irony(IronyBreakdown),
    Suspense(SuspenseBreakdown),
    Surprise(SurpriseBreakdown),
    Emotion { per_entity: BTreeMap<String, f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreReport {
    pub scorer: Scorer,
    pub anchor: Anchor,
    pub score: f64,
    pub breakdown: Breakdown,
}

/// Harm kind and its salience for an event: the most salient kind among
/// the mechanisms on its incident causal edges, `physical` when none
/// resolves.
pub fn event_harm(world: &WorldState, event_id: &str, settings: &ScorerSettings) -> (String, f64) {
    let mut best: Option<(String, f64)> = None;
    for e in world
        .causal_topology
        .iter()
        .filter(|e| e.source_id == event_id || e.target_id == event_id)
    {
        let Some(kind) = mechanism_kind(&e.mechanism) else { continue };
        let s = settings.harm_salience(kind);
        if best.as_ref().is_none_or(|(k, b)| s > *b || (s == *b && kind < k.as_str())) {
            best = Some((kind.to_string(), s));
        }
    }
    best.unwrap_or_else(|| ("physical".to_string(), settings.harm_salience("physical")))
}

/// Events that exist at the anchor's fabula cursor.
pub(crate) fn existing<'a>(world: &'a WorldState, anchor: &'a Anchor) -> impl Iterator<Item = &'a EventNode> + 'a {
    world.events.iter().filter(move |e| anchor.exists(e))
}
