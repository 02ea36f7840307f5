//! Scorer dispatch and sampling along the syuzhet or fabula axis.

use serde::{Deserialize, Serialize};

use super::{
    score_emotion, score_irony, score_mystery, score_surprise, score_suspense, Anchor, Breakdown, ScoreReport, Scorer,
    ScorerSettings, SurpriseMode, SuspenseMode,
};
use crate::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ScoreOptions {
    #[serde(default)]
    pub suspense_mode: SuspenseMode,
    #[serde(default)]
    pub surprise_mode: SurpriseMode,
}

pub fn score(
    world: &WorldState,
    scorer: Scorer,
    focals: &[String],
    anchor: &Anchor,
    settings: &ScorerSettings,
    options: ScoreOptions,
) -> ScoreReport {
    let (score, breakdown) = match scorer {
        Scorer::Mystery => {
            let (s, b) = score_mystery(world, focals, anchor, settings);
            (s, Breakdown::Mystery(b))
        }
        Scorer::Irony => {
            let (s, b) = score_irony(world, focals, anchor, settings);
            (s, Breakdown::Irony(b))
        }
        Scorer::Suspense => {
            let (s, b) = score_suspense(world, focals, anchor, settings, options.suspense_mode);
            (s, Breakdown::Suspense(b))
        }
        Scorer::Surprise => {
            let (s, b) = score_surprise(world, focals, anchor, settings, options.surprise_mode);
            (s, Breakdown::Surprise(b))
        }
        other => {
            let effect = other.effect().expect("emotion scorer");
            let (s, per_entity) = score_emotion(world, focals, anchor, effect);
            (s, Breakdown::Emotion { per_entity })
        }
    };
    ScoreReport {
        scorer,
        anchor: *anchor,
        score,
        breakdown,
    }
}

/// `n` syuzhet anchors spread evenly from the first to the last position,
/// with the fabula cursor at the world's end. Duplicates are dropped.
pub fn even_anchors(world: &WorldState, n: usize) -> Vec<Anchor> {
    let (Some(lo), Some(hi)) = (world.min_syuzhet(), world.max_syuzhet()) else {
        return Vec::new();
    };
    let mut out: Vec<Anchor> = match n {
        0 => Vec::new(),
        1 => vec![Anchor::syuzhet(world, hi)],
        _ => (0..n)
            .map(|i| {
                let s = lo as f64 + (hi - lo) as f64 * i as f64 / (n - 1) as f64;
                Anchor::syuzhet(world, s.round() as i64)
            })
            .collect(),
    };
    out.dedup();
    out
}

/// `n` omniscient fabula anchors spread evenly over the event times.
pub fn fabula_anchors(world: &WorldState, n: usize) -> Vec<Anchor> {
    let lo = world.events.iter().map(|e| e.fabula_time).min();
    let (Some(lo), hi) = (lo, world.max_fabula()) else {
        return Vec::new();
    };
    let mut out: Vec<Anchor> = match n {
        0 => Vec::new(),
        1 => vec![Anchor::omniscient(hi)],
        _ => (0..n)
            .map(|i| {
                let t = lo as f64 + (hi - lo) as f64 * i as f64 / (n - 1) as f64;
                Anchor::omniscient(t.round() as i64)
            })
            .collect(),
    };
    out.dedup();
    out
}

pub fn sample_trajectory(
    world: &WorldState,
    scorer: Scorer,
    focals: &[String],
    anchors: &[Anchor],
    settings: &ScorerSettings,
    options: ScoreOptions,
) -> Vec<ScoreReport> {
    anchors
        .iter()
        .map(|a| score(world, scorer, focals, a, settings, options))
        .collect()
}
