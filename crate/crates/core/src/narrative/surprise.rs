//! Surprise: distance between what the reader expects of a character's
//! traits and what the story makes of them, plus discourse anachrony.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{existing, Anchor, ScorerSettings};
use crate::world::{reconstruct_entity, NodeFamily, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SurpriseMode {
    /// Gap between the terminal truth and the reader's current posterior.
    #[default]
    Cumulative,
    /// Posterior shift caused by the current position's revelations.
    Local,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraitSurprise {
    pub entity_id: String,
    pub trait_name: String,
    pub actual: f64,
    pub prior_mean: f64,
    pub posterior: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub previous_posterior: Option<f64>,
    pub salience: f64,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SurpriseBreakdown {
    pub mode: SurpriseMode,
    pub kl_component: f64,
    pub anachrony: f64,
    pub traits: Vec<TraitSurprise>,
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

/// Bernoulli KL divergence `KL(p || q)` in nats, with `0 ln 0 = 0`.
pub fn bernoulli_kl(p: f64, q: f64) -> f64 {
    xlogy(p, p / q) + xlogy(1.0 - p, (1.0 - p) / (1.0 - q))
}

/// Beta-Bernoulli reader posterior: a prior of mean `m` and pseudocount
/// `s`, updated by `(weight, evidence)` pairs, then clipped.
pub fn trait_posterior(m: f64, s: f64, updates: &[(f64, f64)], eps: f64) -> f64 {
    let (mut a, mut b) = (s * m, s * (1.0 - m));
    for &(w, p) in updates {
        a += w * p;
        b += w * (1.0 - p);
    }
    (a / (a + b)).clamp(eps, 1.0 - eps)
}

fn frontier(world: &WorldState, anchor: &Anchor) -> Option<i64> {
    existing(world, anchor)
        .filter(|e| anchor.reveals(e))
        .map(|e| e.fabula_time)
        .max()
}

fn edge_revealed(world: &WorldState, anchor: &Anchor, frontier: Option<i64>, src: &str, tgt: &str, t: i64) -> bool {
    let events: Vec<&str> = [src, tgt]
        .into_iter()
        .filter(|n| NodeFamily::of(n) == Some(NodeFamily::Event))
        .collect();
    if events.is_empty() {
        return frontier.is_some_and(|f| t <= f);
    }
    events
        .iter()
        .all(|id| world.event(id).is_some_and(|e| anchor.exists(e) && anchor.reveals(e)))
}

fn evidence(world: &WorldState, x: &str, actual: f64, anchor: &Anchor, settings: &ScorerSettings) -> Vec<(f64, f64)> {
    let f = frontier(world, anchor);
    world
        .causal_topology
        .iter()
        .filter(|e| e.target_id == x || e.source_id == x)
        .filter(|e| edge_revealed(world, anchor, f, &e.source_id, &e.target_id, e.fabula_time))
        .map(|e| {
            let w = if e.target_id == x {
                e.weight()
            } else {
                e.weight() * settings.surprise_source_edge_weight
            };
            (w, actual)
        })
        .collect()
}

/// Terminal trait values for every entity carrying each trait.
fn terminal_values(world: &WorldState) -> BTreeMap<String, BTreeMap<String, f64>> {
    let t = world.max_fabula();
    let mut out: BTreeMap<String, BTreeMap<String, f64>> = BTreeMap::new();
    for ent in &world.entities {
        let Ok(snap) = reconstruct_entity(world, &ent.id, t) else { continue };
        for (name, tv) in snap.traits {
            out.entry(name).or_default().insert(ent.id.clone(), tv.value);
        }
    }
    out
}

/// Mean normalized gap between fabula rank and syuzhet rank over the
/// revealed focal events (cumulative) or the events revealed exactly at
/// the cursor (local).
pub fn anachrony(world: &WorldState, focals: &[String], anchor: &Anchor, mode: SurpriseMode) -> f64 {
    let Some(s) = anchor.syuzhet else { return 0.0 };
    let events: Vec<_> = existing(world, anchor).collect();
    let n = events.len();
    if n < 2 {
        return 0.0;
    }
    let rank = |key: &dyn Fn(&&crate::world::EventNode) -> (i64, String)| -> BTreeMap<String, usize> {
        let mut v = events.clone();
        v.sort_by_key(|e| key(e));
        v.into_iter().enumerate().map(|(i, e)| (e.id.clone(), i)).collect()
    };
    let fab = rank(&|e| (e.fabula_time, e.id.clone()));
    let syu = rank(&|e| (e.syuzhet_index, e.id.clone()));
    let chosen: Vec<&str> = events
        .iter()
        .filter(|e| match mode {
            SurpriseMode::Cumulative => e.syuzhet_index <= s,
            SurpriseMode::Local => e.syuzhet_index == s,
        })
        .filter(|e| focals.is_empty() || focals.iter().any(|f| e.involves(f)))
        .map(|e| e.id.as_str())
        .collect();
    if chosen.is_empty() {
        return 0.0;
    }
    let total: f64 = chosen
        .iter()
        .map(|id| (fab[*id] as f64 - syu[*id] as f64).abs() / (n - 1) as f64)
        .sum();
    total / chosen.len() as f64
}

pub fn score_surprise(
    world: &WorldState,
    focals: &[String],
    anchor: &Anchor,
    settings: &ScorerSettings,
    mode: SurpriseMode,
) -> (f64, SurpriseBreakdown) {
    let mut out = SurpriseBreakdown {
        mode,
        kl_component: 0.0,
        anachrony: 0.0,
        traits: Vec::new(),
    };
    let Some(s) = anchor.syuzhet else { return (0.0, out) };
    let previous = Anchor {
        fabula: anchor.fabula,
        syuzhet: Some(s - 1),
    };
    let values = terminal_values(world);
    let focal_set: BTreeSet<&String> = focals.iter().collect();
    let eps = settings.surprise_clip_epsilon;
    let pseudo = settings.surprise_prior_pseudocount;

    let (mut num, mut den) = (0.0, 0.0);
    for x in focal_set {
        for (name, carriers) in &values {
            let Some(&actual) = carriers.get(x) else { continue };
            let others: Vec<f64> = carriers.iter().filter(|(id, _)| *id != x).map(|(_, v)| *v).collect();
            let m = if others.len() < 2 {
                0.5
            } else {
                others.iter().sum::<f64>() / others.len() as f64
            };
            let q = trait_posterior(m, pseudo, &evidence(world, x, actual, anchor, settings), eps);
            let (kl, prev) = match mode {
                SurpriseMode::Cumulative => (bernoulli_kl(actual, q), None),
                SurpriseMode::Local => {
                    let q0 = trait_posterior(m, pseudo, &evidence(world, x, actual, &previous, settings), eps);
                    (bernoulli_kl(q, q0), Some(q0))
                }
            };
            let salience = settings.trait_salience(name);
            num += salience * (1.0 - (-kl).exp());
            den += salience;
            out.traits.push(TraitSurprise {
                entity_id: x.clone(),
                trait_name: name.clone(),
                actual,
                prior_mean: m,
                posterior: q,
                previous_posterior: prev,
                salience,
                kl,
            });
        }
    }
    out.kl_component = if den > 0.0 { num / den } else { 0.0 };
    out.anachrony = anachrony(world, focals, anchor, mode);
    let score = settings.surprise_trait_kl_weight * out.kl_component + settings.surprise_anachrony_weight * out.anachrony;
    (score, out)
}
