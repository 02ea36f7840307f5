//! Abduction: blending the historical sandbox prior toward present-day
//! evidence before the do-operator runs.

use std::collections::BTreeSet;

use super::{AbductionMode, CausalError, CausalSettings, HiddenDelta};
use crate::ego::Sandbox;
use crate::intervention::{split_target, Evidence};
use crate::world::{clamp_axis, clamp_unit, reconstruct_entity, NodeFamily, TraitVector, WorldState};

/// `(ι·prior + κ·evidence) / (ι + κ)`; collapses to the evidence when both
/// precisions are zero.
pub fn bayes_blend(prior: f64, evidence: f64, inertia: f64, kappa: f64) -> f64 {
    let total = inertia + kappa;
    if total <= 0.0 {
        return evidence;
    }
    (inertia * prior + kappa * evidence) / total
}

/// `prior + (1 − ι)·(evidence − prior)`.
pub fn legacy_blend(prior: f64, evidence: f64, inertia: f64) -> f64 {
    prior + (1.0 - inertia) * (evidence - prior)
}

fn blend(settings: &CausalSettings, prior: f64, evidence: f64, inertia: f64) -> f64 {
    match settings.abduction {
        AbductionMode::Bayes => bayes_blend(prior, evidence, inertia, settings.evidence_precision),
        AbductionMode::Legacy => legacy_blend(prior, evidence, inertia),
    }
}

struct Recorder<'a> {
    sandbox: &'a mut Sandbox,
    deltas: Vec<HiddenDelta>,
}

impl Recorder<'_> {
    fn set(&mut self, node: &str, attr: &str, prior: f64, post: f64) {
        self.sandbox.set_value(node, attr, post);
        let delta = post - prior;
        if delta.abs() > 1e-12 {
            self.deltas.push(HiddenDelta {
                node_id: node.to_string(),
                attr: attr.to_string(),
                delta,
            });
        }
    }
}

/// Shifts sandbox values toward `evidence` and returns the shifts.
///
/// Evidence keys are `NODE` or `NODE.attr`; a `null` value reads the
/// factual terminal value from `world`. A bare entity pulls every trait,
/// every axis on its outgoing relationships, and reinstates beliefs it holds
/// at the terminal time, provided the provenance channel is intelligible to
/// it.
pub fn abduce(
    sandbox: &mut Sandbox,
    world: &WorldState,
    evidence: &Evidence,
    settings: &CausalSettings,
) -> Result<Vec<HiddenDelta>, CausalError> {
    let t_max = world.max_fabula();
    let threshold = world.intelligibility_threshold;
    let mut rec = Recorder {
        sandbox,
        deltas: Vec::new(),
    };

    for (key, given) in evidence {
        let (node, attr) = split_target(key);
        if !rec.sandbox.nodes.contains_key(node) {
            return Err(CausalError::UnknownTarget(key.clone()));
        }
        match NodeFamily::of(node) {
            Some(NodeFamily::Entity) => {
                let present = reconstruct_entity(world, node, t_max).map_err(|_| CausalError::UnknownTarget(key.clone()))?;
                let traits: BTreeSet<String> = match attr {
                    Some(a) if a.starts_with("rel:") => BTreeSet::new(),
                    Some(a) => [a.to_string()].into(),
                    None => {
                        let mut all: BTreeSet<String> = present.traits.keys().cloned().collect();
                        if let Some(e) = rec.sandbox.world.entity(node) {
                            all.extend(e.traits.keys().cloned());
                        }
                        all
                    }
                };
                for t in &traits {
                    let Some(ev) = given.or_else(|| present.trait_value(t)) else {
                        continue;
                    };
                    let (prior, inertia) = rec
                        .sandbox
                        .world
                        .entity(node)
                        .and_then(|e| e.traits.get(t))
                        .map_or((0.0, 0.5), |tv| (tv.value, tv.inertia));
                    let prior = rec.sandbox.value(node, t).unwrap_or(prior);
                    let post = clamp_unit(blend(settings, prior, ev, inertia));
                    if let Some(e) = rec.sandbox.world.entity_mut(node) {
                        e.traits
                            .entry(t.clone())
                            .or_insert_with(|| TraitVector::new(prior, inertia, Default::default()))
                            .set_value(post);
                    }
                    rec.set(node, t, prior, post);
                }

                let axis_filter = attr.filter(|a| a.starts_with("rel:"));
                if attr.is_none() || axis_filter.is_some() {
                    for rel in world.social_topology.iter().filter(|r| r.source_id == node) {
                        for (axis, metric) in &rel.metrics {
                            let k = format!("rel:{}:{}", rel.target_id, axis.as_str());
                            if axis_filter.is_some_and(|a| a != k) {
                                continue;
                            }
                            let Some(prior) = rec.sandbox.value(node, &k) else {
                                continue;
                            };
                            let ev = if axis_filter.is_some() { given.unwrap_or(metric.value) } else { metric.value };
                            let post = clamp_axis(blend(settings, prior, ev, metric.inertia));
                            rec.set(node, &k, prior, post);
                        }
                    }
                }

                if attr.is_none() {
                    reinstate_beliefs(&mut rec, world, node, &present.beliefs, threshold);
                }
            }
            Some(NodeFamily::GlobalTrait) => {
                let Some(g) = world.world_trait(node) else { continue };
                let ev = given.unwrap_or_else(|| g.value_at(t_max).0);
                let inertia = rec.sandbox.world.world_trait(node).map_or(g.inertia, |w| w.inertia);
                let prior = rec.sandbox.value(node, "value").unwrap_or(g.value);
                let post = clamp_unit(blend(settings, prior, ev, inertia));
                rec.set(node, "value", prior, post);
            }
            Some(NodeFamily::Location) => {
                let Some(loc) = world.location(node) else { continue };
                for (name, amb) in &loc.ambient_state {
                    if attr.is_some_and(|a| a != name) {
                        continue;
                    }
                    let ev = given.unwrap_or(amb.value);
                    let prior = rec.sandbox.value(node, name).unwrap_or(amb.value);
                    let post = clamp_unit(blend(settings, prior, ev, 0.5));
                    rec.set(node, name, prior, post);
                }
            }
            _ => {}
        }
    }
    Ok(rec.deltas)
}

fn reinstate_beliefs(
    rec: &mut Recorder<'_>,
    world: &WorldState,
    node: &str,
    present: &[crate::world::Belief],
    threshold: f64,
) {
    for belief in present {
        let held = rec
            .sandbox
            .world
            .entity(node)
            .is_some_and(|e| e.beliefs.iter().any(|b| b.target_id == belief.target_id));
        if held {
            continue;
        }
        let legible = belief.acquired_via_channel_id.as_ref().is_none_or(|c| {
            world
                .channel(c)
                .is_some_and(|ch| ch.intelligibility_for(node) >= threshold)
        });
        if !legible {
            continue;
        }
        if let Some(e) = rec.sandbox.world.entity_mut(node) {
            e.beliefs.push(belief.clone());
        }
        rec.deltas.push(HiddenDelta {
            node_id: node.to_string(),
            attr: format!("belief:{}", belief.target_id),
            delta: belief.confidence,
        });
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn blend_examples() {
        assert!((bayes_blend(0.2, 0.6, 1.0, 1.0) - 0.4).abs() < 1e-12);
        assert_eq!(bayes_blend(0.2, 0.6, 0.0, 1.0), 0.6);
        assert!((bayes_blend(0.2, 0.6, 1e9, 1.0) - 0.2).abs() < 1e-8);
        assert!((legacy_blend(0.2, 0.6, 0.25) - 0.5).abs() < 1e-12);
    }
}
