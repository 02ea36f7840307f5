//! Topological impulse propagation with the inertia gate, spatial and
//! affordance blocks, cycle condensation and the noisy-OR variant.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use petgraph::algo::tarjan_scc;
use petgraph::graph::{DiGraph, NodeIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::mechanism::attenuation;
use super::surgery::{prune_beliefs, Surgery};
use super::{BlockReason, Blocked, CausalSettings, Mutation, MutationCause, PropagationMode};
use crate::ego::{QueryType, Sandbox};
use crate::world::{
    clamp_axis, clamp_unit, reconstruct_entity, Axis, CausalEdge, CausalityType, NodeFamily, WorldState,
};

/// Result of the inertia gate over one target attribute.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GateOutcome {
    /// `Ī = ΣI / max(1, Σw)`.
    pub mean_impact: f64,
    /// `Ī − sgn(Ī)·ι` when the gate opens, else 0.
    pub delta: f64,
    pub fires: bool,
}

/// Deterministic gate over `(impact, weight)` pairs.
pub fn gate(impulses: &[(f64, f64)], inertia: f64, epsilon: f64) -> GateOutcome {
    let sum_i: f64 = impulses.iter().map(|(i, _)| i).sum();
    let sum_w: f64 = impulses.iter().map(|(_, w)| w).sum();
    let mean = sum_i / sum_w.max(1.0);
    let fires = mean.abs() > inertia + epsilon;
    GateOutcome {
        mean_impact: mean,
        delta: if fires { mean - mean.signum() * inertia } else { 0.0 },
        fires,
    }
}

pub fn logistic(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// The attribute an edge pushes on its target: a trait name, an ambient key,
/// `value` on world traits, `rel:<counterpart>:<axis>` for social mutations,
/// or `occurs` for enabling edges into events, objects and channels.
pub(crate) fn impulse_attr(e: &CausalEdge) -> String {
    match NodeFamily::of(&e.target_id) {
        Some(NodeFamily::GlobalTrait) => "value".into(),
        Some(NodeFamily::Entity | NodeFamily::Location) => match (&e.trait_target, &e.rel_counterpart_id) {
            (Some(axis), Some(cp)) if e.causality_type == CausalityType::MutationSocial => {
                format!("rel:{cp}:{axis}")
            }
            (Some(t), _) => t.clone(),
            (None, _) => "occurs".into(),
        },
        _ => "occurs".into(),
    }
}

/// `(counterpart, axis)` of a `rel:<cp>:<axis>` attribute.
pub(crate) fn split_rel(attr: &str) -> Option<(&str, &str)> {
    attr.strip_prefix("rel:")?.rsplit_once(':')
}

/// What one propagation pass produced.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Propagation {
    pub mutations: Vec<Mutation>,
    pub blocked: Vec<Blocked>,
    pub noisy_or_probabilities: BTreeMap<String, f64>,
    /// Every event that does not occur, whether intervened or cascaded.
    pub deactivated_event_ids: Vec<String>,
    /// Beliefs dropped because their provenance event cascaded out.
    pub cascade_pruned_beliefs: usize,
}

struct Pass<'a> {
    world: &'a WorldState,
    surgery: &'a Surgery,
    settings: &'a CausalSettings,
    anchor: i64,
    inactive: BTreeSet<String>,
    /// Affordance-gate edges whose object check failed.
    gate_failed: BTreeSet<String>,
    locations: BTreeMap<String, Option<String>>,
    stripped: Option<WorldState>,
    out: Propagation,
    rng: ChaCha8Rng,
}

/// Propagates impulses through the sandbox causal topology.
///
/// Nodes are visited in topological order of the condensation; edges inside
/// a cycle are blocked. Observation queries carry only standing influences,
/// so edges out of events are left alone there.
pub fn propagate(
    sandbox: &mut Sandbox,
    world: &WorldState,
    surgery: &Surgery,
    settings: &CausalSettings,
    seed: u64,
) -> Propagation {
    let edges = sandbox.world.causal_topology.clone();
    let standing_only = sandbox.query_type == QueryType::Observation;

    let event_ids: Vec<String> = sandbox.world.events.iter().map(|e| e.id.clone()).collect();
    let mut names: BTreeSet<&str> = event_ids.iter().map(String::as_str).collect();
    for e in &edges {
        names.insert(&e.source_id);
        names.insert(&e.target_id);
    }
    let mut g: DiGraph<&str, usize> = DiGraph::new();
    let index: BTreeMap<&str, NodeIndex> = names.iter().map(|n| (*n, g.add_node(n))).collect();
    for (i, e) in edges.iter().enumerate() {
        g.add_edge(index[e.source_id.as_str()], index[e.target_id.as_str()], i);
    }
    let sccs = tarjan_scc(&g);
    let mut comp = vec![0usize; g.node_count()];
    for (c, members) in sccs.iter().enumerate() {
        for n in members {
            comp[n.index()] = c;
        }
    }
    let in_cycle = |e: &CausalEdge| {
        let (a, b) = (index[e.source_id.as_str()], index[e.target_id.as_str()]);
        comp[a.index()] == comp[b.index()] && (a == b || sccs[comp[a.index()]].len() > 1)
    };

    let mut pass = Pass {
        world,
        surgery,
        settings,
        anchor: sandbox.anchor_fabula,
        inactive: surgery.inactive_events.clone(),
        gate_failed: BTreeSet::new(),
        locations: BTreeMap::new(),
        stripped: None,
        out: Propagation::default(),
        rng: ChaCha8Rng::seed_from_u64(seed),
    };

    let mut incoming: BTreeMap<&str, Vec<&CausalEdge>> = BTreeMap::new();
    for e in &edges {
        if in_cycle(e) {
            pass.out.blocked.push(Blocked {
                edge: e.key(),
                target_id: e.target_id.clone(),
                attr: impulse_attr(e),
                reason: BlockReason::Cycle,
                impact: 0.0,
            });
        } else if !(standing_only && NodeFamily::of(&e.source_id) == Some(NodeFamily::Event)) {
            incoming.entry(e.target_id.as_str()).or_default().push(e);
        }
    }
    let mut outgoing: BTreeMap<&str, Vec<&CausalEdge>> = BTreeMap::new();
    for e in &edges {
        outgoing.entry(e.source_id.as_str()).or_default().push(e);
    }

    let before: BTreeSet<String> = pass.inactive.clone();
    for members in sccs.iter().rev() {
        let mut ids: Vec<&str> = members.iter().map(|n| g[*n]).collect();
        ids.sort_unstable();
        for id in ids {
            let inbound = incoming.get(id).map(Vec::as_slice).unwrap_or_default();
            if NodeFamily::of(id) == Some(NodeFamily::Event) {
                pass.settle_event(sandbox, id, inbound);
                if pass.inactive.contains(id) {
                    let out = outgoing.get(id).map(Vec::as_slice).unwrap_or_default();
                    pass.retract(sandbox, id, out);
                }
            } else if matches!(NodeFamily::of(id), Some(NodeFamily::Object | NodeFamily::Channel)) {
                for e in inbound {
                    let reason = pass.enabling_reason(sandbox, e, false);
                    pass.block(e, reason, 0.0);
                }
            } else {
                let mut by_attr: BTreeMap<String, Vec<&CausalEdge>> = BTreeMap::new();
                for e in inbound {
                    by_attr.entry(impulse_attr(e)).or_default().push(e);
                }
                for (attr, group) in by_attr {
                    pass.settle_state(sandbox, id, &attr, &group);
                }
            }
        }
    }

    if settings.drift_rho > 0.0 {
        pass.drift(sandbox);
    }
    let cascaded: BTreeSet<String> = pass.inactive.difference(&before).cloned().collect();
    pass.out.cascade_pruned_beliefs = prune_beliefs(sandbox, &cascaded, &BTreeSet::new());
    pass.out.deactivated_event_ids = pass.inactive.iter().cloned().collect();
    pass.out
}

impl Pass<'_> {
    fn block(&mut self, e: &CausalEdge, reason: BlockReason, impact: f64) {
        self.out.blocked.push(Blocked {
            edge: e.key(),
            target_id: e.target_id.clone(),
            attr: impulse_attr(e),
            reason,
            impact,
        });
    }

    fn source_inactive(&self, e: &CausalEdge) -> bool {
        let s = &e.source_id;
        self.inactive.contains(s) || self.surgery.disabled_objects.contains(s) || self.surgery.disabled_channels.contains(s)
    }

    fn location_of(&mut self, sandbox: &Sandbox, id: &str) -> Option<String> {
        match NodeFamily::of(id)? {
            NodeFamily::Location => Some(id.to_string()),
            NodeFamily::Event => self.world.event(id)?.location_id.clone(),
            NodeFamily::Object => self.world.object(id)?.location_id.clone(),
            NodeFamily::Entity => {
                if !self.locations.contains_key(id) {
                    let loc = reconstruct_entity(self.world, id, sandbox.anchor_fabula)
                        .ok()
                        .and_then(|s| s.location_id);
                    self.locations.insert(id.to_string(), loc);
                }
                self.locations[id].clone()
            }
            _ => None,
        }
    }

    fn connected(&self, a: &str, b: &str) -> bool {
        let mut seen: BTreeSet<&str> = [a].into();
        let mut queue: VecDeque<&str> = [a].into();
        while let Some(n) = queue.pop_front() {
            if n == b {
                return true;
            }
            for s in self.world.spatial_topology.iter().filter(|s| !s.is_locked) {
                let next = if s.source_id == n {
                    &s.target_id
                } else if s.target_id == n {
                    &s.source_id
                } else {
                    continue;
                };
                if seen.insert(next) {
                    queue.push_back(next);
                }
            }
        }
        false
    }

    fn shares_channel(&self, e: &CausalEdge) -> bool {
        if NodeFamily::of(&e.target_id) != Some(NodeFamily::Entity) {
            return false;
        }
        let event = self.world.event(&e.source_id);
        self.world.channels.iter().any(|ch| {
            if self.surgery.disabled_channels.contains(&ch.id)
                || !ch.is_open_at(self.anchor)
                || !ch.participant_ids.contains(&e.target_id)
            {
                return false;
            }
            ch.participant_ids.contains(&e.source_id)
                || event.is_some_and(|ev| {
                    ev.via_channel_id.as_deref() == Some(ch.id.as_str())
                        || ev.participants().any(|p| p != e.target_id && ch.participant_ids.iter().any(|c| c == p))
                })
        })
    }

    /// Cross-location influence needs co-location, an unlocked path, or a
    /// shared open channel.
    fn spatial_ok(&mut self, sandbox: &Sandbox, e: &CausalEdge) -> bool {
        if NodeFamily::of(&e.source_id) == Some(NodeFamily::GlobalTrait) {
            return true;
        }
        let (Some(src), Some(tgt)) = (self.location_of(sandbox, &e.source_id), self.location_of(sandbox, &e.target_id))
        else {
            return true;
        };
        src == tgt || self.connected(&src, &tgt) || self.shares_channel(e)
    }

    fn actor_trait(&self, sandbox: &Sandbox, actor: &str, t: &str) -> Option<f64> {
        sandbox.value(actor, t).or_else(|| {
            reconstruct_entity(self.world, actor, self.anchor)
                .ok()
                .and_then(|s| s.trait_value(t))
        })
    }

    /// An object gates an event when it offers some affordance whose
    /// required trait one of the event's actors carries at 0.5 or above.
    fn affordance_ok(&self, sandbox: &Sandbox, object: &str, event: &str) -> bool {
        let Some(obj) = self.world.object(object) else {
            return false;
        };
        let actors: Vec<&str> = self
            .world
            .event(event)
            .map(|ev| ev.actor_ids.iter().map(String::as_str).chain(ev.speaker_id.as_deref()).collect())
            .unwrap_or_default();
        obj.affordances.iter().any(|a| match &a.required_trait {
            None => true,
            Some(t) => actors
                .iter()
                .any(|actor| self.actor_trait(sandbox, actor, t).is_some_and(|v| v >= 0.5)),
        })
    }

    fn enabling_reason(&mut self, sandbox: &Sandbox, e: &CausalEdge, target_inactive: bool) -> BlockReason {
        if self.source_inactive(e) {
            BlockReason::BlockedByIntervention
        } else if self.gate_failed.contains(&e.key()) {
            BlockReason::Affordance
        } else if !self.spatial_ok(sandbox, e) {
            BlockReason::Spatial
        } else if target_inactive {
            BlockReason::BlockedByIntervention
        } else if self.settings.mode == PropagationMode::NoisyOr {
            BlockReason::NoisyOrAbsorbed
        } else {
            BlockReason::Inertia
        }
    }

    /// Decides whether an event still occurs, then records its inbound
    /// enabling edges. Occurrence has inertia 1, so an enabling edge never
    /// moves it; it can only be cascaded out or gated shut.
    fn settle_event(&mut self, sandbox: &Sandbox, id: &str, inbound: &[&CausalEdge]) {
        if !self.surgery.forced_events.contains(id) && !self.inactive.contains(id) {
            let chain: Vec<&&CausalEdge> = inbound
                .iter()
                .filter(|e| {
                    e.causality_type == CausalityType::ChainReaction
                        && NodeFamily::of(&e.source_id) == Some(NodeFamily::Event)
                })
                .collect();
            let orphaned = !chain.is_empty() && chain.iter().all(|e| self.inactive.contains(&e.source_id));
            let mut gated_out = false;
            for e in inbound.iter().filter(|e| e.causality_type == CausalityType::AffordanceGate) {
                if NodeFamily::of(&e.source_id) != Some(NodeFamily::Object) {
                    continue;
                }
                if self.surgery.disabled_objects.contains(&e.source_id) {
                    gated_out = true;
                } else if !self.affordance_ok(sandbox, &e.source_id, id) {
                    self.gate_failed.insert(e.key());
                    gated_out = true;
                }
            }
            if orphaned || gated_out {
                self.inactive.insert(id.to_string());
            }
        }
        let target_inactive = self.inactive.contains(id);
        for e in inbound {
            let reason = self.enabling_reason(sandbox, e, target_inactive);
            self.block(e, reason, 0.0);
        }
    }

    /// A factual arc laid down by an event that no longer occurs is undone:
    /// every trait the event mutated reverts to what the timeline would hold
    /// at the anchor without that event's updates.
    fn retract(&mut self, sandbox: &mut Sandbox, event: &str, outgoing: &[&CausalEdge]) {
        let Some(ev) = self.world.event(event) else { return };
        if ev.fabula_time > self.anchor {
            return;
        }
        let from = ev.fabula_time;
        for e in outgoing {
            if e.causality_type != CausalityType::Mutation || NodeFamily::of(&e.target_id) != Some(NodeFamily::Entity) {
                continue;
            }
            let Some(t) = e.trait_target.as_deref() else { continue };
            if self.surgery.is_pinned(&e.target_id, t) {
                continue;
            }
            let stripped = self.stripped.get_or_insert_with(|| self.world.clone());
            let Some(ent) = stripped.entity_mut(&e.target_id) else { continue };
            for entry in ent.state_timeline.iter_mut().filter(|x| x.fabula_time >= from) {
                entry.traits.remove(t);
            }
            let Some(reverted) = reconstruct_entity(stripped, &e.target_id, self.anchor)
                .ok()
                .and_then(|s| s.trait_value(t))
            else {
                continue;
            };
            let old = sandbox.value(&e.target_id, t).unwrap_or(reverted);
            if (reverted - old).abs() > 1e-12 {
                sandbox.set_value(&e.target_id, t, reverted);
                self.out.mutations.push(Mutation {
                    node_id: e.target_id.clone(),
                    attr: t.to_string(),
                    old,
                    new: reverted,
                    impact: reverted - old,
                    edges: vec![e.key()],
                    fabula_time: from,
                    cause: MutationCause::Retraction(event.to_string()),
                });
            }
        }
    }

    fn inertia(&self, sandbox: &Sandbox, node: &str, attr: &str) -> f64 {
        match NodeFamily::of(node) {
            Some(NodeFamily::Entity) => match split_rel(attr) {
                Some((cp, axis)) => sandbox
                    .world
                    .relationship(node, cp)
                    .zip(Axis::parse(axis))
                    .and_then(|(r, a)| r.metrics.get(&a))
                    .map_or(0.0, |m| m.inertia),
                None => sandbox
                    .world
                    .entity(node)
                    .and_then(|e| e.traits.get(attr))
                    .map_or(0.5, |t| t.inertia),
            },
            Some(NodeFamily::GlobalTrait) => sandbox.world.world_trait(node).map_or(0.5, |w| w.inertia),
            _ => 0.5,
        }
    }

    fn source_value(&self, sandbox: &Sandbox, e: &CausalEdge, attr: &str) -> f64 {
        let name = split_rel(attr).map_or(attr, |(_, axis)| axis);
        let read = e.source_trait.as_deref().unwrap_or(name);
        match NodeFamily::of(&e.source_id) {
            Some(NodeFamily::Entity | NodeFamily::Location) => sandbox.value(&e.source_id, read).unwrap_or(1.0),
            Some(NodeFamily::GlobalTrait) => sandbox.value(&e.source_id, "value").unwrap_or(1.0),
            _ => 1.0,
        }
    }

    fn settle_state(&mut self, sandbox: &mut Sandbox, node: &str, attr: &str, group: &[&CausalEdge]) {
        if attr == "occurs" || self.surgery.is_pinned(node, attr) {
            for e in group {
                let reason = self.enabling_reason(sandbox, e, self.surgery.is_pinned(node, attr));
                self.block(e, reason, 0.0);
            }
            return;
        }
        let current = sandbox.value(node, attr).unwrap_or(0.0);
        let inertia = self.inertia(sandbox, node, attr);
        let trait_name = split_rel(attr).map_or(attr, |(_, axis)| axis);

        let mut live: Vec<(&CausalEdge, f64, f64)> = Vec::new();
        for e in group {
            if self.source_inactive(e) {
                self.block(e, BlockReason::BlockedByIntervention, 0.0);
                continue;
            }
            if !self.spatial_ok(sandbox, e) {
                self.block(e, BlockReason::Spatial, 0.0);
                continue;
            }
            let w = e.weight() * attenuation(trait_name, &e.mechanism, self.settings.mechanism_attenuation);
            let diff = e.trait_delta.unwrap_or_else(|| self.source_value(sandbox, e, attr) - current);
            live.push((e, diff * w, w));
        }
        if live.is_empty() {
            return;
        }
        let pairs: Vec<(f64, f64)> = live.iter().map(|(_, i, w)| (*i, *w)).collect();
        let g = gate(&pairs, inertia, self.settings.epsilon);

        let (fires, delta, absorbed) = match self.settings.mode {
            PropagationMode::Deterministic => (g.fires, g.delta, BlockReason::Inertia),
            PropagationMode::NoisyOr => {
                let beta = self.settings.noisy_or_beta;
                let stay: f64 = pairs
                    .iter()
                    .map(|(i, _)| 1.0 - logistic(beta * (i.abs() - inertia)))
                    .product();
                let p = 1.0 - stay;
                self.out.noisy_or_probabilities.insert(format!("{node}.{attr}"), p);
                let fires = if self.settings.distribution {
                    self.rng.random::<f64>() < p
                } else {
                    p >= 0.5
                };
                (fires, g.mean_impact * (1.0 - inertia), BlockReason::NoisyOrAbsorbed)
            }
        };
        if !fires {
            for (e, i, _) in live {
                self.block(e, absorbed, i);
            }
            return;
        }
        let new = if split_rel(attr).is_some() {
            clamp_axis(current + delta)
        } else {
            clamp_unit(current + delta)
        };
        sandbox.set_value(node, attr, new);
        let fabula_time = live
            .iter()
            .map(|(e, _, _)| {
                let at = self.world.event(&e.source_id).map_or(e.fabula_time, |ev| ev.fabula_time.max(e.fabula_time));
                at + e.propagation_delay.unwrap_or(0)
            })
            .max()
            .unwrap_or(self.anchor);
        self.out.mutations.push(Mutation {
            node_id: node.to_string(),
            attr: attr.to_string(),
            old: current,
            new,
            impact: g.mean_impact,
            edges: live.iter().map(|(e, _, _)| e.key()).collect(),
            fabula_time,
            cause: MutationCause::Propagation,
        });
    }

    /// Pulls each propagated value back toward the authored baseline by
    /// `(1 − ι)·ρ`.
    fn drift(&mut self, sandbox: &mut Sandbox) {
        let rho = self.settings.drift_rho;
        for i in 0..self.out.mutations.len() {
            let m = &self.out.mutations[i];
            if m.cause != MutationCause::Propagation {
                continue;
            }
            let base = baseline(self.world, &m.node_id, &m.attr).unwrap_or(m.old);
            let pull = (1.0 - self.inertia(sandbox, &m.node_id, &m.attr)) * rho;
            let m = &mut self.out.mutations[i];
            m.new += (base - m.new) * pull;
            sandbox.set_value(&m.node_id, &m.attr, m.new);
        }
    }
}

fn baseline(world: &WorldState, node: &str, attr: &str) -> Option<f64> {
    match NodeFamily::of(node)? {
        NodeFamily::Entity => match split_rel(attr) {
            Some((cp, axis)) => world
                .relationship(node, cp)?
                .metrics
                .get(&Axis::parse(axis)?)
                .map(|m| m.value),
            None => world.entity(node)?.traits.get(attr).map(|t| t.value),
        },
        NodeFamily::Location => world.location(node)?.ambient_state.get(attr).map(|a| a.value),
        NodeFamily::GlobalTrait => Some(world.world_trait(node)?.value),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gate_blocks_below_inertia() {
        let g = gate(&[(0.4 * 0.5, 0.5)], 0.7, 1e-9);
        assert!((g.mean_impact - 0.2).abs() < 1e-12);
        assert!(!g.fires);
        assert_eq!(g.delta, 0.0);
    }

    #[test]
    fn gate_fires_and_subtracts_inertia() {
        let g = gate(&[(0.9, 1.0)], 0.3, 1e-9);
        assert!(g.fires);
        assert!((g.delta - 0.6).abs() < 1e-12);
        let g = gate(&[(-0.9, 1.0)], 0.3, 1e-9);
        assert!((g.delta + 0.6).abs() < 1e-12);
    }

    #[test]
    fn heavy_parents_are_averaged() {
        // Two parents, w = 2 and 1, differentials 0.9 and 0.3.
        let oracle_mean = (0.9 * 2.0 + 0.3 * 1.0) / 3.0;
        let g = gate(&[(0.9 * 2.0, 2.0), (0.3 * 1.0, 1.0)], 0.5, 1e-9);
        assert!((g.mean_impact - oracle_mean).abs() < 1e-12);
        assert!((g.delta - (oracle_mean - 0.5)).abs() < 1e-12);
    }

    #[test]
    fn impulse_attr_forms() {
        let mut e = CausalEdge::new("EVT_A", "ENT_B", CausalityType::MutationSocial);
        e.trait_target = Some("trust".into());
        e.rel_counterpart_id = Some("ENT_C".into());
        assert_eq!(impulse_attr(&e), "rel:ENT_C:trust");
        assert_eq!(split_rel("rel:ENT_C:trust"), Some(("ENT_C", "trust")));
        let e = CausalEdge::new("EVT_A", "EVT_B", CausalityType::ChainReaction);
        assert_eq!(impulse_attr(&e), "occurs");
        let e = CausalEdge::new("LOC_A", "WORLD_X", CausalityType::AmbientPropagation);
        assert_eq!(impulse_attr(&e), "value");
    }
}
