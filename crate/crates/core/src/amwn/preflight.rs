//! Consistency, independence and exclusion screening ahead of simulation.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::diagram::{build_causal_diagram, CausalDiagram};
use super::network::{build_amwn, WorldSpec};
use crate::intervention::{split_target, Evidence, InterventionSpec};
use crate::world::{reconstruct_entity, NodeFamily, WorldState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PreflightMode {
    /// Flag only; the query runs unchanged.
    #[default]
    Advisory,
    /// Drop flagged items before simulation.
    Prune,
    /// Skip the screen entirely.
    Off,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PreflightReport {
    pub mode: PreflightMode,
    pub rule1_vacuous: Vec<String>,
    pub rule2_redundant_evidence: Vec<String>,
    pub rule3_pruned_interventions: Vec<String>,
    /// Prune mode removed every intervention, so simulation is skipped.
    pub short_circuit: bool,
}

/// Query surface the screen needs.
#[derive(Debug, Clone, Copy)]
pub struct PreflightInput<'a> {
    pub intervention: &'a InterventionSpec,
    pub evidence: &'a Evidence,
    pub targets: &'a [String],
    pub anchor_fabula: i64,
    pub allow_unobserved_confounders: bool,
    pub mode: PreflightMode,
}

/// Factual value of `NODE.attr` at `t`, if the world holds one.
pub fn observed_value(world: &WorldState, target: &str, t: i64) -> Option<f64> {
    let (node, attr) = split_target(target);
    match (NodeFamily::of(node)?, attr) {
        (NodeFamily::Entity, Some(a)) => reconstruct_entity(world, node, t).ok()?.trait_value(a),
        (NodeFamily::GlobalTrait, _) => Some(world.world_trait(node)?.value_at(t).0),
        (NodeFamily::Location, Some(a)) => world.location(node)?.ambient_state.get(a).map(|v| v.value),
        (NodeFamily::Event, None) => world.event(node).map(|_| 1.0),
        (NodeFamily::Entity, None) => None,
        _ => None,
    }
}

/// Rule 1: assignments whose target already holds the assigned value.
pub fn rule1_vacuous(world: &WorldState, spec: &InterventionSpec, t: i64) -> Vec<String> {
    spec.assignments
        .iter()
        .filter(|(target, v)| match v {
            Some(x) => observed_value(world, target, t) == Some(*x),
            None => false,
        })
        .map(|(target, _)| target.clone())
        .collect()
}

/// Rule 3: intervened nodes with no directed path to any target once every
/// intervened node has its incoming edges cut.
pub fn rule3_excluded(diagram: &CausalDiagram, spec: &InterventionSpec, targets: &[String]) -> Vec<String> {
    let target_nodes: BTreeSet<&str> = targets.iter().filter_map(|t| diagram.raw(t)).collect();
    if target_nodes.is_empty() {
        return Vec::new();
    }
    let vars = spec.variables();
    let cut: Vec<&str> = vars.keys().filter_map(|v| diagram.raw(v)).collect();
    let mutilated = diagram.graph.mutilate(cut.iter().copied());
    vars.keys()
        .filter(|var| {
            let node = split_target(var).0;
            if target_nodes.contains(node) {
                return false;
            }
            match diagram.raw(var) {
                Some(x) => !target_nodes.iter().any(|y| mutilated.has_path(x, y)),
                None => true,
            }
        })
        .cloned()
        .collect()
}

/// Rule 2: evidence whose factual copy is d-separated in the AMWN from every
/// target copy of the intervened world, given the remaining evidence.
pub fn rule2_redundant(
    diagram: &CausalDiagram,
    spec: &InterventionSpec,
    evidence: &Evidence,
    targets: &[String],
) -> Vec<String> {
    if targets.is_empty() || evidence.is_empty() {
        return Vec::new();
    }
    let world = WorldSpec {
        interventions: spec
            .variables()
            .into_iter()
            .filter(|(v, _)| diagram.resolve(v).is_some())
            .collect(),
        evidence: evidence.keys().cloned().collect(),
    };
    let Ok(amwn) = build_amwn(diagram, &[world]) else {
        return Vec::new();
    };
    let query_world = amwn.worlds.len() - 1;
    let ys: BTreeSet<&str> = targets
        .iter()
        .filter_map(|t| amwn.copy_of(diagram, query_world, t))
        .collect();

    let mut flagged = Vec::new();
    for ev in evidence.keys() {
        let Some(x) = amwn.copy_of(diagram, 0, ev) else {
            flagged.push(ev.clone());
            continue;
        };
        if ys.contains(x) {
            continue;
        }
        let zs: BTreeSet<&str> = evidence
            .keys()
            .filter(|other| *other != ev)
            .filter_map(|o| amwn.copy_of(diagram, 0, o))
            .filter(|z| *z != x && !ys.contains(z))
            .collect();
        let y: Vec<&str> = ys.iter().copied().collect();
        let z: Vec<&str> = zs.into_iter().collect();
        if amwn.graph.is_d_separated(&y, &[x], &z).unwrap_or(false) {
            flagged.push(ev.clone());
        }
    }
    flagged
}

/// Runs the three rules. In prune mode the returned spec and evidence have
/// flagged items removed; otherwise they are returned unchanged.
pub fn preflight(world: &WorldState, input: PreflightInput<'_>) -> (PreflightReport, InterventionSpec, Evidence) {
    let mut report = PreflightReport {
        mode: input.mode,
        ..Default::default()
    };
    if input.mode == PreflightMode::Off {
        return (report, input.intervention.clone(), input.evidence.clone());
    }
    let diagram = build_causal_diagram(world, input.allow_unobserved_confounders);
    report.rule1_vacuous = rule1_vacuous(world, input.intervention, input.anchor_fabula);
    report.rule3_pruned_interventions = rule3_excluded(&diagram, input.intervention, input.targets);
    report.rule2_redundant_evidence = rule2_redundant(&diagram, input.intervention, input.evidence, input.targets);

    let mut spec = input.intervention.clone();
    let mut evidence = input.evidence.clone();
    if input.mode == PreflightMode::Prune {
        let drop: BTreeSet<&String> = report
            .rule1_vacuous
            .iter()
            .chain(&report.rule3_pruned_interventions)
            .collect();
        spec.assignments.retain(|k, _| !drop.contains(k));
        spec.sever_channels.retain(|k| !drop.contains(k));
        spec.invalidate_events.retain(|k| !drop.contains(k));
        for e in &report.rule2_redundant_evidence {
            evidence.remove(e);
        }
        report.short_circuit = !input.intervention.is_empty() && spec.is_empty();
    }
    (report, spec, evidence)
}
