//! Rung dispatch: observation, intervention and counterfactual queries.

use std::collections::{BTreeSet, VecDeque};

use serde::{Deserialize, Serialize};

use super::{abduce, apply_do, propagate, CausalError, CausalPhysicsResult, CausalSettings, PropagationMode};
use crate::amwn::{preflight, PreflightInput};
use crate::ego::{create_sandbox, slice_ego_graph, QueryType};
use crate::intervention::{split_target, Evidence, InterventionSpec};
use crate::world::WorldState;

/// A typed causal query.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalQuery {
    pub query_type: QueryType,
    #[serde(default)]
    pub focal_ids: Vec<String>,
    /// Nodes whose response the caller cares about; used by the pre-flight
    /// screen and always kept in the slice.
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchor_fabula: Option<i64>,
    #[serde(default)]
    pub intervention: InterventionSpec,
    #[serde(default)]
    pub evidence: Evidence,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
}

impl CausalQuery {
    pub fn new(query_type: QueryType) -> Self {
        Self {
            query_type,
            focal_ids: Vec::new(),
            targets: Vec::new(),
            anchor_fabula: None,
            intervention: InterventionSpec::default(),
            evidence: Evidence::new(),
            seed: None,
        }
    }
}

/// Events an intervention touches directly.
fn intervened_events(world: &WorldState, spec: &InterventionSpec) -> Vec<i64> {
    let mut ids: BTreeSet<&str> = spec.nodes().iter().filter_map(|n| world.event(n)).map(|e| e.id.as_str()).collect();
    for ev in &world.events {
        if ev.via_channel_id.as_ref().is_some_and(|c| spec.sever_channels.contains(c)) {
            ids.insert(&ev.id);
        }
    }
    ids.into_iter().filter_map(|id| world.event(id)).map(|e| e.fabula_time).collect()
}

/// Fabula anchor for a query. Observation and intervention default to the
/// terminal time. A counterfactual defaults to just before the earliest
/// intervened event, or just before the first event when the intervention
/// touches only standing state, so abduction has a historical prior to pull.
pub fn resolve_anchor(world: &WorldState, query: &CausalQuery) -> i64 {
    if let Some(t) = query.anchor_fabula {
        return t;
    }
    match query.query_type {
        QueryType::Observation | QueryType::Intervention => world.max_fabula(),
        QueryType::Counterfactual => {
            let touched = intervened_events(world, &query.intervention);
            match touched.into_iter().min() {
                Some(t) => t - 1,
                None => world.events.iter().map(|e| e.fabula_time).min().map_or(world.max_fabula(), |t| t - 1),
            }
        }
    }
}

/// Every node reachable from `seeds` along causal edges, seeds excluded
/// unless they lie on a cycle.
pub fn forward_cone(world: &WorldState, seeds: &[String]) -> BTreeSet<String> {
    let mut seen = BTreeSet::new();
    let mut queue: VecDeque<&str> = seeds.iter().map(String::as_str).collect();
    while let Some(n) = queue.pop_front() {
        for e in world.causal_topology.iter().filter(|e| e.source_id == n) {
            if seen.insert(e.target_id.clone()) {
                queue.push_back(&e.target_id);
            }
        }
    }
    seen
}

fn check_node(world: &WorldState, key: &str) -> Result<(), CausalError> {
    let node = split_target(key).0;
    if world.contains_node(node) {
        Ok(())
    } else {
        Err(CausalError::UnknownTarget(key.to_string()))
    }
}

/// Runs a query end to end. Pure in `(world, query, settings)`; the seed
/// defaults to 0.
pub fn execute(world: &WorldState, query: &CausalQuery, settings: &CausalSettings) -> Result<CausalPhysicsResult, CausalError> {
    for id in query.focal_ids.iter().chain(&query.targets) {
        check_node(world, id)?;
    }
    for id in query.intervention.nodes().iter().chain(query.evidence.keys()) {
        check_node(world, id)?;
    }
    if query.query_type == QueryType::Observation && !query.intervention.is_empty() {
        return Err(CausalError::Malformed("an observation carries no intervention".into()));
    }
    if settings.mode == PropagationMode::NoisyOr && settings.distribution && query.seed.is_none() {
        return Err(CausalError::MissingSeed);
    }
    let anchor = resolve_anchor(world, query);
    let mut result = CausalPhysicsResult::empty(query.query_type, anchor);

    let (spec, evidence) = if query.query_type == QueryType::Observation {
        (query.intervention.clone(), query.evidence.clone())
    } else {
        let (report, spec, evidence) = preflight(
            world,
            PreflightInput {
                intervention: &query.intervention,
                evidence: &query.evidence,
                targets: &query.targets,
                anchor_fabula: anchor,
                allow_unobserved_confounders: settings.allow_unobserved_confounders,
                mode: settings.preflight,
            },
        );
        result.rule1_vacuous_interventions = report.rule1_vacuous;
        result.rule2_redundant_evidence = report.rule2_redundant_evidence;
        result.rule3_pruned_interventions = report.rule3_pruned_interventions;
        if report.short_circuit {
            result.short_circuited = true;
            return Ok(result);
        }
        (spec, evidence)
    };

    let touched = spec.nodes();
    let mut focals: BTreeSet<String> = query.focal_ids.iter().cloned().collect();
    if focals.is_empty() {
        focals.extend(touched.iter().cloned());
        focals.extend(evidence.keys().map(|k| split_target(k).0.to_string()));
    }
    if focals.is_empty() {
        return Err(CausalError::Malformed("no focal node".into()));
    }
    let mut targets: BTreeSet<String> = query.targets.iter().map(|t| split_target(t).0.to_string()).collect();
    targets.extend(touched.iter().cloned());
    targets.extend(evidence.keys().map(|k| split_target(k).0.to_string()));
    targets.extend(forward_cone(world, &touched));

    let focals: Vec<String> = focals.into_iter().collect();
    let targets: Vec<String> = targets.into_iter().collect();
    let payload = slice_ego_graph(world, &focals, anchor, settings.hop_limit, &targets)?;
    let mut sandbox = create_sandbox(world, &payload, query.query_type);

    if query.query_type == QueryType::Counterfactual {
        result.hidden_deltas = abduce(&mut sandbox, world, &evidence, settings)?;
    }
    let surgery = apply_do(&mut sandbox, &spec)?;
    let run = propagate(&mut sandbox, world, &surgery, settings, query.seed.unwrap_or(0));

    result.mutations = run.mutations;
    result.blocked = run.blocked;
    result.noisy_or_probabilities = run.noisy_or_probabilities;
    result.deactivated_event_ids = run.deactivated_event_ids;
    result.pruned_beliefs_count = surgery.pruned_beliefs_count + run.cascade_pruned_beliefs;
    result.pruned_utterance_event_ids = surgery.pruned_utterance_event_ids;
    result.disabled_channel_ids = surgery.disabled_channels.into_iter().collect();
    result.intervened_nodes = surgery.intervened_nodes;
    result.severed_edges = surgery.severed_edges;
    result.severed_edges.sort();
    Ok(result)
}
