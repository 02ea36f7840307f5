//! Checks a proposed graph delta against a creative brief.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::{CreativeBrief, TraitEnvelope};
use crate::version::{BeliefChangeKind, WorldDiff};
use crate::world::NodeFamily;

/// A state change nothing in the brief licenses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MiracleStep {
    /// The offending change, e.g. `EVT_X` or `ENT_A.guilt`.
    pub delta: String,
    /// What would have licensed it.
    pub missing_license: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvelopeViolation {
    pub node_id: String,
    pub key: String,
    pub new: Option<f64>,
    pub envelope: TraitEnvelope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GuardViolation {
    pub entity_id: String,
    pub about_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub via_event_id: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MustNotViolation {
    pub event_id: String,
    /// True when the delta adds the event; false when it leaves a source
    /// event in place.
    pub added: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConformanceReport {
    pub miracle_steps: Vec<MiracleStep>,
    pub envelope_violations: Vec<EnvelopeViolation>,
    pub guard_violations: Vec<GuardViolation>,
    pub must_not_violations: Vec<MustNotViolation>,
    pub pass: bool,
}

pub fn check_conformance(brief: &CreativeBrief, delta: &WorldDiff) -> ConformanceReport {
    let mut miracle_steps = Vec::new();
    let mut envelope_violations = Vec::new();
    let mut guard_violations = Vec::new();
    let mut must_not_violations = Vec::new();

    for tc in &delta.trait_changes {
        match brief.envelope(&tc.node_id, &tc.key) {
            None => miracle_steps.push(MiracleStep {
                delta: format!("{}.{}", tc.node_id, tc.key),
                missing_license: format!("no envelope for {}.{}", tc.node_id, tc.key),
            }),
            Some(env) if !tc.new.is_some_and(|v| env.contains(v)) => envelope_violations.push(EnvelopeViolation {
                node_id: tc.node_id.clone(),
                key: tc.key.clone(),
                new: tc.new,
                envelope: env.clone(),
            }),
            Some(_) => {}
        }
    }

    let licensed_keys: BTreeSet<String> = brief.licensed_edges.iter().map(|e| e.key()).collect();
    let licensed_targets: BTreeSet<&str> = brief.licensed_edges.iter().map(|e| e.target_id.as_str()).collect();
    let must: BTreeSet<&str> = brief.must_events.iter().map(String::as_str).collect();
    let added_events: BTreeSet<&str> = delta.added(NodeFamily::Event).iter().map(String::as_str).collect();
    let removed_events: BTreeSet<&str> = delta.removed(NodeFamily::Event).iter().map(String::as_str).collect();
    let source: BTreeSet<&str> = brief.source_event_ids.iter().map(String::as_str).collect();

    for ev in &added_events {
        if !must.contains(ev) && !licensed_targets.contains(ev) {
            miracle_steps.push(MiracleStep {
                delta: ev.to_string(),
                missing_license: format!("no licensed causal edge into {ev}"),
            });
        }
    }
    if let Some(causal) = delta.edges.get("causal") {
        for key in causal.added.iter().filter(|k| !licensed_keys.contains(*k)) {
            miracle_steps.push(MiracleStep {
                delta: key.clone(),
                missing_license: format!("causal edge {key} is not licensed"),
            });
        }
    }
    for ev in &brief.must_not_events {
        if added_events.contains(ev.as_str()) {
            must_not_violations.push(MustNotViolation {
                event_id: ev.clone(),
                added: true,
            });
        } else if source.contains(ev.as_str()) && !removed_events.contains(ev.as_str()) {
            must_not_violations.push(MustNotViolation {
                event_id: ev.clone(),
                added: false,
            });
        }
    }

    for bc in &delta.belief_changes {
        if bc.change == BeliefChangeKind::Removed {
            continue;
        }
        if brief
            .guards
            .iter()
            .any(|g| g.entity_id == bc.entity_id && g.about_id == bc.target_id)
        {
            guard_violations.push(GuardViolation {
                entity_id: bc.entity_id.clone(),
                about_id: bc.target_id.clone(),
                via_event_id: bc.acquired_via_event_id.clone(),
            });
        }
        if bc.change != BeliefChangeKind::Added {
            continue;
        }
        if let Some(via) = bc.acquired_via_event_id.as_deref() {
            let present = (source.contains(via) && !removed_events.contains(via))
                || must.contains(via)
                || licensed_targets.contains(via);
            if !present {
                miracle_steps.push(MiracleStep {
                    delta: format!("{} believes {}", bc.entity_id, bc.target_id),
                    missing_license: format!("{via} is neither a source event nor licensed"),
                });
            }
        }
    }

    let pass = miracle_steps.is_empty()
        && envelope_violations.is_empty()
        && guard_violations.is_empty()
        && must_not_violations.is_empty();
    ConformanceReport {
        miracle_steps,
        envelope_violations,
        guard_violations,
        must_not_violations,
        pass,
    }
}
