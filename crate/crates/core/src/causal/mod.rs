//! Three-rung causal engine over a sandbox: do-surgery with provenance
//! pruning, precision-weighted abduction and gated propagation.

mod abduction;
mod execute;
mod materialize;
mod mechanism;
mod propagate;
mod surgery;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::amwn::PreflightMode;
use crate::ego::{EgoError, QueryType};

pub use abduction::{abduce, bayes_blend, legacy_blend};
pub use execute::{execute, forward_cone, resolve_anchor, CausalQuery};
pub use materialize::materialize;
pub use mechanism::{admissible, attenuation, mechanism_kind};
pub use propagate::{gate, logistic, propagate, GateOutcome, Propagation};
pub use surgery::{apply_do, Surgery};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CausalError {
    #[error("unknown target `{0}`")]
    UnknownTarget(String),
    #[error("malformed query: {0}")]
    Malformed(String),
    #[error("distribution execution needs a seed")]
    MissingSeed,
    #[error(transparent)]
    Ego(#[from] EgoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PropagationMode {
    #[default]
    Deterministic,
    NoisyOr,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AbductionMode {
    /// `(ι·prior + κ·evidence) / (ι + κ)`.
    #[default]
    Bayes,
    /// `prior + (1 − ι)·(evidence − prior)`, kept for ablation.
    Legacy,
}

/// Engine tunables. Every field has a default, so `{}` is a valid JSON form.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CausalSettings {
    pub mode: PropagationMode,
    pub epsilon: f64,
    pub noisy_or_beta: f64,
    /// Baseline drift ρ; 0 disables the post-pass.
    pub drift_rho: f64,
    /// Evidence precision κ_E.
    pub evidence_precision: f64,
    pub abduction: AbductionMode,
    pub mechanism_attenuation: f64,
    /// Draw noisy-OR firings from a seeded Bernoulli instead of thresholding.
    pub distribution: bool,
    pub preflight: PreflightMode,
    pub allow_unobserved_confounders: bool,
    pub hop_limit: usize,
}

impl Default for CausalSettings {
    fn default() -> Self {
        Self {
            mode: PropagationMode::Deterministic,
            epsilon: 1e-9,
            noisy_or_beta: 10.0,
            drift_rho: 0.0,
            evidence_precision: 1.0,
            abduction: AbductionMode::Bayes,
            mechanism_attenuation: 0.5,
            distribution: false,
            preflight: PreflightMode::Advisory,
            allow_unobserved_confounders: false,
            hop_limit: crate::ego::DEFAULT_HOPS,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BlockReason {
    Inertia,
    Affordance,
    Spatial,
    Cycle,
    NoisyOrAbsorbed,
    BlockedByIntervention,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MutationCause {
    /// Fired through the gate by the listed edges.
    Propagation,
    /// The factual arc of this trait was laid down by an event that no
    /// longer occurs, so the value reverts to what it was before it.
    Retraction(String),
}

/// One state change: attribute `attr` of `node_id` moved from `old` to `new`.
/// `attr` is a trait name, an ambient key, `value` for world traits, or
/// `rel:<counterpart>:<axis>` for a relationship axis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mutation {
    pub node_id: String,
    pub attr: String,
    pub old: f64,
    pub new: f64,
    pub impact: f64,
    pub edges: Vec<String>,
    /// Fabula time the delta lands at, after any propagation delay.
    pub fabula_time: i64,
    pub cause: MutationCause,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Blocked {
    pub edge: String,
    pub target_id: String,
    pub attr: String,
    pub reason: BlockReason,
    pub impact: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HiddenDelta {
    pub node_id: String,
    pub attr: String,
    pub delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CausalPhysicsResult {
    pub query_type: QueryType,
    pub anchor_fabula: i64,
    pub mutations: Vec<Mutation>,
    pub blocked: Vec<Blocked>,
    pub hidden_deltas: Vec<HiddenDelta>,
    pub intervened_nodes: Vec<String>,
    pub rule1_vacuous_interventions: Vec<String>,
    pub rule3_pruned_interventions: Vec<String>,
    pub rule2_redundant_evidence: Vec<String>,
    /// Aggregate fire probability per `NODE.attr` under noisy-OR.
    pub noisy_or_probabilities: BTreeMap<String, f64>,
    pub pruned_beliefs_count: usize,
    pub pruned_utterance_event_ids: Vec<String>,
    pub disabled_channel_ids: Vec<String>,
    /// Causal edges cut by the do-operator.
    pub severed_edges: Vec<String>,
    /// Events that do not occur in this world, directly or by cascade.
    pub deactivated_event_ids: Vec<String>,
    /// Prune-mode pre-flight removed every intervention; nothing was simulated.
    pub short_circuited: bool,
}

impl CausalPhysicsResult {
    pub fn empty(query_type: QueryType, anchor_fabula: i64) -> Self {
        Self {
            query_type,
            anchor_fabula,
            mutations: Vec::new(),
            blocked: Vec::new(),
            hidden_deltas: Vec::new(),
            intervened_nodes: Vec::new(),
            rule1_vacuous_interventions: Vec::new(),
            rule3_pruned_interventions: Vec::new(),
            rule2_redundant_evidence: Vec::new(),
            noisy_or_probabilities: BTreeMap::new(),
            pruned_beliefs_count: 0,
            pruned_utterance_event_ids: Vec::new(),
            disabled_channel_ids: Vec::new(),
            severed_edges: Vec::new(),
            deactivated_event_ids: Vec::new(),
            short_circuited: false,
        }
    }

    /// Mutation entry for `node.attr`, if one fired.
    pub fn mutation(&self, node: &str, attr: &str) -> Option<&Mutation> {
        self.mutations
            .iter()
            .rev()
            .find(|m| m.node_id == node && m.attr == attr)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("result serializes")
    }
}
