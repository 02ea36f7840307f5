//! Directive assembly: evaluate candidate interventions in isolated
//! sandboxes, rank them by affective score, package the winner as a
//! creative brief and check proposed changes against that brief.

mod brief;
mod candidates;
mod conformance;

use serde::{Deserialize, Serialize};

use crate::causal::CausalSettings;
use crate::narrative::{ScoreOptions, Scorer, ScorerSettings};

pub use brief::{
    assemble_brief, BriefError, CreativeBrief, HiddenPredecessors, ShiftConstraint, ShiftDirection, TraitEnvelope,
    TraitKl,
};
pub use candidates::{
    candidate_world, enumerate_affordance_candidates, evaluate_candidates, rank, CandidateEvent, CandidateScoreReport,
    Gate, GateReason, Verdict,
};
pub use conformance::{
    check_conformance, ConformanceReport, EnvelopeViolation, GuardViolation, MiracleStep, MustNotViolation,
};

/// A wielder needs at least this much of an affordance's required trait.
pub const AFFORDANCE_TRAIT_THRESHOLD: f64 = 0.5;

/// Envelope half-width per unit of free play, `(1 - inertia) * ENVELOPE_SLACK`.
pub const ENVELOPE_SLACK: f64 = 0.2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricWeight {
    pub metric: Scorer,
    pub weight: f64,
}

/// "`entity_id` must not learn about `about_id`".
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Guard {
    pub entity_id: String,
    pub about_id: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Directive {
    pub metrics: Vec<MetricWeight>,
    /// Aim for this value on every metric; `None` maximizes.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target_value: Option<f64>,
    #[serde(default)]
    pub focal_ids: Vec<String>,
    /// Inclusive syuzhet range of the source world the directive concerns.
    /// Scores are taken at its end; the whole telling when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub syuzhet_window: Option<(i64, i64)>,
    #[serde(default)]
    pub guards: Vec<Guard>,
}

impl Directive {
    pub fn validate(&self) -> Result<(), String> {
        if let Some(m) = self.metrics.iter().find(|m| !(m.weight >= 0.0 && m.weight.is_finite())) {
            return Err(format!("metric {} has a negative or non-finite weight", m.metric));
        }
        if let Some((lo, hi)) = self.syuzhet_window {
            if lo > hi {
                return Err(format!("syuzhet window [{lo}, {hi}] is empty"));
            }
        }
        Ok(())
    }

    /// Combined score: weighted sum, or negative weighted distance to the
    /// target value.
    pub fn combine(&self, scores: &std::collections::BTreeMap<Scorer, f64>) -> f64 {
        self.metrics
            .iter()
            .map(|m| {
                let s = scores.get(&m.metric).copied().unwrap_or(0.0);
                match self.target_value {
                    None => m.weight * s,
                    Some(t) => -m.weight * (s - t).abs(),
                }
            })
            .sum()
    }
}

/// Everything candidate evaluation needs besides the world and directive.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssemblySettings {
    pub causal: CausalSettings,
    pub scorer: ScorerSettings,
    pub options: ScoreOptions,
}
