//! Typed queries over a world: the single entry point the CLI and the HTTP
//! service share, so both produce the same JSON for the same input.

use serde::{Deserialize, Serialize};

use crate::causal::{execute, materialize, CausalError, CausalPhysicsResult, CausalQuery, CausalSettings};
use crate::directive::{
    assemble_brief, candidate_world, evaluate_candidates, AssemblySettings, CandidateEvent, CandidateScoreReport,
    CreativeBrief, Directive, Verdict,
};
use crate::ego::QueryType;
use crate::intervention::{Evidence, InterventionSpec};
use crate::narrative::{even_anchors, sample_trajectory, ScoreOptions, ScoreReport, Scorer, ScorerSettings};
use crate::version::{apply_patch, VersionSource, WorldPatch};
use crate::world::{validate_world, WorldState};

/// Anchors per trajectory when a query does not say.
pub const DEFAULT_ANCHORS: usize = 7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryKind {
    Observation,
    Intervention,
    Counterfactual,
    Directive,
    Evaluation,
    ManualEdit,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TypedQuery {
    pub kind: QueryKind,
    #[serde(default)]
    pub focal_ids: Vec<String>,
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
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directive: Option<Directive>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub candidates: Vec<CandidateEvent>,
    /// Scorers for an evaluation; all ten when empty.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub scorers: Vec<Scorer>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub anchors: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub patch: Option<WorldPatch>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub causal_settings: Option<CausalSettings>,
}

impl TypedQuery {
    pub fn new(kind: QueryKind) -> Self {
        Self {
            kind,
            focal_ids: Vec::new(),
            targets: Vec::new(),
            anchor_fabula: None,
            intervention: InterventionSpec::default(),
            evidence: Evidence::new(),
            seed: None,
            directive: None,
            candidates: Vec::new(),
            scorers: Vec::new(),
            anchors: None,
            patch: None,
            causal_settings: None,
        }
    }

    /// Checks that the fields the kind needs are present.
    pub fn validate(&self) -> Result<(), QueryError> {
        let missing = |what: &str| Err(QueryError::Malformed(format!("{:?} query needs {what}", self.kind)));
        match self.kind {
            QueryKind::Intervention | QueryKind::Counterfactual if self.intervention.is_empty() => {
                missing("an intervention")
            }
            QueryKind::Directive => match &self.directive {
                None => missing("a directive"),
                Some(d) => d.validate().map_err(QueryError::Malformed),
            },
            QueryKind::ManualEdit if self.patch.is_none() => missing("a patch"),
            QueryKind::Evaluation if self.anchors == Some(0) => missing("at least one anchor"),
            _ => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum QueryError {
    #[error("malformed query: {0}")]
    Malformed(String),
    #[error(transparent)]
    Causal(#[from] CausalError),
    #[error("edited world is invalid: {0}")]
    InvalidEdit(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub scorer: Scorer,
    pub points: Vec<ScoreReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DirectiveOutput {
    pub reports: Vec<CandidateScoreReport>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub brief: Option<CreativeBrief>,
}

/// What a query reports, tagged by kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum QueryOutput {
    Causal { result: CausalPhysicsResult },
    Directive(DirectiveOutput),
    Evaluation { trajectories: Vec<Trajectory> },
    ManualEdit { world_hash: String },
}

/// Output plus the world a caller should record as a new version, if any.
#[derive(Debug, Clone, PartialEq)]
pub struct QueryOutcome {
    pub output: QueryOutput,
    pub world: Option<WorldState>,
    /// Whether the new world is hypothetical (counterfactual or directive).
    pub counterfactual: bool,
    pub source: VersionSource,
}

pub fn trajectories(
    world: &WorldState,
    scorers: &[Scorer],
    focals: &[String],
    anchors: usize,
    settings: &ScorerSettings,
    options: ScoreOptions,
) -> Vec<Trajectory> {
    let points = even_anchors(world, anchors);
    let scorers: &[Scorer] = if scorers.is_empty() { &Scorer::ALL } else { scorers };
    scorers
        .iter()
        .map(|&scorer| Trajectory {
            scorer,
            points: sample_trajectory(world, scorer, focals, &points, settings, options),
        })
        .collect()
}

pub fn run_query(world: &WorldState, q: &TypedQuery, settings: &AssemblySettings) -> Result<QueryOutcome, QueryError> {
    q.validate()?;
    let causal = q.causal_settings.clone().unwrap_or_else(|| settings.causal.clone());
    match q.kind {
        QueryKind::Observation | QueryKind::Intervention | QueryKind::Counterfactual => {
            let query_type = match q.kind {
                QueryKind::Observation => QueryType::Observation,
                QueryKind::Intervention => QueryType::Intervention,
                _ => QueryType::Counterfactual,
            };
            let cq = CausalQuery {
                query_type,
                focal_ids: q.focal_ids.clone(),
                targets: q.targets.clone(),
                anchor_fabula: q.anchor_fabula,
                intervention: q.intervention.clone(),
                evidence: q.evidence.clone(),
                seed: q.seed,
            };
            let result = execute(world, &cq, &causal)?;
            let new_world = materialize(world, &result);
            Ok(QueryOutcome {
                output: QueryOutput::Causal { result },
                world: Some(new_world),
                counterfactual: q.kind == QueryKind::Counterfactual,
                source: VersionSource::PipelineRun,
            })
        }
        QueryKind::Directive => {
            let directive = q.directive.as_ref().expect("validated");
            let settings = AssemblySettings {
                causal,
                ..settings.clone()
            };
            let reports = evaluate_candidates(world, directive, &q.candidates, &settings);
            let winner = reports.first().filter(|r| r.verdict == Verdict::Survived);
            let brief = match winner {
                Some(w) => Some(
                    assemble_brief(world, directive, w, &settings).map_err(|e| QueryError::Malformed(e.to_string()))?,
                ),
                None => None,
            };
            let new_world = winner.map(|w| {
                materialize(
                    &candidate_world(world, &w.candidate),
                    w.result.as_ref().expect("survivors carry a result"),
                )
            });
            Ok(QueryOutcome {
                output: QueryOutput::Directive(DirectiveOutput { reports, brief }),
                world: new_world,
                counterfactual: true,
                source: VersionSource::PipelineRun,
            })
        }
        QueryKind::Evaluation => Ok(QueryOutcome {
            output: QueryOutput::Evaluation {
                trajectories: trajectories(
                    world,
                    &q.scorers,
                    &q.focal_ids,
                    q.anchors.unwrap_or(DEFAULT_ANCHORS),
                    &settings.scorer,
                    settings.options,
                ),
            },
            world: None,
            counterfactual: false,
            source: VersionSource::PipelineRun,
        }),
        QueryKind::ManualEdit => {
            let edited = apply_patch(world, q.patch.as_ref().expect("validated"));
            let report = validate_world(&edited);
            if let Some(f) = report.errors.first() {
                return Err(QueryError::InvalidEdit(format!("{}: {}", f.subject_id, f.message)));
            }
            Ok(QueryOutcome {
                output: QueryOutput::ManualEdit {
                    world_hash: edited.content_hash(),
                },
                world: Some(edited),
                counterfactual: false,
                source: VersionSource::ManualEdit,
            })
        }
    }
}

/// Summary of one scorer across many worlds and anchors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditRow {
    pub scorer: Scorer,
    pub samples: usize,
    pub min: f64,
    pub median: f64,
    pub mean: f64,
    pub max: f64,
}

/// Entities that take part in at least one event, the default focal set
/// when a world is scored without one.
pub fn default_focals(world: &WorldState) -> Vec<String> {
    world
        .entities
        .iter()
        .filter(|e| world.events.iter().any(|ev| ev.involves(&e.id)))
        .map(|e| e.id.clone())
        .collect()
}

/// Every scorer over every world at `anchors` evenly spaced syuzhet anchors.
pub fn audit(worlds: &[WorldState], anchors: usize, settings: &ScorerSettings, options: ScoreOptions) -> Vec<AuditRow> {
    let mut per: Vec<Vec<f64>> = vec![Vec::new(); Scorer::ALL.len()];
    for w in worlds {
        let focals = default_focals(w);
        for t in trajectories(w, &Scorer::ALL, &focals, anchors, settings, options) {
            let i = Scorer::ALL.iter().position(|s| *s == t.scorer).expect("known scorer");
            per[i].extend(t.points.iter().map(|p| p.score));
        }
    }
    Scorer::ALL
        .iter()
        .zip(per)
        .map(|(&scorer, mut xs)| {
            xs.sort_by(f64::total_cmp);
            let n = xs.len();
            let (min, max, mean, median) = if n == 0 {
                (0.0, 0.0, 0.0, 0.0)
            } else {
                let median = if n % 2 == 1 {
                    xs[n / 2]
                } else {
                    (xs[n / 2 - 1] + xs[n / 2]) / 2.0
                };
                (xs[0], xs[n - 1], xs.iter().sum::<f64>() / n as f64, median)
            };
            AuditRow {
                scorer,
                samples: n,
                min,
                median,
                mean,
                max,
            }
        })
        .collect()
}
