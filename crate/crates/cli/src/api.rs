//! Operations shared by the CLI and the HTTP service. Each returns a value
//! whose JSON rendering is the response body on both surfaces.

use serde::{Deserialize, Serialize};

use fabula_core::directive::{
    check_conformance, evaluate_candidates, AssemblySettings, CandidateEvent, CandidateScoreReport, ConformanceReport,
    CreativeBrief, Directive,
};
use fabula_core::engine::{run_query, trajectories, QueryError, QueryOutput, Trajectory, TypedQuery, DEFAULT_ANCHORS};
use fabula_core::narrative::Scorer;
use fabula_core::version::{BranchPolicy, VersionError, VersionRow, VersionSource, VersionStore, WorldDiff};
use fabula_core::world::WorldState;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    /// Unparseable or semantically malformed input.
    Malformed,
    /// The world fails validation.
    Invalid,
    NotFound,
    /// The version tree rules forbid the operation.
    Conflict,
    Internal,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub kind: ErrorKind,
    pub message: String,
}

impl ApiError {
    pub fn malformed(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::Malformed,
            message: message.into(),
        }
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self {
            kind: ErrorKind::NotFound,
            message: message.into(),
        }
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<VersionError> for ApiError {
    fn from(e: VersionError) -> Self {
        let kind = match &e {
            VersionError::UnknownVersion(_) => ErrorKind::NotFound,
            VersionError::InvalidWorld(_) => ErrorKind::Invalid,
            VersionError::Io(_) | VersionError::Corrupt(_) => ErrorKind::Internal,
            _ if e.is_conflict() => ErrorKind::Conflict,
            _ => ErrorKind::Internal,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        let kind = match e {
            QueryError::InvalidEdit(_) => ErrorKind::Invalid,
            _ => ErrorKind::Malformed,
        };
        Self {
            kind,
            message: e.to_string(),
        }
    }
}

/// Pretty JSON with a trailing newline: the exact bytes both surfaces emit.
pub fn render<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("response serializes");
    s.push('\n');
    s
}

pub fn parse<T: for<'de> Deserialize<'de>>(text: &str, what: &str) -> Result<T, ApiError> {
    serde_json::from_str(text).map_err(|e| ApiError::malformed(format!("malformed {what}: {e}")))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryResponse {
    /// The row recording the query's world, when it produced one.
    pub version_id: Option<String>,
    #[serde(flatten)]
    pub output: QueryOutput,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QueryRequest {
    #[serde(default)]
    pub version_id: Option<String>,
    pub query: TypedQuery,
    #[serde(default)]
    pub branch_policy: BranchPolicy,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CreateVersionRequest {
    #[serde(default)]
    pub parent: Option<String>,
    pub world: WorldState,
    #[serde(default = "ingestion")]
    pub source: VersionSource,
    #[serde(default)]
    pub branch_policy: BranchPolicy,
    #[serde(default)]
    pub counterfactual: bool,
}

fn ingestion() -> VersionSource {
    VersionSource::Ingestion
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReparentRequest {
    pub parent: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluateRequest {
    #[serde(default)]
    pub version_id: Option<String>,
    pub directive: Directive,
    #[serde(default)]
    pub candidates: Vec<CandidateEvent>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BriefCheckRequest {
    pub brief: CreativeBrief,
    pub delta: WorldDiff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeleteResponse {
    pub deleted: String,
    pub active: Option<String>,
}

/// Resolves an explicit version id, or the active row.
pub fn resolve<'a>(store: &'a VersionStore, id: Option<&str>) -> Result<(&'a VersionRow, &'a WorldState), ApiError> {
    let row = match id {
        Some(id) => store
            .row(id)
            .ok_or_else(|| ApiError::not_found(format!("unknown version `{id}`")))?,
        None => store
            .active()
            .ok_or_else(|| ApiError::not_found("project has no versions"))?,
    };
    Ok((row, store.world(&row.id)?))
}

/// Records `world` as a row: a child of the active row, or the root of an
/// empty project. An identical world already in the store is reused.
pub fn ingest(store: &mut VersionStore, world: &WorldState, source: VersionSource) -> Result<VersionRow, ApiError> {
    let hash = world.content_hash();
    if let Some(row) = store.rows().iter().find(|r| r.world_ref == hash) {
        return Ok(row.clone());
    }
    let parent = store.active().map(|r| r.id.clone());
    Ok(store.create_version(parent.as_deref(), world, source, BranchPolicy::Auto, false)?)
}

/// Runs a typed query against a version and records any resulting world as
/// its child.
pub fn query(
    store: &mut VersionStore,
    req: &QueryRequest,
    settings: &AssemblySettings,
) -> Result<QueryResponse, ApiError> {
    let (row, world) = resolve(store, req.version_id.as_deref())?;
    let parent = row.id.clone();
    let outcome = run_query(world, &req.query, settings)?;
    let version_id = match &outcome.world {
        Some(w) => Some(
            store
                .create_version(Some(&parent), w, outcome.source, req.branch_policy, outcome.counterfactual)?
                .id,
        ),
        None => None,
    };
    Ok(QueryResponse {
        version_id,
        output: outcome.output,
    })
}

pub fn scores(
    world: &WorldState,
    scorers: &[Scorer],
    anchors: Option<usize>,
    focals: &[String],
    settings: &AssemblySettings,
) -> Result<Vec<Trajectory>, ApiError> {
    let n = anchors.unwrap_or(DEFAULT_ANCHORS);
    if n == 0 {
        return Err(ApiError::malformed("anchors must be positive"));
    }
    Ok(trajectories(world, scorers, focals, n, &settings.scorer, settings.options))
}

pub fn evaluate(
    world: &WorldState,
    req: &EvaluateRequest,
    settings: &AssemblySettings,
) -> Result<Vec<CandidateScoreReport>, ApiError> {
    req.directive.validate().map_err(ApiError::malformed)?;
    Ok(evaluate_candidates(world, &req.directive, &req.candidates, settings))
}

pub fn brief_check(req: &BriefCheckRequest) -> ConformanceReport {
    check_conformance(&req.brief, &req.delta)
}

/// Splits a comma- or space-separated id list.
pub fn split_ids(s: &str) -> Vec<String> {
    s.split([',', ' '])
        .filter(|x| !x.is_empty())
        .map(str::to_string)
        .collect()
}
