//! JSON HTTP service over one project directory.

use std::collections::HashMap;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::Router;
use serde::Serialize;

use crate::api::{self, ApiError, ErrorKind};
use fabula_core::directive::AssemblySettings;
use fabula_core::narrative::Scorer;
use fabula_core::version::VersionStore;

pub struct AppState {
    pub project_id: String,
    pub store: RwLock<VersionStore>,
    pub settings: AssemblySettings,
}

pub type Shared = Arc<AppState>;

fn json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match self.kind {
            ErrorKind::Malformed | ErrorKind::Invalid => StatusCode::BAD_REQUEST,
            ErrorKind::NotFound => StatusCode::NOT_FOUND,
            ErrorKind::Conflict => StatusCode::CONFLICT,
            ErrorKind::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        };
        json(status, api::render(&serde_json::json!({ "error": self.message })))
    }
}

fn ok<T: Serialize>(value: &T) -> Response {
    json(StatusCode::OK, api::render(value))
}

fn body_text(body: &Bytes) -> Result<&str, ApiError> {
    std::str::from_utf8(body).map_err(|_| ApiError::malformed("body is not UTF-8"))
}

fn read(state: &AppState) -> std::sync::RwLockReadGuard<'_, VersionStore> {
    state.store.read().unwrap_or_else(|e| e.into_inner())
}

fn write(state: &AppState) -> std::sync::RwLockWriteGuard<'_, VersionStore> {
    state.store.write().unwrap_or_else(|e| e.into_inner())
}

async fn project_versions(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    if id != s.project_id {
        return Err(ApiError::not_found(format!("unknown project `{id}`")));
    }
    Ok(ok(&read(&s).rows()))
}

async fn list_versions(State(s): State<Shared>) -> Response {
    ok(&read(&s).rows())
}

async fn create_version(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: api::CreateVersionRequest = api::parse(body_text(&body)?, "version request")?;
    let row = write(&s).create_version(
        req.parent.as_deref(),
        &req.world,
        req.source,
        req.branch_policy,
        req.counterfactual,
    )?;
    Ok(ok(&row))
}

async fn promote(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let row = write(&s).promote_branch(&id)?;
    Ok(ok(&row))
}

async fn reparent(State(s): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let req: api::ReparentRequest = api::parse(body_text(&body)?, "reparent request")?;
    let mut store = write(&s);
    store.reparent(&id, req.parent.as_deref())?;
    Ok(ok(store.row(&id).expect("row exists after reparent")))
}

async fn delete_version(State(s): State<Shared>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let mut store = write(&s);
    store.delete_version(&id)?;
    Ok(ok(&api::DeleteResponse {
        deleted: id,
        active: store.active().map(|r| r.id.clone()),
    }))
}

async fn diff(State(s): State<Shared>, Path((a, b)): Path<(String, String)>) -> Result<Response, ApiError> {
    Ok(ok(&read(&s).diff_versions(&a, &b)?))
}

async fn world(State(s): State<Shared>, Path(vid): Path<String>) -> Result<Response, ApiError> {
    let store = read(&s);
    let (_, w) = api::resolve(&store, Some(&vid))?;
    Ok(ok(w))
}

async fn query(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: api::QueryRequest = api::parse(body_text(&body)?, "query request")?;
    let resp = api::query(&mut write(&s), &req, &s.settings)?;
    Ok(ok(&resp))
}

async fn scores(State(s): State<Shared>, Query(params): Query<HashMap<String, String>>) -> Result<Response, ApiError> {
    let scorers = match params.get("scorer") {
        Some(list) => api::split_ids(list)
            .iter()
            .map(|x| x.parse::<Scorer>().map_err(|e| ApiError::malformed(e.to_string())))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let anchors = match params.get("anchors") {
        Some(n) => Some(
            n.parse::<usize>()
                .map_err(|_| ApiError::malformed(format!("anchors `{n}` is not a count")))?,
        ),
        None => None,
    };
    let focals = params.get("focals").map(|f| api::split_ids(f)).unwrap_or_default();
    let store = read(&s);
    let (_, w) = api::resolve(&store, params.get("version").map(String::as_str))?;
    Ok(ok(&api::scores(w, &scorers, anchors, &focals, &s.settings)?))
}

async fn evaluate(State(s): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: api::EvaluateRequest = api::parse(body_text(&body)?, "evaluation request")?;
    let store = read(&s);
    let (_, w) = api::resolve(&store, req.version_id.as_deref())?;
    Ok(ok(&api::evaluate(w, &req, &s.settings)?))
}

async fn brief_check(body: Bytes) -> Result<Response, ApiError> {
    let req: api::BriefCheckRequest = api::parse(body_text(&body)?, "brief check request")?;
    Ok(ok(&api::brief_check(&req)))
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/projects/{id}/versions", get(project_versions))
        .route("/versions", get(list_versions).post(create_version))
        .route("/versions/{id}", delete(delete_version))
        .route("/versions/{id}/promote", post(promote))
        .route("/versions/{id}/reparent", post(reparent))
        .route("/versions/{id}/delete", post(delete_version))
        .route("/versions/{a}/diff/{b}", get(diff))
        .route("/worlds/{vid}", get(world))
        .route("/query", post(query))
        .route("/scores", get(scores))
        .route("/candidates/evaluate", post(evaluate))
        .route("/brief/check", post(brief_check))
        .with_state(state)
}

pub async fn serve(state: Shared, host: &str, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind((host, port)).await?;
    axum::serve(listener, router(state)).await
}
