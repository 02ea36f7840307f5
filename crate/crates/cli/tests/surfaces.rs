//! CLI subcommands, HTTP endpoints, and byte-identity between the two.

use std::path::PathBuf;
use std::process::Command;
use std::sync::{Arc, RwLock};

use axum::body::Body;
use axum::http::{Request, StatusCode};
use http_body_util::BodyExt;
use tower::ServiceExt;

use fabula_cli::cli_main;
use fabula_cli::server::{router, AppState};
use fabula_core::directive::AssemblySettings;
use fabula_core::version::VersionStore;

fn fixture(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures").join(name)
}

fn fixtures_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../fixtures")
}

fn run(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let mut argv = vec!["fabula"];
    argv.extend_from_slice(args);
    let code = cli_main(argv, &mut out, &mut err);
    (code, String::from_utf8(out).unwrap(), String::from_utf8(err).unwrap())
}

const CF_QUERY: &str = r#"{"kind":"counterfactual","focal_ids":["ENT_MACBETH"],
  "intervention":{"assignments":{"EVT_DUNCAN_MURDER":null}}}"#;

fn write_tmp(dir: &tempfile::TempDir, name: &str, text: &str) -> String {
    let p = dir.path().join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn validate_fixture_exits_zero_with_no_errors() {
    let (code, out, _) = run(&["validate", fixture("macbeth.json").to_str().unwrap()]);
    assert_eq!(code, 0);
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["errors"], serde_json::json!([]));
}

#[test]
fn validation_errors_exit_one_and_malformed_input_exits_two() {
    let tmp = tempfile::tempdir().unwrap();
    let bad = write_tmp(
        &tmp,
        "bad.json",
        r#"{"events":[{"id":"EVT_A","event_type":"action","fabula_time":1,"syuzhet_index":0,"actor_ids":["ENT_GHOST"]}]}"#,
    );
    let (code, out, _) = run(&["validate", &bad]);
    assert_eq!(code, 1, "{out}");
    let garbage = write_tmp(&tmp, "garbage.json", "{ not json");
    assert_eq!(run(&["validate", &garbage]).0, 2);
    assert_eq!(run(&["validate", "/nonexistent/world.json"]).0, 2);
    assert_eq!(run(&["score"]).0, 2);
    assert_eq!(run(&["score", fixture("macbeth.json").to_str().unwrap(), "--scorer", "boredom"]).0, 2);
}

#[test]
fn audit_prints_one_row_per_scorer() {
    let (code, out, _) = run(&["audit-affective", fixtures_dir().to_str().unwrap(), "--anchors", "7"]);
    assert_eq!(code, 0);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines.len(), 11);
    assert!(lines[0].contains("median"));
    for (line, name) in lines[1..].iter().zip(["mystery", "irony", "suspense", "surprise", "grief"]) {
        assert!(line.starts_with(name), "{line}");
    }
    let (_, json, _) = run(&["audit-affective", fixtures_dir().to_str().unwrap(), "--json"]);
    let rows: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(rows.as_array().unwrap().len(), 10);
}

#[test]
fn query_is_deterministic_and_records_a_shadow_row() {
    let tmp = tempfile::tempdir().unwrap();
    let q = write_tmp(&tmp, "q.json", CF_QUERY);
    let world = fixture("macbeth.json");
    let outs: Vec<String> = (0..2)
        .map(|i| {
            let project = tmp.path().join(format!("p{i}"));
            let (code, out, err) = run(&[
                "query",
                world.to_str().unwrap(),
                &q,
                "--seed",
                "11",
                "--project",
                project.to_str().unwrap(),
            ]);
            assert_eq!(code, 0, "{err}");
            out
        })
        .collect();
    assert_eq!(outs[0], outs[1]);
    let (_, export, _) = run(&["export", "--project", tmp.path().join("p0").to_str().unwrap()]);
    let rows: Vec<serde_json::Value> = export.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(rows[1]["world_id"], "shadow");
    assert_eq!(rows[1]["ancestor_id"], rows[0]["id"]);
}

#[test]
fn vacuous_do_is_flagged_in_cli_output() {
    let tmp = tempfile::tempdir().unwrap();
    let q = write_tmp(
        &tmp,
        "q.json",
        r#"{"kind":"intervention","focal_ids":["ENT_MACBETH"],
            "intervention":{"assignments":{"ENT_MACBETH.courage":0.75}}}"#,
    );
    let project = tmp.path().join("p");
    let (code, out, err) = run(&[
        "query",
        fixture("macbeth.json").to_str().unwrap(),
        &q,
        "--project",
        project.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{err}");
    let v: serde_json::Value = serde_json::from_str(&out).unwrap();
    assert_eq!(v["result"]["rule1_vacuous_interventions"], serde_json::json!(["ENT_MACBETH.courage"]));
    assert_eq!(v["result"]["short_circuited"], false);
}

#[test]
fn binary_reports_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_fabula");
    let ok = Command::new(bin).args(["validate", fixture("gone_girl.json").to_str().unwrap()]).output().unwrap();
    assert_eq!(ok.status.code(), Some(0));
    let bad = Command::new(bin).args(["frobnicate"]).output().unwrap();
    assert_eq!(bad.status.code(), Some(2));
}

fn state(store: VersionStore) -> Arc<AppState> {
    Arc::new(AppState {
        project_id: "demo".into(),
        store: RwLock::new(store),
        settings: AssemblySettings::default(),
    })
}

async fn call(app: &axum::Router, method: &str, uri: &str, body: Option<String>) -> (StatusCode, String) {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("content-type", "application/json")
        .body(body.map(Body::from).unwrap_or_else(Body::empty))
        .unwrap();
    let resp = app.clone().oneshot(req).await.unwrap();
    let status = resp.status();
    let bytes = resp.into_body().collect().await.unwrap().to_bytes();
    (status, String::from_utf8(bytes.to_vec()).unwrap())
}

fn create_body(world: &str, parent: Option<&str>) -> String {
    let w: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(fixture(world)).unwrap()).unwrap();
    serde_json::json!({ "parent": parent, "world": w }).to_string()
}

#[tokio::test]
async fn empty_project_lists_no_versions_and_unknown_ids_are_404() {
    let app = router(state(VersionStore::in_memory()));
    let (s, body) = call(&app, "GET", "/projects/demo/versions", None).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(serde_json::from_str::<serde_json::Value>(&body).unwrap(), serde_json::json!([]));
    assert_eq!(call(&app, "GET", "/projects/other/versions", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/worlds/v0042", None).await.0, StatusCode::NOT_FOUND);
    assert_eq!(call(&app, "GET", "/scores", None).await.0, StatusCode::NOT_FOUND);
}

#[tokio::test]
async fn malformed_bodies_are_400_and_dag_violations_409() {
    let app = router(state(VersionStore::in_memory()));
    assert_eq!(call(&app, "POST", "/query", Some("{".into())).await.0, StatusCode::BAD_REQUEST);
    assert_eq!(call(&app, "POST", "/brief/check", Some("[]".into())).await.0, StatusCode::BAD_REQUEST);
    let (s, body) = call(&app, "POST", "/versions", Some(create_body("macbeth.json", None))).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let root: serde_json::Value = serde_json::from_str(&body).unwrap();
    let id = root["id"].as_str().unwrap();
    // Promoting a factual row violates the promote precondition.
    let (s, _) = call(&app, "POST", &format!("/versions/{id}/promote"), None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    // A second root is also a tree violation.
    let (s, _) = call(&app, "POST", "/versions", Some(create_body("gone_girl.json", None))).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, "GET", "/scores?version=v0001&anchors=zero", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
    let (s, _) = call(&app, "GET", "/scores?scorer=boredom", None).await;
    assert_eq!(s, StatusCode::BAD_REQUEST);
}

#[tokio::test]
async fn counterfactual_query_lands_on_shadow_and_promotes() {
    let app = router(state(VersionStore::in_memory()));
    call(&app, "POST", "/versions", Some(create_body("macbeth.json", None))).await;
    let req = format!(r#"{{"query": {CF_QUERY}}}"#);
    let (s, body) = call(&app, "POST", "/query", Some(req)).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let v: serde_json::Value = serde_json::from_str(&body).unwrap();
    let shadow = v["version_id"].as_str().unwrap().to_string();
    let (_, rows) = call(&app, "GET", "/versions", None).await;
    let rows: serde_json::Value = serde_json::from_str(&rows).unwrap();
    assert_eq!(rows[1]["world_id"], "shadow");

    let (s, body) = call(&app, "GET", &format!("/worlds/{shadow}"), None).await;
    assert_eq!(s, StatusCode::OK);
    assert!(!body.contains("\"EVT_DUNCAN_MURDER\""));

    let (s, body) = call(&app, "GET", &format!("/versions/v0001/diff/{shadow}"), None).await;
    assert_eq!(s, StatusCode::OK);
    let d: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert!(d["nodes"]["Event"]["removed"].as_array().unwrap().iter().any(|x| x == "EVT_DUNCAN_MURDER"));

    let (s, body) = call(&app, "POST", &format!("/versions/{shadow}/promote"), None).await;
    assert_eq!(s, StatusCode::OK);
    let promoted: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(promoted["world_id"], "factual");
    assert_eq!(promoted["ancestor_id"], "v0001");

    let (s, _) = call(&app, "POST", &format!("/versions/{shadow}/reparent"), Some(r#"{"parent": null}"#.into())).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, _) = call(&app, "DELETE", "/versions/v0001", None).await;
    assert_eq!(s, StatusCode::CONFLICT);
    let (s, body) = call(&app, "DELETE", &format!("/versions/{shadow}"), None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
}

#[tokio::test]
async fn scores_evaluate_and_brief_check() {
    let app = router(state(VersionStore::in_memory()));
    call(&app, "POST", "/versions", Some(create_body("romeo_and_juliet.json", None))).await;
    let (s, body) = call(&app, "GET", "/scores?scorer=mystery,irony&anchors=3&focals=ENT_ROMEO", None).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let t: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(t.as_array().unwrap().len(), 2);
    assert_eq!(t[0]["points"].as_array().unwrap().len(), 3);

    let eval = r#"{"directive": {"metrics": [{"metric": "irony", "weight": 1.0}], "focal_ids": ["ENT_ROMEO"],
        "guards": [{"entity_id": "ENT_ROMEO", "about_id": "EVT_JULIET_TAKES_POTION"}]},
      "candidates": [{"id": "CAND_LETTER_INTERCEPTED", "intervention": {"sever_channels": ["CHN_FRIAR_LETTER"]}}]}"#;
    let (s, body) = call(&app, "POST", "/candidates/evaluate", Some(eval.into())).await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let reports: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(reports[0]["verdict"], "survived");

    let brief = serde_json::json!({
        "candidate_id": "C", "source_world_hash": "", "syuzhet_window": [0, 13],
        "must_events": [], "must_not_events": [], "envelopes": [], "licensed_edges": [],
        "hidden_predecessors": [], "guards": [], "threat_table": [], "hope_table": [],
        "hidden_channels": [], "kl_by_trait": [], "shift_constraints": [], "source_event_ids": []
    });
    let delta = serde_json::json!({"nodes": {"Event": {"added": ["EVT_X"], "removed": [], "changed": []}}});
    let (s, body) = call(
        &app,
        "POST",
        "/brief/check",
        Some(serde_json::json!({"brief": brief, "delta": delta}).to_string()),
    )
    .await;
    assert_eq!(s, StatusCode::OK, "{body}");
    let r: serde_json::Value = serde_json::from_str(&body).unwrap();
    assert_eq!(r["pass"], false);
    assert_eq!(r["miracle_steps"][0]["delta"], "EVT_X");
}

#[tokio::test]
async fn cli_and_http_bodies_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let q = write_tmp(&tmp, "q.json", CF_QUERY);
    let project = tmp.path().join("p");
    let world = fixture("macbeth.json");
    let (code, cli_out, err) = run(&["query", world.to_str().unwrap(), &q, "--project", project.to_str().unwrap()]);
    assert_eq!(code, 0, "{err}");

    let app = router(state(VersionStore::in_memory()));
    call(&app, "POST", "/versions", Some(create_body("macbeth.json", None))).await;
    let (s, http_out) = call(&app, "POST", "/query", Some(format!(r#"{{"query": {CF_QUERY}}}"#))).await;
    assert_eq!(s, StatusCode::OK);
    assert_eq!(cli_out, http_out);

    let (_, cli_scores, _) = run(&[
        "score",
        world.to_str().unwrap(),
        "--scorer",
        "suspense",
        "--anchors",
        "5",
        "--focals",
        "ENT_MACBETH",
        "ENT_MACDUFF",
    ]);
    let (_, http_scores) = call(
        &app,
        "GET",
        "/scores?version=v0001&scorer=suspense&anchors=5&focals=ENT_MACBETH,ENT_MACDUFF",
        None,
    )
    .await;
    assert_eq!(cli_scores, http_scores);
}
