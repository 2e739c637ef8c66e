//! HTTP/JSON routes.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use prefsynth_core::preferences::{aggregate_to_interval, Elicitation, WeightVector};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};
use tower_http::services::ServeDir;

use crate::error::ServiceError;
use crate::jobs::JobRegistry;
use crate::request::{pareto_document, resolve_source, SynthesisRequest};
use crate::scenario::{map_ids, map_info};

/// JSON schemas of every response body, by name.
pub const SCHEMAS: [(&str, &str); 7] = [
    ("maps", include_str!("../schemas/maps.json")),
    ("elicit", include_str!("../schemas/elicit.json")),
    ("interval", include_str!("../schemas/interval.json")),
    ("job-accepted", include_str!("../schemas/job-accepted.json")),
    ("job", include_str!("../schemas/job.json")),
    ("pareto", include_str!("../schemas/pareto.json")),
    ("error", include_str!("../schemas/error.json")),
];

#[derive(Clone)]
pub struct AppState {
    pub jobs: Arc<JobRegistry>,
}

/// The API router; `static_dir`, when given, serves the web UI bundle.
pub fn router(jobs: Arc<JobRegistry>, static_dir: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/maps", get(maps))
        .route("/api/elicit", post(elicit))
        .route("/api/preferences/aggregate", post(aggregate))
        .route("/api/synthesize", post(submit))
        .route("/api/jobs", get(list_jobs))
        .route("/api/jobs/{id}", get(job))
        .route("/api/pareto", get(pareto))
        .route("/api/schemas/{name}", get(schema))
        .with_state(AppState { jobs });
    match static_dir {
        Some(dir) => api.fallback_service(ServeDir::new(dir)),
        None => api.fallback(|| async { ServiceError::NotFound("no such route".into()) }),
    }
}

fn parse_body<T: DeserializeOwned>(body: &Bytes) -> Result<T, ServiceError> {
    serde_json::from_slice(body).map_err(|e| ServiceError::BadRequest(format!("malformed payload: {e}")))
}

async fn maps() -> Json<Value> {
    let maps: Vec<_> = map_ids().into_iter().filter_map(map_info).collect();
    Json(json!({ "maps": maps }))
}

async fn elicit(body: Bytes) -> Result<Json<Value>, ServiceError> {
    let e: Elicitation = parse_body(&body)?;
    let result = e.weights()?;
    Ok(Json(serde_json::to_value(result).expect("weights serialize")))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AggregateRequest {
    vectors: Vec<Vec<f64>>,
}

async fn aggregate(body: Bytes) -> Result<Json<Value>, ServiceError> {
    let req: AggregateRequest = parse_body(&body)?;
    let ws = req
        .vectors
        .into_iter()
        .map(WeightVector::new)
        .collect::<prefsynth_core::Result<Vec<_>>>()?;
    let iwv = aggregate_to_interval(&ws)?;
    Ok(Json(serde_json::to_value(iwv).expect("interval serializes")))
}

async fn submit(State(st): State<AppState>, body: Bytes) -> Result<impl IntoResponse, ServiceError> {
    let req: SynthesisRequest = parse_body(&body)?;
    let jobs = Arc::clone(&st.jobs);
    // Validation loads the model; keep it off the async workers.
    let record = tokio::task::spawn_blocking(move || jobs.submit(req))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok((StatusCode::ACCEPTED, Json(json!({"id": record.id, "status": record.status}))))
}

async fn list_jobs(State(st): State<AppState>) -> Json<Value> {
    let jobs: Vec<Value> = st
        .jobs
        .list()
        .into_iter()
        .map(|r| json!({"id": r.id, "status": r.status, "createdAt": r.created_at}))
        .collect();
    Json(json!({ "jobs": jobs }))
}

async fn job(State(st): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, ServiceError> {
    let record = st.jobs.get(&id).ok_or_else(|| ServiceError::NotFound(format!("unknown job `{id}`")))?;
    Ok(Json(serde_json::to_value(record).expect("job record serializes")))
}

async fn pareto(Query(q): Query<HashMap<String, String>>) -> Result<Json<Value>, ServiceError> {
    let map = q.get("map").ok_or_else(|| ServiceError::BadRequest("missing `map`".into()))?.clone();
    let w = q.get("w").ok_or_else(|| ServiceError::BadRequest("missing `w`".into()))?;
    let weights = w
        .split(',')
        .map(|x| x.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| ServiceError::BadRequest(format!("malformed `w`: {e}")))?;
    let noise = q
        .get("noise")
        .map(|x| x.parse::<f64>())
        .transpose()
        .map_err(|e| ServiceError::BadRequest(format!("malformed `noise`: {e}")))?;
    let property = q.get("property").cloned();
    let doc = tokio::task::spawn_blocking(move || {
        let scenario = resolve_source(Some(&map), None, None, noise, property.as_deref())?;
        let w = WeightVector::new(weights)?;
        if w.len() != scenario.property.len() {
            return Err(ServiceError::BadRequest(format!(
                "expected {} weights, got {}",
                scenario.property.len(),
                w.len()
            )));
        }
        let mut doc = pareto_document(&scenario, &w)?;
        doc["map"] = json!(map);
        Ok(doc)
    })
    .await
    .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok(Json(doc))
}

async fn schema(Path(name): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    let name = name.trim_end_matches(".json");
    let (_, text) = SCHEMAS
        .iter()
        .find(|(n, _)| *n == name)
        .ok_or_else(|| ServiceError::NotFound(format!("unknown schema `{name}`")))?;
    Ok(([(header::CONTENT_TYPE, "application/schema+json")], *text))
}
