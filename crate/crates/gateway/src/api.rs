//! HTTP+JSON API. Handlers decode the request, call one [`Engine`] method and
//! encode the answer; mutations are on disk before the response is sent.
//!
//! [`Engine`]: docbi_core::Engine

use std::path::PathBuf;
use std::sync::{Arc, RwLock, RwLockReadGuard};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, RawQuery, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::{DateTime, Utc};
use docbi_core::mart::{AccessEvent, AccessKind, DataMart, MartSpec};
use docbi_core::query::ResultSet;
use docbi_core::user::{Evaluation, NewActivity, ProblemDefinition, SessionModel};
use docbi_core::warehouse::{EnrichmentSource, SelectionFilter};
use docbi_core::Engine;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{ApiError, GatewayError};
use crate::store::Store;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StoreConfig {
    pub data_dir: PathBuf,
    pub listen_address: String,
    /// Period of the automatic rebuild of every built mart.
    pub refresh_interval: Option<Duration>,
}

impl StoreConfig {
    pub fn validate(&self) -> Result<(), GatewayError> {
        if self.refresh_interval.is_some_and(|d| d.is_zero()) {
            return Err(GatewayError::Invalid("refresh_interval must be positive".into()));
        }
        Ok(())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.code.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

type ApiResult<T> = Result<T, ApiError>;

/// Shared handle on the store. Reads take the lock shared; mutations take it
/// exclusively, so they are applied one at a time.
#[derive(Clone)]
pub struct AppState {
    store: Arc<RwLock<Store>>,
}

impl AppState {
    pub fn new(store: Store) -> Self {
        Self {
            store: Arc::new(RwLock::new(store)),
        }
    }

    fn read(&self) -> RwLockReadGuard<'_, Store> {
        self.store.read().unwrap_or_else(|p| p.into_inner())
    }

    fn view<T>(&self, f: impl FnOnce(&Engine) -> T) -> T {
        f(self.read().engine())
    }

    fn mutate<T>(&self, op: impl FnOnce(&mut Engine) -> Result<T, docbi_core::Error>) -> ApiResult<T> {
        let mut store = self.store.write().unwrap_or_else(|p| p.into_inner());
        store.mutate(op).map_err(ApiError::from)
    }

    /// Rebuilds every mart built so far; returns how many failed.
    pub fn refresh_marts(&self) -> ApiResult<usize> {
        if self.view(|e| e.marts().built_names().next().is_none()) {
            return Ok(0);
        }
        let failures = self.mutate(|e| Ok(e.refresh_all(Utc::now())))?;
        for (name, err) in &failures {
            log::warn!("periodic refresh of {name} failed: {err}");
        }
        Ok(failures.len())
    }
}

fn body<T: DeserializeOwned>(bytes: &Bytes) -> ApiResult<T> {
    serde_json::from_slice(bytes).map_err(|e| ApiError::validation(format!("invalid request body: {e}")))
}

fn query_pairs(raw: Option<String>) -> ApiResult<Vec<(String, String)>> {
    serde_urlencoded::from_str(raw.as_deref().unwrap_or(""))
        .map_err(|e| ApiError::validation(format!("invalid query string: {e}")))
}

fn created<T: Serialize>(value: T) -> Response {
    (StatusCode::CREATED, Json(value)).into_response()
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(health))
        .route("/documents:ingest", post(ingest))
        .route("/schema", get(schema))
        .route("/gaps", get(gaps))
        .route("/enrich", post(enrich))
        .route("/queries", post(run_query))
        .route("/explore", get(explore))
        .route("/sessions", post(start_session).get(list_sessions))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/export", get(export_session))
        .route("/sessions/{id}/subsessions", post(start_subsession))
        .route("/sessions/{id}/activities", post(record_activity))
        .route("/sessions/{id}/activities/{aid}/evaluation", post(submit_evaluation))
        .route("/profiles/{identity}", get(profile))
        .route("/problems", post(define_problem).get(list_problems))
        .route("/problems/{id}", get(get_problem))
        .route("/problems/{id}/translation", get(translate_problem))
        .route("/marts", get(list_marts).post(register_mart))
        .route("/marts/{name}", post(mart_action))
        .route("/marts/{name}/cells", get(mart_cells))
        .route("/marts/{name}/export", get(mart_export))
        .route("/recommendations", post(recommend))
        .route("/access-events", post(record_access))
        .fallback(|| async { ApiError::not_found("no such endpoint") })
        .with_state(state)
}

/// Opens the store, binds the listener and serves until interrupted.
pub async fn serve(config: StoreConfig) -> Result<(), GatewayError> {
    config.validate()?;
    let store = Store::open(&config.data_dir)?;
    tempfile::NamedTempFile::new_in(store.dir()).map_err(|e| {
        GatewayError::Startup(format!("data_dir {} is not writable: {e}", store.dir().display()))
    })?;
    let listener = tokio::net::TcpListener::bind(&config.listen_address)
        .await
        .map_err(|e| GatewayError::Startup(format!("cannot listen on {}: {e}", config.listen_address)))?;
    let state = AppState::new(store);
    if let Some(period) = config.refresh_interval {
        let state = state.clone();
        tokio::spawn(async move {
            let mut ticks = tokio::time::interval(period);
            ticks.tick().await;
            loop {
                ticks.tick().await;
                if let Err(e) = state.refresh_marts() {
                    log::error!("periodic refresh failed: {}", e.message);
                }
            }
        });
    }
    log::info!("listening on {}", config.listen_address);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
        .map_err(|e| GatewayError::Startup(e.to_string()))
}

#[derive(Serialize)]
struct Health {
    status: &'static str,
    snapshot_id: u64,
    generation: u64,
    documents: usize,
}

async fn health(State(state): State<AppState>) -> Json<Health> {
    let store = state.read();
    Json(Health {
        status: "ok",
        snapshot_id: store.engine().snapshot_id(),
        generation: store.generation(),
        documents: store.engine().warehouse().len(),
    })
}

/// Body: records in the ingestion encoding, one per line. `?filter=` takes
/// the same text form as the command line.
async fn ingest(State(state): State<AppState>, RawQuery(raw): RawQuery, bytes: Bytes) -> ApiResult<Response> {
    let mut filter = SelectionFilter::permissive();
    for (k, v) in query_pairs(raw)? {
        if k == "filter" {
            filter = v.parse().map_err(docbi_core::Error::from)?;
        }
    }
    let text = std::str::from_utf8(&bytes).map_err(|e| ApiError::validation(format!("body is not UTF-8: {e}")))?;
    let report = state.mutate(|e| e.ingest_lines(text.lines(), &filter))?;
    Ok(Json(report).into_response())
}

async fn schema(State(state): State<AppState>) -> Response {
    Json(state.view(|e| e.schema())).into_response()
}

async fn gaps(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let required: Vec<String> = query_pairs(raw)?
        .into_iter()
        .filter(|(k, _)| k == "require")
        .flat_map(|(_, v)| v.split(',').map(|s| s.trim().to_string()).collect::<Vec<_>>())
        .filter(|s| !s.is_empty())
        .collect();
    Ok(Json(state.view(|e| e.detect_gaps(&required))).into_response())
}

#[derive(Deserialize)]
struct EnrichRequest {
    name: String,
    join_attr: String,
    target_attr: String,
    /// Either a join-key to value map or the CSV text of the source.
    #[serde(default)]
    records: Option<std::collections::BTreeMap<String, String>>,
    #[serde(default)]
    csv: Option<String>,
}

async fn enrich(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let req: EnrichRequest = body(&bytes)?;
    let source = match (req.records, req.csv) {
        (Some(records), None) => EnrichmentSource::new(req.name, &req.join_attr, &req.target_attr, records),
        (None, Some(csv)) => EnrichmentSource::from_csv(req.name, &req.join_attr, &req.target_attr, csv.as_bytes()),
        _ => return Err(ApiError::validation("give exactly one of records or csv")),
    }
    .map_err(docbi_core::Error::from)?;
    let report = state.mutate(|e| Ok(e.enrich(&source)))?;
    Ok(Json(report).into_response())
}

#[derive(Deserialize)]
struct QueryRequest {
    text: String,
    #[serde(default)]
    identity: Option<String>,
}

async fn run_query(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Json<ResultSet>> {
    let req: QueryRequest = body(&bytes)?;
    Ok(Json(state.view(|e| e.query(&req.text, req.identity.as_deref()))?))
}

/// `?path=attr=value` repeated once per step.
async fn explore(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let mut path = Vec::new();
    for (k, step) in query_pairs(raw)? {
        if k != "path" {
            continue;
        }
        let (a, v) = step
            .split_once('=')
            .ok_or_else(|| ApiError::validation(format!("path step must be attr=value, got {step:?}")))?;
        path.push((a.to_string(), v.to_string()));
    }
    Ok(Json(state.view(|e| e.explore(&path))).into_response())
}

#[derive(Deserialize)]
struct SessionRequest {
    identity: String,
    objective: String,
}

async fn start_session(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let req: SessionRequest = body(&bytes)?;
    let tree = state.mutate(|e| {
        let id = e.start_session(&req.identity, &req.objective)?;
        e.session_tree(&id)
    })?;
    Ok(created(tree))
}

async fn list_sessions(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Json<Vec<SessionModel>>> {
    let identity = query_pairs(raw)?.into_iter().find(|(k, _)| k == "identity").map(|(_, v)| v);
    let trees = state.view(|e| {
        e.top_level_sessions(identity.as_deref())
            .iter()
            .map(|s| e.session_tree(&s.session_id))
            .collect::<Result<Vec<_>, _>>()
    })?;
    Ok(Json(trees))
}

async fn get_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<SessionModel>> {
    Ok(Json(state.view(|e| e.session_tree(&id))?))
}

async fn export_session(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    let mut line = state.view(|e| e.export_session(&id))?;
    line.push('\n');
    Ok(([(header::CONTENT_TYPE, "application/x-ndjson")], line).into_response())
}

#[derive(Deserialize)]
struct SubsessionRequest {
    objective: String,
}

async fn start_subsession(
    State(state): State<AppState>,
    Path(id): Path<String>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let req: SubsessionRequest = body(&bytes)?;
    let tree = state.mutate(|e| {
        let sub = e.start_subsession(&id, &req.objective)?;
        e.session_tree(&sub)
    })?;
    Ok(created(tree))
}

async fn record_activity(State(state): State<AppState>, Path(id): Path<String>, bytes: Bytes) -> ApiResult<Response> {
    let activity: NewActivity = body(&bytes)?;
    Ok(created(state.mutate(|e| e.record_activity(&id, activity))?))
}

async fn submit_evaluation(
    State(state): State<AppState>,
    Path((id, aid)): Path<(String, String)>,
    bytes: Bytes,
) -> ApiResult<Response> {
    let evaluation: Evaluation = body(&bytes)?;
    Ok(Json(state.mutate(|e| e.submit_evaluation(&id, &aid, evaluation))?).into_response())
}

async fn profile(State(state): State<AppState>, Path(identity): Path<String>) -> Response {
    Json(state.view(|e| e.profile(&identity))).into_response()
}

async fn define_problem(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let definition: ProblemDefinition = body(&bytes)?;
    Ok(created(state.mutate(|e| e.define_problem(definition))?))
}

async fn list_problems(State(state): State<AppState>, RawQuery(raw): RawQuery) -> ApiResult<Response> {
    let identity = query_pairs(raw)?
        .into_iter()
        .find(|(k, _)| k == "identity")
        .map(|(_, v)| v)
        .ok_or_else(|| ApiError::validation("identity query parameter is required"))?;
    let problems = state.view(|e| e.problems_for(&identity).into_iter().cloned().collect::<Vec<_>>());
    Ok(Json(problems).into_response())
}

async fn get_problem(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.view(|e| e.problem(&id).cloned())?).into_response())
}

async fn translate_problem(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.view(|e| e.translate_problem(&id))?).into_response())
}

#[derive(Serialize)]
struct MartVersion {
    built_at: DateTime<Utc>,
    snapshot_id: u64,
}

#[derive(Serialize)]
struct MartSummary {
    spec: MartSpec,
    versions: Vec<MartVersion>,
}

async fn list_marts(State(state): State<AppState>) -> Response {
    let list: Vec<MartSummary> = state.view(|e| {
        e.mart_specs()
            .map(|spec| MartSummary {
                spec: spec.clone(),
                versions: e
                    .marts()
                    .versions(&spec.name)
                    .iter()
                    .map(|m| MartVersion {
                        built_at: m.built_at(),
                        snapshot_id: m.snapshot_id(),
                    })
                    .collect(),
            })
            .collect()
    });
    Json(list).into_response()
}

async fn register_mart(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let spec: MartSpec = body(&bytes)?;
    let echo = spec.clone();
    state.mutate(|e| e.register_mart(spec))?;
    Ok(created(echo))
}

/// `POST /marts/{name}:build` and `POST /marts/{name}:refresh`.
async fn mart_action(State(state): State<AppState>, Path(target): Path<String>) -> ApiResult<Response> {
    let (name, action) = target
        .rsplit_once(':')
        .ok_or_else(|| ApiError::not_found("expected /marts/{name}:build or /marts/{name}:refresh"))?;
    let now = Utc::now();
    let mart: DataMart = match action {
        "build" => state.mutate(|e| e.build_mart(name, now))?,
        "refresh" => state.mutate(|e| e.refresh_mart(name, now))?,
        other => return Err(ApiError::not_found(format!("unknown mart action {other:?}"))),
    };
    Ok(created(mart))
}

async fn mart_cells(State(state): State<AppState>, Path(name): Path<String>) -> ApiResult<Response> {
    Ok(Json(state.view(|e| e.mart(&name).cloned())?).into_response())
}

async fn mart_export(State(state): State<AppState>, Path(name): Path<String>) -> ApiResult<Response> {
    let csv = state.view(|e| e.export_mart(&name))?;
    Ok(([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response())
}

#[derive(Deserialize)]
struct RecommendRequest {
    identity: String,
    n: usize,
}

#[derive(Serialize)]
struct Recommendations {
    identity: String,
    doc_ids: Vec<String>,
}

async fn recommend(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let req: RecommendRequest = body(&bytes)?;
    let doc_ids = state.mutate(|e| e.recommend(&req.identity, req.n, Utc::now()))?;
    Ok(Json(Recommendations {
        identity: req.identity,
        doc_ids,
    })
    .into_response())
}

#[derive(Deserialize)]
struct AccessRequest {
    identity: String,
    doc_id: String,
    #[serde(default)]
    timestamp: Option<DateTime<Utc>>,
    #[serde(default)]
    kind: Option<AccessKind>,
}

async fn record_access(State(state): State<AppState>, bytes: Bytes) -> ApiResult<Response> {
    let req: AccessRequest = body(&bytes)?;
    let event = AccessEvent {
        identity: req.identity,
        doc_id: req.doc_id,
        timestamp: req.timestamp.unwrap_or_else(Utc::now),
        kind: req.kind.unwrap_or(AccessKind::Viewed),
    };
    let echo = event.clone();
    state.mutate(|e| e.record_access(event))?;
    Ok(created(echo))
}
