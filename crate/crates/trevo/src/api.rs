//! JSON API over one immutable dataset and a registry of named selections.

use std::collections::BTreeMap;
use std::path::Path;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path as UrlPath, State};
use axum::http::{header, StatusCode, Uri};
use axum::response::IntoResponse;
use axum::routing::{any, get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use tower_http::services::ServeDir;
use trevo_core::pattern::{presets, Preset};
use trevo_core::summaries::{SelectionView, SubtreeSelection};
use trevo_core::Dataset;

use crate::error::ApiError;
use crate::service::{
    bins_response, build_selection, dataset_summary, rank_response, BinsRequest, BinsResponse, DatasetSummary,
    RankRequest, RankResponse, SelectionRequest, Session,
};

/// The published schema of every request and response body.
pub const API_SCHEMA: &str = include_str!("../schema/api.schema.json");

#[derive(Default)]
pub struct AppState {
    session: Option<Arc<Session>>,
    selections: RwLock<BTreeMap<String, SubtreeSelection>>,
}

impl AppState {
    pub fn new(dataset: Option<Dataset>) -> Self {
        Self { session: dataset.map(|d| Arc::new(Session::new(d))), selections: RwLock::default() }
    }

    pub fn session(&self) -> Result<&Arc<Session>, ApiError> {
        self.session.as_ref().ok_or_else(ApiError::no_dataset)
    }

    fn selection(&self, name: &str) -> Result<SubtreeSelection, ApiError> {
        let reg = self.selections.read().map_err(|_| ApiError::internal("selection registry poisoned"))?;
        reg.get(name).cloned().ok_or_else(|| ApiError::unknown_selection(name))
    }
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<Json<T>, ApiError>;

/// API routes only; see [`app`] for static file serving.
pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/api/dataset", get(get_dataset))
        .route("/api/selection", get(list_selections).post(create_selection))
        .route("/api/selection/{name}", get(get_selection).delete(delete_selection))
        .route("/api/bins", post(post_bins))
        .route("/api/pattern/rank", post(post_rank))
        .route("/api/presets", get(get_presets))
        .route("/api/schema", get(get_schema))
        .route("/api", any(unknown_route))
        .route("/api/{*rest}", any(unknown_route))
        .with_state(state)
}

/// API routes plus, when given, a directory of static UI files served at `/`.
pub fn app(state: Shared, static_dir: Option<&Path>) -> Router {
    let r = router(state);
    match static_dir {
        Some(dir) => r.fallback_service(ServeDir::new(dir)),
        None => r,
    }
}

fn parse<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::from_json(&e))
}

/// Runs CPU-bound work off the async executor.
async fn blocking<T, F>(f: F) -> Result<T, ApiError>
where
    F: FnOnce() -> Result<T, ApiError> + Send + 'static,
    T: Send + 'static,
{
    tokio::task::spawn_blocking(f).await.map_err(|e| ApiError::internal(e.to_string()))?
}

async fn get_dataset(State(s): State<Shared>) -> ApiResult<DatasetSummary> {
    Ok(Json(dataset_summary(&s.session()?.dataset)))
}

async fn list_selections(State(s): State<Shared>) -> ApiResult<Vec<SelectionView>> {
    let session = s.session()?;
    let reg = s.selections.read().map_err(|_| ApiError::internal("selection registry poisoned"))?;
    Ok(Json(reg.values().map(|sel| sel.view(session.dataset.tree())).collect()))
}

async fn create_selection(State(s): State<Shared>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    let session = s.session()?;
    let req: SelectionRequest = parse(&body)?;
    let sel = build_selection(&session.dataset, &req)?;
    let view = sel.view(session.dataset.tree());
    let mut reg = s.selections.write().map_err(|_| ApiError::internal("selection registry poisoned"))?;
    if reg.contains_key(&req.name) {
        return Err(ApiError::duplicate_selection(&req.name));
    }
    reg.insert(req.name, sel);
    Ok((StatusCode::CREATED, Json(view)))
}

async fn get_selection(State(s): State<Shared>, UrlPath(name): UrlPath<String>) -> ApiResult<SelectionView> {
    let session = s.session()?;
    Ok(Json(s.selection(&name)?.view(session.dataset.tree())))
}

async fn delete_selection(State(s): State<Shared>, UrlPath(name): UrlPath<String>) -> Result<StatusCode, ApiError> {
    s.session()?;
    let mut reg = s.selections.write().map_err(|_| ApiError::internal("selection registry poisoned"))?;
    reg.remove(&name).map(|_| StatusCode::NO_CONTENT).ok_or_else(|| ApiError::unknown_selection(&name))
}

async fn post_bins(State(s): State<Shared>, body: Bytes) -> ApiResult<BinsResponse> {
    let session = s.session()?.clone();
    let req: BinsRequest = parse(&body)?;
    let sel = s.selection(&req.selection)?;
    let align = req.align_with.as_deref().map(|n| s.selection(n)).transpose()?;
    let out = blocking(move || bins_response(&session.dataset, &sel, align.as_ref(), &req)).await?;
    Ok(Json(out))
}

async fn post_rank(State(s): State<Shared>, body: Bytes) -> ApiResult<RankResponse> {
    let session = s.session()?.clone();
    let req: RankRequest = parse(&body)?;
    let out = blocking(move || rank_response(&session, &req)).await?;
    Ok(Json(out))
}

async fn get_presets() -> Json<Vec<Preset>> {
    Json(presets())
}

async fn get_schema() -> impl IntoResponse {
    ([(header::CONTENT_TYPE, "application/schema+json")], API_SCHEMA)
}

async fn unknown_route(uri: Uri) -> ApiError {
    ApiError::not_found(uri.path())
}
