//! JSON HTTP API over a [`Workspace`] and a [`BriefcaseStore`].
//!
//! | Method | Path | |
//! |---|---|---|
//! | GET | `/api/search?q=&top_k=&year_from=&year_to=&source=` | ranked hits with metadata |
//! | GET | `/api/documents/{doc_id}` | metadata, PICO spans and concepts |
//! | GET, POST | `/api/briefcases` | list / create (`{"name"}`) |
//! | GET | `/api/briefcases/{id}` | one briefcase with history |
//! | POST, DELETE | `/api/briefcases/{id}/docs` | add / remove (`{"doc_ids": [...]}`) |
//! | GET | `/api/briefcases/{id}/export?version=` | export document |
//! | GET | `/api/viz/sankey` | Sankey graph (`min_strength`, `max_nodes`) |
//! | GET | `/api/viz/topics` | selected topics on the topic map (`t`) |
//! | GET | `/api/viz/cloud/{doc_id}` | concept cloud against the rest of the collection |
//! | GET | `/api/dashboard` | all three views at once |
//!
//! The `viz` and `dashboard` endpoints take the active collection from
//! `briefcase` (+ `version`), else `docs` (comma-separated ids), else `q`
//! (search results, with the search filters). Briefcases live in the
//! namespace named by the `X-Client-Token` header. Errors are
//! `{"code", "message"}`.

use std::collections::{BTreeSet, HashMap};
use std::sync::{Arc, Mutex};

use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, Path, Request, State};
use axum::http::request::Parts;
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::{json, Value};

use crate::analysis::{ActiveCollection, CollectionSource, Workspace, TOPIC_THRESHOLD};
use crate::briefcase::{BriefcaseStore, DEFAULT_NAMESPACE};
use crate::corpus::{document_json, DocFilter};
use crate::error::Error;
use crate::relations::{SankeyOptions, TypedConceptPair};
use crate::search::DEFAULT_TOP_K;

pub const CLIENT_TOKEN_HEADER: &str = "x-client-token";

/// Key of a cached relation set: namespace, briefcase id, version.
type RelationKey = (String, String, u64);

pub struct AppState {
    pub workspace: Workspace,
    pub briefcases: BriefcaseStore,
    // Briefcase versions are immutable, so their relations never go stale.
    relations: Mutex<HashMap<RelationKey, Arc<Vec<TypedConceptPair>>>>,
}

impl AppState {
    pub fn new(workspace: Workspace, briefcases: BriefcaseStore) -> Self {
        AppState {
            workspace,
            briefcases,
            relations: Mutex::default(),
        }
    }

    fn relations(&self, headers: &HeaderMap, collection: &ActiveCollection) -> Result<Arc<Vec<TypedConceptPair>>, Error> {
        let CollectionSource::Briefcase { briefcase_id, version } = &collection.source else {
            return Ok(Arc::new(self.workspace.relations(&collection.doc_ids)?));
        };
        let key = (namespace(headers), briefcase_id.clone(), *version);
        if let Some(hit) = self.relations.lock().expect("relation cache poisoned").get(&key) {
            return Ok(hit.clone());
        }
        let computed = Arc::new(self.workspace.relations(&collection.doc_ids)?);
        self.relations
            .lock()
            .expect("relation cache poisoned")
            .insert(key, computed.clone());
        Ok(computed)
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/health", get(health))
        .route("/api/search", get(search))
        .route("/api/documents/{doc_id}", get(document))
        .route("/api/briefcases", get(list_briefcases).post(create_briefcase))
        .route("/api/briefcases/{id}", get(get_briefcase))
        .route("/api/briefcases/{id}/docs", axum::routing::post(add_docs).delete(remove_docs))
        .route("/api/briefcases/{id}/export", get(export))
        .route("/api/viz/sankey", get(sankey))
        .route("/api/viz/topics", get(topics))
        .route("/api/viz/cloud/{doc_id}", get(cloud))
        .route("/api/dashboard", get(dashboard))
        .with_state(state)
}

/// Serves until the listener fails or the task is cancelled.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

impl ApiError {
    fn parts(&self) -> (StatusCode, &'static str) {
        match &self.0 {
            Error::UnknownDocument(_) => (StatusCode::NOT_FOUND, "unknown_document"),
            Error::UnknownBriefcase(_) => (StatusCode::NOT_FOUND, "unknown_briefcase"),
            Error::UnknownVersion { .. } => (StatusCode::NOT_FOUND, "unknown_version"),
            Error::EmptyQuery => (StatusCode::BAD_REQUEST, "empty_query"),
            Error::EmptyCollection => (StatusCode::BAD_REQUEST, "empty_collection"),
            Error::EmptyBackground => (StatusCode::UNPROCESSABLE_ENTITY, "empty_background"),
            Error::NoAnalyzableText(_) => (StatusCode::UNPROCESSABLE_ENTITY, "no_analyzable_text"),
            Error::InvalidInput(_) | Error::LengthMismatch(_) | Error::InvalidBio { .. } | Error::Parse { .. } => {
                (StatusCode::BAD_REQUEST, "invalid_input")
            }
            Error::Io { .. } | Error::Json(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, code) = self.parts();
        if status.is_server_error() {
            tracing::error!(error = %self.0, "request failed");
        }
        (status, Json(json!({ "code": code, "message": self.0.to_string() }))).into_response()
    }
}

type ApiResult<T = Json<Value>> = Result<T, ApiError>;

/// Query string extractor whose rejections use the error envelope.
pub struct Query<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequestParts<S> for Query<T> {
    type Rejection = ApiError;

    async fn from_request_parts(parts: &mut Parts, state: &S) -> Result<Self, Self::Rejection> {
        axum::extract::Query::<T>::from_request_parts(parts, state)
            .await
            .map(|q| Query(q.0))
            .map_err(|e: QueryRejection| ApiError(Error::InvalidInput(e.body_text())))
    }
}

/// JSON body extractor whose rejections use the error envelope.
pub struct Body<T>(pub T);

impl<T: DeserializeOwned, S: Send + Sync> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, Self::Rejection> {
        Json::<T>::from_request(req, state)
            .await
            .map(|j| Body(j.0))
            .map_err(|e: JsonRejection| ApiError(Error::InvalidInput(e.body_text())))
    }
}

fn namespace(headers: &HeaderMap) -> String {
    headers
        .get(CLIENT_TOKEN_HEADER)
        .and_then(|v| v.to_str().ok())
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .unwrap_or(DEFAULT_NAMESPACE)
        .to_string()
}

fn to_json<T: serde::Serialize>(value: &T) -> ApiResult {
    Ok(Json(serde_json::to_value(value).map_err(Error::from)?))
}

fn split_list(raw: &Option<String>) -> Vec<String> {
    raw.as_deref()
        .unwrap_or_default()
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

#[derive(Debug, Default, Deserialize)]
pub struct SearchParams {
    q: Option<String>,
    top_k: Option<usize>,
    year_from: Option<i32>,
    year_to: Option<i32>,
    source: Option<String>,
}

impl SearchParams {
    fn filter(&self) -> DocFilter {
        let mut filter = DocFilter::default();
        if self.year_from.is_some() || self.year_to.is_some() {
            filter = filter.years(self.year_from.unwrap_or(i32::MIN), self.year_to.unwrap_or(i32::MAX));
        }
        let sources = split_list(&self.source);
        if !sources.is_empty() {
            filter = filter.sources(sources);
        }
        filter
    }
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok" }))
}

async fn search(State(state): State<Arc<AppState>>, Query(params): Query<SearchParams>) -> ApiResult {
    let query = params.q.clone().unwrap_or_default();
    let hits = state
        .workspace
        .search(&query, params.top_k.unwrap_or(DEFAULT_TOP_K), &params.filter())?;
    Ok(Json(json!({ "query": query, "total": hits.len(), "hits": hits })))
}

async fn document(State(state): State<Arc<AppState>>, Path(doc_id): Path<String>) -> ApiResult {
    let ws = &state.workspace;
    let doc = ws
        .corpus()
        .get(&doc_id)
        .ok_or_else(|| Error::UnknownDocument(doc_id.clone()))?;
    let pico = ws.pico(&doc_id).cloned().unwrap_or_default();
    let concepts: Vec<Value> = pico
        .concepts
        .iter()
        .map(|c| json!({ "concept_id": c.concept_id, "label": ws.label(&c.concept_id), "category": c.category }))
        .collect();
    Ok(Json(json!({
        "document": document_json(doc),
        "pico_spans": pico.spans,
        "pico_concepts": concepts,
        "terms": ws.bag(&doc_id).unwrap_or_default(),
    })))
}

#[derive(Debug, Deserialize)]
pub struct CreateBody {
    #[serde(default)]
    name: String,
}

async fn list_briefcases(State(state): State<Arc<AppState>>, headers: HeaderMap) -> ApiResult {
    let list = state.briefcases.list(&namespace(&headers));
    Ok(Json(json!({ "briefcases": list })))
}

async fn create_briefcase(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Body(body): Body<CreateBody>,
) -> ApiResult<(StatusCode, Json<Value>)> {
    let name = if body.name.trim().is_empty() { "Untitled" } else { body.name.trim() };
    let created = state.briefcases.create(&namespace(&headers), name)?;
    Ok((StatusCode::CREATED, to_json(&created)?))
}

async fn get_briefcase(State(state): State<Arc<AppState>>, headers: HeaderMap, Path(id): Path<String>) -> ApiResult {
    to_json(&state.briefcases.get(&namespace(&headers), &id)?)
}

#[derive(Debug, Default, Deserialize)]
pub struct DocsBody {
    #[serde(default)]
    doc_ids: Vec<String>,
    /// Also removed in the same version (POST only).
    #[serde(default)]
    remove: Vec<String>,
}

async fn add_docs(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Body(body): Body<DocsBody>,
) -> ApiResult {
    let corpus = state.workspace.corpus();
    let updated = state
        .briefcases
        .mutate(&namespace(&headers), &id, &body.doc_ids, &body.remove, |d| corpus.contains(d))?;
    to_json(&updated)
}

async fn remove_docs(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Body(body): Body<DocsBody>,
) -> ApiResult {
    let corpus = state.workspace.corpus();
    let updated = state
        .briefcases
        .mutate(&namespace(&headers), &id, &[], &body.doc_ids, |d| corpus.contains(d))?;
    to_json(&updated)
}

#[derive(Debug, Deserialize)]
pub struct VersionParam {
    version: Option<u64>,
}

async fn export(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(id): Path<String>,
    Query(params): Query<VersionParam>,
) -> ApiResult {
    Ok(Json(state.briefcases.export(
        &namespace(&headers),
        &id,
        params.version,
        state.workspace.corpus(),
    )?))
}

#[derive(Debug, Default, Deserialize)]
pub struct VizParams {
    briefcase: Option<String>,
    version: Option<u64>,
    docs: Option<String>,
    q: Option<String>,
    top_k: Option<usize>,
    year_from: Option<i32>,
    year_to: Option<i32>,
    source: Option<String>,
    min_strength: Option<usize>,
    max_nodes: Option<usize>,
    t: Option<f64>,
}

impl VizParams {
    fn collection(&self, state: &AppState, headers: &HeaderMap) -> Result<ActiveCollection, Error> {
        if let Some(id) = &self.briefcase {
            let (version, doc_ids) = state.briefcases.doc_ids_at(&namespace(headers), id, self.version)?;
            return Ok(ActiveCollection {
                source: CollectionSource::Briefcase {
                    briefcase_id: id.clone(),
                    version,
                },
                doc_ids,
            });
        }
        let docs = split_list(&self.docs);
        if !docs.is_empty() {
            let mut seen = BTreeSet::new();
            return Ok(ActiveCollection {
                source: CollectionSource::Documents,
                doc_ids: docs.into_iter().filter(|d| seen.insert(d.clone())).collect(),
            });
        }
        if let Some(q) = &self.q {
            let search = SearchParams {
                q: None,
                top_k: None,
                year_from: self.year_from,
                year_to: self.year_to,
                source: self.source.clone(),
            };
            return state
                .workspace
                .search_collection(q, self.top_k.unwrap_or(DEFAULT_TOP_K), &search.filter());
        }
        Err(Error::InvalidInput("select a collection with `briefcase`, `docs` or `q`".into()))
    }

    fn sankey_options(&self) -> SankeyOptions {
        let defaults = SankeyOptions::default();
        SankeyOptions {
            min_strength: self.min_strength.unwrap_or(defaults.min_strength),
            max_nodes_per_column: self.max_nodes.unwrap_or(defaults.max_nodes_per_column),
        }
    }

    fn threshold(&self) -> Result<f64, Error> {
        match self.t {
            Some(t) if !t.is_finite() => Err(Error::InvalidInput("`t` must be finite".into())),
            Some(t) => Ok(t),
            None => Ok(TOPIC_THRESHOLD),
        }
    }
}

async fn sankey(State(state): State<Arc<AppState>>, headers: HeaderMap, Query(params): Query<VizParams>) -> ApiResult {
    let collection = params.collection(&state, &headers)?;
    let relations = state.relations(&headers, &collection)?;
    to_json(&state.workspace.sankey_from(&relations, &params.sankey_options()))
}

async fn topics(State(state): State<Arc<AppState>>, headers: HeaderMap, Query(params): Query<VizParams>) -> ApiResult {
    let collection = params.collection(&state, &headers)?;
    let view = state
        .workspace
        .topics(&collection.doc_ids, params.threshold()?)?
        .ok_or_else(|| Error::InvalidInput("no topic model loaded; run train-lda first".into()))?;
    to_json(&view)
}

async fn cloud(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    Path(doc_id): Path<String>,
    Query(params): Query<VizParams>,
) -> ApiResult {
    let collection = params.collection(&state, &headers)?;
    to_json(&state.workspace.cloud(&doc_id, &collection.doc_ids)?)
}

async fn dashboard(State(state): State<Arc<AppState>>, headers: HeaderMap, Query(params): Query<VizParams>) -> ApiResult {
    let collection = params.collection(&state, &headers)?;
    let relations = state.relations(&headers, &collection)?;
    let payload = state
        .workspace
        .dashboard_from(collection, &relations, &params.sankey_options(), params.threshold()?)?;
    to_json(&payload)
}
