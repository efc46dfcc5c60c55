//! JSON HTTP API over the session store.
//!
//! | route | body | reply |
//! |---|---|---|
//! | `POST /sessions` | `{"model"}` | 201, session |
//! | `GET /sessions/{id}` | | session |
//! | `POST /sessions/{id}/instructions` | `{"instruction", "k"?}` | `{"session", "result"}` |
//! | `POST /sessions/{id}/selection` | `{"index", "annotator"}` | session |
//! | `GET /sessions/{id}/candidates/{i}/mesh` | | OBJ text |
//! | `GET /sessions/{id}/candidates/{i}/preview` | | PNG |
//! | `POST /eval` | `{"testset", "results"}` as JSONL text | `{"report", "table"}` |
//!
//! Errors reply `{"error": <kind>, "message": <text>, "details"?: <payload>}`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use sketchedit_core::captioning::Dataset;
use sketchedit_core::geometry::{assemble, mesh, mesh_to_obj, render_preview, CameraConfig};
use sketchedit_core::metrics::{evaluate, EmbeddingBackend, EvalConfig, MetricsError, MetricsReport};
use sketchedit_core::pipeline::{EditOptions, EditResult, ModelBackend, PipelineError, ResultLine};
use sketchedit_core::session::{EditSession, SessionError, SessionStore};

pub struct AppState {
    pub store: SessionStore,
    pub model: Arc<dyn ModelBackend>,
    pub embedder: Option<Arc<dyn EmbeddingBackend>>,
    pub options: EditOptions,
    pub eval: EvalConfig,
    pub camera: CameraConfig,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    details: Option<Value>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, kind, message: message.into(), details: None }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let Some(d) = self.details {
            body["details"] = d;
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let message = e.to_string();
        match e {
            SessionError::UnknownSession(_) => ApiError::new(StatusCode::NOT_FOUND, "UnknownSession", message),
            SessionError::InvalidModel { parse, issues, .. } => ApiError {
                details: Some(json!({ "parse": parse, "issues": issues })),
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidModel", message)
            },
            SessionError::InvalidCandidate { index, .. } => ApiError {
                details: Some(json!({ "index": index })),
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidCandidate", message)
            },
            SessionError::NoCandidates => ApiError::new(StatusCode::CONFLICT, "NoCandidates", message),
            SessionError::Pipeline(p) => p.into(),
            SessionError::Io(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", message),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        let message = e.to_string();
        match e {
            PipelineError::LocatingFailed { attempts } => ApiError {
                details: Some(json!({ "attempts": attempts })),
                ..ApiError::new(StatusCode::BAD_GATEWAY, "LocatingFailed", message)
            },
            PipelineError::BackendUnavailable(_) => {
                ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "BackendUnavailable", message)
            }
            PipelineError::InvalidCandidate { index, .. } => ApiError {
                details: Some(json!({ "index": index })),
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidCandidate", message)
            },
            PipelineError::InvalidInput(_) | PipelineError::InconsistentMask => {
                ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidInput", message)
            }
            PipelineError::Io(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Io", message),
        }
    }
}

impl From<MetricsError> for ApiError {
    fn from(e: MetricsError) -> Self {
        let message = e.to_string();
        match e {
            MetricsError::Backend(_) => ApiError::new(StatusCode::SERVICE_UNAVAILABLE, "BackendUnavailable", message),
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidInput", message),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "BadRequest", e.body_text())
    }
}

type Shared = Arc<AppState>;
type ApiResult<T> = Result<T, ApiError>;

async fn blocking<T: Send + 'static>(f: impl FnOnce() -> ApiResult<T> + Send + 'static) -> ApiResult<T> {
    tokio::task::spawn_blocking(f)
        .await
        .unwrap_or_else(|e| Err(ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", e.to_string())))
}

#[derive(Deserialize)]
pub struct CreateBody {
    pub model: String,
}

#[derive(Deserialize)]
pub struct InstructionBody {
    pub instruction: String,
    pub k: Option<usize>,
}

#[derive(Deserialize)]
pub struct SelectionBody {
    pub index: usize,
    pub annotator: String,
}

#[derive(Serialize)]
pub struct InstructionReply {
    pub session: EditSession,
    pub result: EditResult,
}

#[derive(Deserialize)]
pub struct EvalBody {
    pub testset: String,
    pub results: String,
}

#[derive(Serialize)]
pub struct EvalReply {
    pub report: MetricsReport,
    pub table: String,
}

async fn create_session(
    State(st): State<Shared>,
    body: Result<Json<CreateBody>, JsonRejection>,
) -> ApiResult<impl IntoResponse> {
    let Json(body) = body?;
    let s = blocking(move || Ok(st.store.create(&body.model)?)).await?;
    Ok((StatusCode::CREATED, Json(s)))
}

async fn get_session(State(st): State<Shared>, Path(id): Path<String>) -> ApiResult<Json<EditSession>> {
    blocking(move || Ok(Json(st.store.get(&id)?))).await
}

async fn submit_instruction(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<InstructionBody>, JsonRejection>,
) -> ApiResult<Json<InstructionReply>> {
    let Json(body) = body?;
    if body.instruction.trim().is_empty() {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidInput", "instruction is empty"));
    }
    if body.k == Some(0) {
        return Err(ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidInput", "k must be at least 1"));
    }
    blocking(move || {
        let (session, result) =
            st.store.submit_instruction(&id, &body.instruction, body.k, st.model.as_ref(), &st.options)?;
        Ok(Json(InstructionReply { session, result }))
    })
    .await
}

async fn apply_selection(
    State(st): State<Shared>,
    Path(id): Path<String>,
    body: Result<Json<SelectionBody>, JsonRejection>,
) -> ApiResult<Json<EditSession>> {
    let Json(body) = body?;
    blocking(move || Ok(Json(st.store.apply_selection(&id, body.index, &body.annotator)?))).await
}

fn candidate_mesh(st: &AppState, id: &str, index: usize) -> ApiResult<sketchedit_core::TriangleMeshF64> {
    let model = st.store.candidate_model(id, index)?;
    let geometry_err =
        |e: sketchedit_core::geometry::GeometryError| SessionError::InvalidCandidate { index, reason: e.to_string() };
    let assembly = assemble::<f64>(&model).map_err(geometry_err)?;
    Ok(mesh(&assembly).map_err(geometry_err)?)
}

async fn get_mesh(State(st): State<Shared>, Path((id, index)): Path<(String, usize)>) -> ApiResult<Response> {
    blocking(move || {
        let obj = mesh_to_obj(&candidate_mesh(&st, &id, index)?);
        Ok(([(header::CONTENT_TYPE, "model/obj")], obj).into_response())
    })
    .await
}

async fn get_preview(State(st): State<Shared>, Path((id, index)): Path<(String, usize)>) -> ApiResult<Response> {
    blocking(move || {
        let m = candidate_mesh(&st, &id, index)?;
        let img = render_preview(&m, &st.camera)
            .map_err(|e| SessionError::InvalidCandidate { index, reason: e.to_string() })?;
        Ok(([(header::CONTENT_TYPE, "image/png")], img.to_png()).into_response())
    })
    .await
}

pub fn parse_results(text: &str) -> Result<Vec<ResultLine>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("results line {}: {e}", i + 1)))
        .collect()
}

async fn eval(State(st): State<Shared>, body: Result<Json<EvalBody>, JsonRejection>) -> ApiResult<Json<EvalReply>> {
    let Json(body) = body?;
    blocking(move || {
        let bad = |m: String| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidInput", m);
        let testset = Dataset::from_jsonl(&body.testset).map_err(|e| bad(e.to_string()))?;
        let results = parse_results(&body.results).map_err(bad)?;
        let report = evaluate(&testset, &results, &st.eval, st.embedder.as_deref())?;
        Ok(Json(EvalReply { table: report.table(), report }))
    })
    .await
}

async fn not_found() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "NotFound", "no such route")
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/health", get(|| async { Json(json!({ "status": "ok" })) }))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/instructions", post(submit_instruction))
        .route("/sessions/{id}/selection", post(apply_selection))
        .route("/sessions/{id}/candidates/{index}/mesh", get(get_mesh))
        .route("/sessions/{id}/candidates/{index}/preview", get(get_preview))
        .route("/eval", post(eval))
        .fallback(not_found)
        .with_state(Arc::new(state))
}

/// Serves `router(state)` on an already bound listener until the future is dropped.
pub async fn serve_on(listener: tokio::net::TcpListener, state: AppState) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
