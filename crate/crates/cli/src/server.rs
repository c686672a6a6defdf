use std::collections::HashMap;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use featseq::{Error, GameResult};
use serde::Deserialize;
use serde_json::json;

use crate::engine::{error_kind, Engine};

/// Shared service state. Requests for the same student are serialized by an
/// in-process mutex; the store's lock file still guards against other
/// processes.
pub struct AppState {
    engine: Engine,
    students: Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>,
}

impl AppState {
    pub fn new(engine: Engine) -> Self {
        AppState {
            engine,
            students: Mutex::new(HashMap::new()),
        }
    }

    fn student_lock(&self, id: &str) -> Arc<tokio::sync::Mutex<()>> {
        let mut map = self.students.lock().expect("lock map poisoned");
        map.entry(id.to_owned()).or_default().clone()
    }
}

pub struct ApiError(Error);

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        ApiError(e)
    }
}

/// HTTP status for each engine error.
pub fn status_for(err: &Error) -> StatusCode {
    match err {
        Error::NotFound(_) => StatusCode::NOT_FOUND,
        Error::SessionIndexMismatch { .. } | Error::AlreadyExists(_) | Error::LockContention(_) => {
            StatusCode::CONFLICT
        }
        Error::Io { .. } | Error::CorruptRecord { .. } => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "error": error_kind(&self.0), "message": self.0.to_string() });
        (status_for(&self.0), Json(body)).into_response()
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct NewStudent {
    id: String,
    year: u32,
}

#[derive(Deserialize)]
struct PlanQuery {
    seed: Option<u64>,
}

type Shared = Arc<AppState>;

async fn create_student(
    State(state): State<Shared>,
    Json(req): Json<NewStudent>,
) -> Result<impl IntoResponse, ApiError> {
    let lock = state.student_lock(&req.id);
    let _guard = lock.lock().await;
    let profile = state.engine.init_student(&req.id, req.year)?;
    Ok((StatusCode::CREATED, Json(profile)))
}

async fn plan(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<PlanQuery>,
) -> Result<impl IntoResponse, ApiError> {
    let lock = state.student_lock(&id);
    let _guard = lock.lock().await;
    Ok(Json(state.engine.plan(&id, q.seed)?))
}

async fn submit(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Json(result): Json<GameResult>,
) -> Result<impl IntoResponse, ApiError> {
    let lock = state.student_lock(&id);
    let _guard = lock.lock().await;
    // The log line is on disk before the report goes out.
    Ok(Json(state.engine.submit(&id, &result)?))
}

async fn profile(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(state.engine.profile(&id)?))
}

pub fn router(engine: Engine) -> Router {
    Router::new()
        .route("/students", post(create_student))
        .route("/students/{id}/plan", get(plan))
        .route("/students/{id}/results", post(submit))
        .route("/students/{id}/profile", get(profile))
        .with_state(Arc::new(AppState::new(engine)))
}

pub async fn serve(engine: Engine, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(engine)).await
}
