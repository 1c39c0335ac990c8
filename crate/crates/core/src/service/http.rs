use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::json;

use super::config::ServiceConfig;
use super::workflow::AnnotationService;
use super::{NewEvaluator, NewProject, ServiceError, Submission};
use crate::corpus::annotations_to_jsonl;

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let status = match &self {
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::Validation(_) => StatusCode::UNPROCESSABLE_ENTITY,
            ServiceError::Conflict(_) => StatusCode::CONFLICT,
            ServiceError::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        if status.is_server_error() {
            log::error!("{self}");
        }
        (status, Json(json!({ "error": self.to_string() }))).into_response()
    }
}

type Svc = State<Arc<AnnotationService>>;

/// Runs blocking store work off the async executor.
async fn blocking<T: Send + 'static>(
    svc: Arc<AnnotationService>,
    f: impl FnOnce(&AnnotationService) -> Result<T, ServiceError> + Send + 'static,
) -> Result<T, ServiceError> {
    tokio::task::spawn_blocking(move || f(&svc))
        .await
        .map_err(|e| ServiceError::Storage(format!("worker failed: {e}")))?
}

async fn create_project(State(svc): Svc, Json(body): Json<NewProject>) -> Result<impl IntoResponse, ServiceError> {
    let project = blocking(svc, move |s| s.create_project(body)).await?;
    Ok((StatusCode::CREATED, Json(project)))
}

async fn register_evaluator(
    State(svc): Svc,
    Path(pid): Path<String>,
    Json(body): Json<NewEvaluator>,
) -> Result<impl IntoResponse, ServiceError> {
    let profile = blocking(svc, move |s| s.register_evaluator(&pid, body)).await?;
    Ok((StatusCode::CREATED, Json(profile)))
}

async fn guidelines(State(svc): Svc, Path(pid): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(svc, move |s| s.guidelines(&pid)).await?))
}

#[derive(Deserialize)]
struct NextTaskQuery {
    evaluator: String,
}

async fn next_task(
    State(svc): Svc,
    Path(pid): Path<String>,
    Query(q): Query<NextTaskQuery>,
) -> Result<Response, ServiceError> {
    Ok(match blocking(svc, move |s| s.next_task(&pid, &q.evaluator)).await? {
        Some(task) => Json(task).into_response(),
        None => StatusCode::NO_CONTENT.into_response(),
    })
}

async fn submit(
    State(svc): Svc,
    Path(task_id): Path<String>,
    Json(body): Json<Submission>,
) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(svc, move |s| s.submit(&task_id, body)).await?))
}

async fn reopen(State(svc): Svc, Path(task_id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(svc, move |s| s.reopen(&task_id)).await?))
}

async fn task(State(svc): Svc, Path(task_id): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(svc, move |s| s.task(&task_id)).await?))
}

#[derive(Deserialize)]
struct ExportQuery {
    #[serde(default)]
    include_calibration: bool,
}

/// Annotation JSONL, the same format the `qa` command reads.
async fn export(
    State(svc): Svc,
    Path(pid): Path<String>,
    Query(q): Query<ExportQuery>,
) -> Result<impl IntoResponse, ServiceError> {
    let annotations = blocking(svc, move |s| s.export(&pid, q.include_calibration)).await?;
    Ok((
        [(header::CONTENT_TYPE, "application/x-ndjson")],
        annotations_to_jsonl(&annotations),
    ))
}

async fn progress(State(svc): Svc, Path(pid): Path<String>) -> Result<impl IntoResponse, ServiceError> {
    Ok(Json(blocking(svc, move |s| s.progress(&pid)).await?))
}

pub fn router(service: Arc<AnnotationService>) -> Router {
    Router::new()
        .route("/projects", post(create_project))
        .route("/projects/:id/evaluators", post(register_evaluator))
        .route("/projects/:id/guidelines", get(guidelines))
        .route("/projects/:id/next-task", get(next_task))
        .route("/projects/:id/export", get(export))
        .route("/projects/:id/progress", get(progress))
        .route("/tasks/:id", get(task))
        .route("/tasks/:id/submit", post(submit))
        .route("/tasks/:id/reopen", post(reopen))
        .with_state(service)
}

/// Binds `host:port` and serves until the process is stopped.
pub async fn serve(config: &ServiceConfig) -> std::io::Result<()> {
    let store = config.open_store().map_err(std::io::Error::other)?;
    let app = router(Arc::new(AnnotationService::new(store)));
    let listener = tokio::net::TcpListener::bind((config.host.as_str(), config.port)).await?;
    log::info!("annotation service listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await
}
