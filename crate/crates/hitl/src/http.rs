//! `/v1` HTTP endpoints and the server-sent-event turn stream.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/v1/sessions` | none | [`CreatedSession`] |
//! | GET | `/v1/sessions/{id}` | none | [`SessionView`] |
//! | POST | `/v1/sessions/{id}/turns` | [`TurnRequest`] | [`TurnOutcome`] |
//! | POST | `/v1/sessions/{id}/feedback` | [`FeedbackRequest`] | [`FeedbackRecord`] |
//! | POST | `/v1/sessions/{id}/abandon` | none | [`FeedbackRecord`] |
//! | GET | `/v1/sessions/{id}/stream` | none | SSE of [`StreamEvent`] |
//! | GET | `/v1/runs` | none | list of [`RunStatus`] |
//!
//! Errors reply with `{"error": code, "message": text}`.

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use std::convert::Infallible;
use std::net::SocketAddr;
use std::sync::Arc;
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

use ddq::domain::DialogueAct;

use crate::error::HitlError;
use crate::learner::RunStatus;
use crate::service::{CreatedSession, HitlService, StreamEvent};
use crate::session::{FeedbackRecord, SessionView, TurnOutcome};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnRequest {
    pub turn_id: u64,
    pub act: DialogueAct,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeedbackRequest {
    pub success: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub error: String,
    pub message: String,
}

pub enum ApiError {
    Service(HitlError),
    /// The request body was not valid JSON or did not match the schema.
    Body(JsonRejection),
}

impl From<HitlError> for ApiError {
    fn from(err: HitlError) -> Self {
        ApiError::Service(err)
    }
}

impl From<JsonRejection> for ApiError {
    fn from(err: JsonRejection) -> Self {
        ApiError::Body(err)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let err = match self {
            ApiError::Service(err) => err,
            ApiError::Body(rejection) => {
                let body = ErrorBody {
                    error: "invalid_body".to_string(),
                    message: rejection.body_text(),
                };
                return (rejection.status(), Json(body)).into_response();
            }
        };
        let status = match &err {
            HitlError::NoRuns => StatusCode::SERVICE_UNAVAILABLE,
            HitlError::UnknownSession(_) => StatusCode::NOT_FOUND,
            HitlError::SessionClosed { .. }
            | HitlError::DuplicateTurn { .. }
            | HitlError::OutOfOrderTurn { .. }
            | HitlError::DuplicateFeedback(_) => StatusCode::CONFLICT,
            HitlError::InvalidAct(_) => StatusCode::UNPROCESSABLE_ENTITY,
            HitlError::Log(_) | HitlError::Core(_) | HitlError::Io(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        let body = ErrorBody {
            error: err.code().to_string(),
            message: err.to_string(),
        };
        (status, Json(body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

pub fn router(service: Arc<HitlService>) -> Router {
    Router::new()
        .route("/v1/sessions", post(create_session))
        .route("/v1/sessions/:id", get(get_session))
        .route("/v1/sessions/:id/turns", post(post_turn))
        .route("/v1/sessions/:id/feedback", post(post_feedback))
        .route("/v1/sessions/:id/abandon", post(abandon))
        .route("/v1/sessions/:id/stream", get(stream))
        .route("/v1/runs", get(runs))
        .with_state(service)
}

/// Serves the router until the process ends.
pub async fn serve(service: Arc<HitlService>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(service)).await
}

async fn create_session(State(service): State<Arc<HitlService>>) -> Result<(StatusCode, Json<CreatedSession>), ApiError> {
    Ok((StatusCode::CREATED, Json(service.create_session()?)))
}

async fn get_session(State(service): State<Arc<HitlService>>, Path(id): Path<String>) -> ApiResult<SessionView> {
    Ok(Json(service.session(&id)?))
}

async fn post_turn(
    State(service): State<Arc<HitlService>>,
    Path(id): Path<String>,
    req: Result<Json<TurnRequest>, JsonRejection>,
) -> ApiResult<TurnOutcome> {
    let Json(req) = req?;
    Ok(Json(service.post_user_turn(&id, req.turn_id, &req.act)?))
}

async fn post_feedback(
    State(service): State<Arc<HitlService>>,
    Path(id): Path<String>,
    req: Result<Json<FeedbackRequest>, JsonRejection>,
) -> ApiResult<FeedbackRecord> {
    let Json(req) = req?;
    Ok(Json(service.post_feedback(&id, req.success)?))
}

async fn abandon(State(service): State<Arc<HitlService>>, Path(id): Path<String>) -> ApiResult<FeedbackRecord> {
    Ok(Json(service.abandon_session(&id)?))
}

async fn runs(State(service): State<Arc<HitlService>>) -> Json<Vec<RunStatus>> {
    Json(service.run_status())
}

async fn stream(
    State(service): State<Arc<HitlService>>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, ApiError> {
    service.session(&id)?;
    let events = BroadcastStream::new(service.subscribe()).filter_map(move |msg| match msg {
        Ok(event) if event.session_id == id => Some(Ok(sse_event(&event))),
        _ => None,
    });
    Ok(Sse::new(events).keep_alive(KeepAlive::default()))
}

fn sse_event(event: &StreamEvent) -> Event {
    let kind = match event.outcome {
        TurnOutcome::AgentTurn { .. } => "agent_turn",
        TurnOutcome::AwaitingFeedback { .. } => "awaiting_feedback",
        TurnOutcome::Terminal { .. } => "terminal",
    };
    Event::default()
        .event(kind)
        .json_data(event)
        .unwrap_or_else(|_| Event::default().event("error"))
}
