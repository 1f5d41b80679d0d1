//! HTTP+JSON API.
//!
//! | method | path | body / query | success |
//! |---|---|---|---|
//! | GET | `/api/videos` | | list of race metadata with frame and box counts |
//! | GET | `/api/frames/{frame_id}` | | frame record |
//! | PUT | `/api/frames/{frame_id}/annotations` | `{annotations, expected_version}` | updated frame record |
//! | GET | `/api/next_frame` | `video_id`, optional `after` | `{frame}` (`null` when the policy walk is done) |
//! | GET | `/api/progress` | | box counts, workload projection, per-class stats |
//! | GET | `/api/tracks/{track_id}/legal_next` | `video_id`, `frame_index` | `{prior, classes, ...}` |
//! | GET | `/api/classes` | | classes in race order and the legal transitions |
//! | GET | `/api/config` | | active thresholds |
//! | GET | `/frames/*` | | frame images as static files |
//!
//! Errors are JSON objects with an `error` kind and a `message`: `not_found`
//! (404), `conflict` (409, with `current_version`), `validation` (422, with
//! `violations`), `bad_request` (400), `unavailable` (503), `storage` (500).
//!
//! All writes go through one writer thread that owns the
//! [`AnnotationStore`]; readers clone the latest published snapshot.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, put};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;
use swimset_core::model::{FrameRecord, SwimmerClass, TrackId};
use swimset_core::transitions::is_legal_transition;
use swimset_core::validation::AnnotationDraft;
use tokio::sync::{mpsc, oneshot, watch};
use tower_http::services::ServeDir;
use tower_http::trace::TraceLayer;

use crate::config::Config;
use crate::error::PutError;
use crate::store::{AnnotationStore, QueryError, Snapshot};

const QUEUE_DEPTH: usize = 256;

struct PutCommand {
    frame_id: String,
    drafts: Vec<AnnotationDraft>,
    expected_version: u64,
    reply: oneshot::Sender<Result<FrameRecord, PutError>>,
}

/// Cheap-to-clone handle shared by all request handlers.
#[derive(Clone)]
pub struct AppState {
    snapshots: watch::Receiver<Snapshot>,
    writer: mpsc::Sender<PutCommand>,
    config: Arc<Config>,
}

impl AppState {
    /// Moves `store` onto a dedicated writer thread. The thread exits when
    /// every handle has been dropped.
    pub fn start(store: AnnotationStore) -> Self {
        let config = Arc::new(store.config().clone());
        let (snap_tx, snapshots) = watch::channel(store.snapshot());
        let (writer, mut rx) = mpsc::channel::<PutCommand>(QUEUE_DEPTH);
        std::thread::Builder::new()
            .name("annotation-writer".into())
            .spawn(move || {
                let mut store = store;
                while let Some(cmd) = rx.blocking_recv() {
                    let result = store.put_annotations(&cmd.frame_id, &cmd.drafts, cmd.expected_version);
                    if result.is_ok() {
                        snap_tx.send_replace(store.snapshot());
                    }
                    let _ = cmd.reply.send(result);
                }
            })
            .expect("spawn writer thread");
        Self {
            snapshots,
            writer,
            config,
        }
    }

    pub fn snapshot(&self) -> Snapshot {
        self.snapshots.borrow().clone()
    }

    pub fn config(&self) -> &Config {
        &self.config
    }

    /// Queues a write and waits for the writer's verdict.
    pub async fn put(
        &self,
        frame_id: &str,
        drafts: Vec<AnnotationDraft>,
        expected_version: u64,
    ) -> Result<FrameRecord, PutError> {
        let (reply, rx) = oneshot::channel();
        let cmd = PutCommand {
            frame_id: frame_id.to_string(),
            drafts,
            expected_version,
            reply,
        };
        self.writer.send(cmd).await.map_err(|_| PutError::Unavailable)?;
        rx.await.map_err(|_| PutError::Unavailable)?
    }
}

#[derive(Debug)]
pub enum ApiError {
    NotFound(String),
    BadRequest(String),
    Put(PutError),
}

impl From<PutError> for ApiError {
    fn from(e: PutError) -> Self {
        match e {
            PutError::NotFound(id) => ApiError::NotFound(format!("unknown frame `{id}`")),
            other => ApiError::Put(other),
        }
    }
}

impl From<QueryError> for ApiError {
    fn from(e: QueryError) -> Self {
        match e {
            QueryError::UnknownVideo(_) => ApiError::NotFound(e.to_string()),
            QueryError::Core(c) => ApiError::BadRequest(c.to_string()),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, body) = match self {
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, json!({"error": "not_found", "message": m})),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, json!({"error": "bad_request", "message": m})),
            ApiError::Put(e) => {
                let message = e.to_string();
                match e {
                    PutError::Conflict { current_version, .. } => (
                        StatusCode::CONFLICT,
                        json!({"error": "conflict", "message": message, "current_version": current_version}),
                    ),
                    PutError::Invalid(violations) => {
                        let messages: Vec<String> = violations.iter().map(ToString::to_string).collect();
                        (
                            StatusCode::UNPROCESSABLE_ENTITY,
                            json!({"error": "validation", "message": messages.join("; "), "violations": violations}),
                        )
                    }
                    PutError::Unavailable => (
                        StatusCode::SERVICE_UNAVAILABLE,
                        json!({"error": "unavailable", "message": message}),
                    ),
                    PutError::Storage(_) | PutError::NotFound(_) => (
                        StatusCode::INTERNAL_SERVER_ERROR,
                        json!({"error": "storage", "message": message}),
                    ),
                }
            }
        };
        (status, Json(body)).into_response()
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PutRequest {
    pub annotations: Vec<AnnotationDraft>,
    pub expected_version: u64,
}

#[derive(Debug, Deserialize)]
struct NextFrameQuery {
    video_id: String,
    after: Option<u64>,
}

#[derive(Debug, Deserialize)]
struct LegalNextQuery {
    video_id: String,
    frame_index: u64,
}

/// Builds the API router; `images`, when given, is served under `/frames`.
pub fn router(state: AppState, images: Option<PathBuf>) -> Router {
    let api = Router::new()
        .route("/api/videos", get(list_videos))
        .route("/api/frames/{frame_id}", get(get_frame))
        .route("/api/frames/{frame_id}/annotations", put(put_annotations))
        .route("/api/next_frame", get(next_frame))
        .route("/api/progress", get(progress))
        .route("/api/tracks/{track_id}/legal_next", get(legal_next))
        .route("/api/classes", get(classes))
        .route("/api/config", get(config))
        .with_state(state);
    let app = match images {
        Some(dir) => api.nest_service("/frames", ServeDir::new(dir)),
        None => api,
    };
    app.layer(TraceLayer::new_for_http())
}

pub async fn serve(state: AppState, addr: SocketAddr, images: Option<PathBuf>) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state, images))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}

async fn list_videos(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.snapshot().videos())
}

async fn get_frame(State(s): State<AppState>, Path(frame_id): Path<String>) -> Result<Json<FrameRecord>, ApiError> {
    s.snapshot()
        .frame(&frame_id)
        .cloned()
        .map(Json)
        .ok_or_else(|| ApiError::NotFound(format!("unknown frame `{frame_id}`")))
}

async fn put_annotations(
    State(s): State<AppState>,
    Path(frame_id): Path<String>,
    body: Result<Json<PutRequest>, JsonRejection>,
) -> Result<Json<FrameRecord>, ApiError> {
    let Json(req) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    Ok(Json(s.put(&frame_id, req.annotations, req.expected_version).await?))
}

async fn next_frame(
    State(s): State<AppState>,
    Query(q): Query<NextFrameQuery>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let snap = s.snapshot();
    let frame = snap.next_frame(&q.video_id, q.after, s.config())?;
    Ok(Json(json!({ "frame": frame })))
}

async fn progress(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.snapshot().progress(s.config()))
}

async fn legal_next(
    State(s): State<AppState>,
    Path(track_id): Path<String>,
    Query(q): Query<LegalNextQuery>,
) -> Result<impl IntoResponse, ApiError> {
    Ok(Json(s.snapshot().legal_next(
        &q.video_id,
        &TrackId(track_id),
        q.frame_index,
    )?))
}

async fn classes() -> impl IntoResponse {
    let transitions: Vec<[SwimmerClass; 2]> = SwimmerClass::ALL
        .iter()
        .flat_map(|&a| SwimmerClass::ALL.iter().map(move |&b| [a, b]))
        .filter(|[a, b]| is_legal_transition(*a, *b))
        .collect();
    Json(json!({ "classes": SwimmerClass::ALL, "transitions": transitions }))
}

async fn config(State(s): State<AppState>) -> impl IntoResponse {
    Json(s.config().clone())
}
