//! HTTP routes.
//!
//! * `POST /v1/submissions`: multipart with a `metadata` JSON part and a
//!   `predictions` JSONL part; optional `Idempotency-Key` header; requires
//!   `Authorization: Bearer <token>` when the server has a token.
//! * `GET /v1/leaderboard/{dataset}?condition=`
//! * `GET /v1/submissions/{id}`
//! * `GET /v1/compare?ids=a,b,c` (model names)
//! * `GET /v1/datasets`

use std::net::SocketAddr;
use std::sync::Arc;

use axum::extract::{DefaultBodyLimit, Multipart, Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};

use emokit::scoring::ScoringError;

use crate::{Leaderboard, LeaderboardError, SubmissionMeta};

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
const BODY_LIMIT: usize = 64 * 1024 * 1024;

struct AppState {
    board: Leaderboard,
    token: Option<String>,
}

impl LeaderboardError {
    fn status(&self) -> StatusCode {
        use LeaderboardError::*;
        match self {
            Unauthorized => StatusCode::UNAUTHORIZED,
            UnknownDataset(_) | UnknownCondition { .. } | UnknownSubmission(_) | UnknownModel(_) => StatusCode::NOT_FOUND,
            BadRequest(_) => StatusCode::BAD_REQUEST,
            IdempotencyConflict(_) => StatusCode::CONFLICT,
            Scoring(ScoringError::MissingGold(_)) => StatusCode::INTERNAL_SERVER_ERROR,
            Scoring(_) | Predictions(_) => StatusCode::UNPROCESSABLE_ENTITY,
            Setup(_) | Io(_) | Json(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    /// Machine-readable error body. Gold-side details stay on the server.
    pub fn body(&self) -> Value {
        use LeaderboardError::*;
        let (code, ids): (&str, Option<&Vec<String>>) = match self {
            Unauthorized => ("unauthorized", None),
            UnknownDataset(_) => ("unknown_dataset", None),
            UnknownCondition { .. } => ("unknown_condition", None),
            UnknownSubmission(_) => ("unknown_submission", None),
            UnknownModel(ids) => ("unknown_model", Some(ids)),
            BadRequest(_) => ("bad_request", None),
            IdempotencyConflict(_) => ("idempotency_conflict", None),
            Scoring(e) => match e {
                ScoringError::MissingPredictions(ids) => ("missing_predictions", Some(ids)),
                ScoringError::UnexpectedPredictions(ids) => ("unexpected_predictions", Some(ids)),
                ScoringError::WrongDimension { .. } => ("wrong_dimension", None),
                ScoringError::NotMultiHot(_) => ("not_multi_hot", None),
                ScoringError::UnknownFold(_) => ("unknown_fold", None),
                ScoringError::FoldWithoutPlan => ("fold_without_plan", None),
                ScoringError::MissingGold(_) | ScoringError::BadGold(_) | ScoringError::NoFolds => {
                    return json!({"error": {"code": "internal", "message": "gold data is inconsistent"}})
                }
            },
            Predictions(_) => ("invalid_predictions", None),
            Setup(_) | Io(_) | Json(_) => {
                return json!({"error": {"code": "internal", "message": "internal error"}});
            }
        };
        let mut err = json!({"code": code, "message": self.to_string()});
        if let Some(ids) = ids {
            err["ids"] = json!(ids);
        }
        json!({ "error": err })
    }
}

impl IntoResponse for LeaderboardError {
    fn into_response(self) -> Response {
        if self.status().is_server_error() {
            log::error!("{self}");
        }
        (self.status(), Json(self.body())).into_response()
    }
}

pub fn router(board: Leaderboard, token: Option<String>) -> Router {
    let state = Arc::new(AppState { board, token });
    Router::new()
        .route("/v1/submissions", post(submit))
        .route("/v1/submissions/:id", get(get_submission))
        .route("/v1/leaderboard/:dataset", get(leaderboard))
        .route("/v1/compare", get(compare))
        .route("/v1/datasets", get(datasets))
        .layer(DefaultBodyLimit::max(BODY_LIMIT))
        .with_state(state)
}

pub async fn serve(addr: SocketAddr, board: Leaderboard, token: Option<String>) -> std::io::Result<()> {
    if token.is_none() {
        log::warn!("no API token configured; submissions are unauthenticated");
    }
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(board, token)).await
}

fn authorize(state: &AppState, headers: &HeaderMap) -> Result<(), LeaderboardError> {
    let Some(expected) = &state.token else { return Ok(()) };
    let given = headers
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    match given {
        Some(t) if t.len() == expected.len() && t.bytes().zip(expected.bytes()).fold(0, |a, (x, y)| a | (x ^ y)) == 0 => Ok(()),
        _ => Err(LeaderboardError::Unauthorized),
    }
}

async fn submit(
    State(state): State<Arc<AppState>>,
    headers: HeaderMap,
    mut multipart: Multipart,
) -> Result<Response, LeaderboardError> {
    authorize(&state, &headers)?;
    let key = match headers.get(IDEMPOTENCY_HEADER) {
        Some(v) => Some(
            v.to_str()
                .map_err(|_| LeaderboardError::BadRequest("Idempotency-Key is not valid text".into()))?
                .to_string(),
        ),
        None => None,
    };
    let mut meta: Option<SubmissionMeta> = None;
    let mut predictions: Option<Vec<u8>> = None;
    while let Some(field) = multipart
        .next_field()
        .await
        .map_err(|e| LeaderboardError::BadRequest(e.to_string()))?
    {
        let name = field.name().unwrap_or_default().to_string();
        let bytes = field.bytes().await.map_err(|e| LeaderboardError::BadRequest(e.to_string()))?;
        match name.as_str() {
            "metadata" => {
                meta = Some(
                    serde_json::from_slice(&bytes).map_err(|e| LeaderboardError::BadRequest(format!("metadata: {e}")))?,
                )
            }
            "predictions" => predictions = Some(bytes.to_vec()),
            other => return Err(LeaderboardError::BadRequest(format!("unexpected part {other:?}"))),
        }
    }
    let meta = meta.ok_or_else(|| LeaderboardError::BadRequest("missing metadata part".into()))?;
    let predictions = predictions.ok_or_else(|| LeaderboardError::BadRequest("missing predictions part".into()))?;

    let st = state.clone();
    let outcome = tokio::task::spawn_blocking(move || st.board.submit(meta, &predictions, key.as_deref()))
        .await
        .map_err(|e| LeaderboardError::Setup(e.to_string()))??;
    let status = if outcome.created { StatusCode::CREATED } else { StatusCode::OK };
    Ok((status, Json(outcome.submission)).into_response())
}

async fn get_submission(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> Result<Response, LeaderboardError> {
    Ok(Json(state.board.get(&id)?).into_response())
}

#[derive(Deserialize)]
struct LeaderboardQuery {
    condition: Option<String>,
}

async fn leaderboard(
    State(state): State<Arc<AppState>>,
    Path(dataset): Path<String>,
    Query(q): Query<LeaderboardQuery>,
) -> Result<Response, LeaderboardError> {
    let rows = state.board.rankings(&dataset, q.condition.as_deref())?;
    Ok(Json(json!({"dataset": dataset, "condition": q.condition, "rows": rows})).into_response())
}

#[derive(Deserialize)]
struct CompareQuery {
    ids: String,
}

async fn compare(State(state): State<Arc<AppState>>, Query(q): Query<CompareQuery>) -> Result<Response, LeaderboardError> {
    let ids: Vec<String> = q.ids.split(',').map(str::trim).filter(|s| !s.is_empty()).map(String::from).collect();
    Ok(Json(state.board.compare(&ids)?).into_response())
}

async fn datasets(State(state): State<Arc<AppState>>) -> Json<Value> {
    let list: Vec<Value> = state
        .board
        .registry()
        .datasets()
        .map(|(d, conds)| json!({"dataset": d, "conditions": conds}))
        .collect();
    Json(json!({ "datasets": list }))
}
