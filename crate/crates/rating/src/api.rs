use std::path::PathBuf;
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::{Path, Query, State};
use axum::http::header;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::{Json, Router};
use dsa_territory::io::{load_mask, load_minip};
use dsa_territory::report::CohortManifest;
use dsa_territory::Method;
use serde::{Deserialize, Serialize};

use crate::composite::composite_png;
use crate::error::ServiceError;
use crate::model::{ConsensusRecord, Event, LikertRating, RUBRIC, SCHEMA_VERSION};
use crate::session::{plan_session, PendingItem, Results};
use crate::store::Store;

type ApiResult<T> = Result<Json<T>, ServiceError>;

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

fn default_methods() -> Vec<Method> {
    vec![Method::Model, Method::Atlas]
}
fn default_true() -> bool {
    true
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CreateSession {
    /// Manifest file; its directory is the base for relative paths.
    #[serde(default)]
    pub manifest_path: Option<PathBuf>,
    /// Inline manifest, resolved against `base_dir`.
    #[serde(default)]
    pub manifest: Option<CohortManifest>,
    #[serde(default)]
    pub base_dir: Option<PathBuf>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub raters: Vec<String>,
    pub adjudicator: String,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_true")]
    pub blinded: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionCreated {
    pub schema_version: u32,
    pub session_id: String,
    /// Items in enumeration order.
    pub items: Vec<String>,
    pub raters: Vec<String>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RaterItem {
    pub item_id: String,
    pub position: usize,
    pub image_url: String,
    pub score: Option<u8>,
    /// Only present when the session is not blinded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub method: Option<Method>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Progress {
    pub rated: usize,
    pub total: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RaterItems {
    pub schema_version: u32,
    pub session_id: String,
    pub rater: String,
    pub rubric: Vec<String>,
    pub progress: Progress,
    pub items: Vec<RaterItem>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmitRating {
    pub item_id: String,
    pub rater_id: String,
    /// Wide integer so out-of-range input reaches validation.
    pub score: i64,
    #[serde(default)]
    pub timestamp: Option<u64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RatingAck {
    pub schema_version: u32,
    pub item_id: String,
    pub rater_id: String,
    pub score: u8,
    /// 1 for the first submission, 2 for the first revision, ...
    pub revision: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsensusView {
    pub schema_version: u32,
    pub session_id: String,
    pub pending: Vec<PendingItem>,
    pub finalized: Vec<ConsensusRecord>,
    /// Items not yet rated by both raters.
    pub incomplete: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SubmitConsensus {
    pub item_id: String,
    pub adjudicator: String,
    pub score: i64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ConsensusAck {
    pub schema_version: u32,
    #[serde(flatten)]
    pub record: ConsensusRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct AuditView {
    pub schema_version: u32,
    pub item_id: String,
    pub ratings: Vec<LikertRating>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RubricView {
    pub schema_version: u32,
    pub rubric: Vec<String>,
}

fn score_u8(score: i64) -> Result<u8, ServiceError> {
    if (0..=3).contains(&score) {
        Ok(score as u8)
    } else {
        Err(ServiceError::ScoreOutOfRange(score.clamp(0, 255) as u8))
    }
}

async fn create_session(State(store): State<Arc<Store>>, Json(req): Json<CreateSession>) -> ApiResult<SessionCreated> {
    let (manifest, base) = match (&req.manifest_path, req.manifest) {
        (Some(path), None) => {
            let base = path.parent().map(PathBuf::from).unwrap_or_default();
            (CohortManifest::load(path)?, base)
        }
        (None, Some(m)) => (m, req.base_dir.clone().unwrap_or_default()),
        _ => {
            return Err(ServiceError::BadRequest(
                "give exactly one of manifest_path and manifest".into(),
            ))
        }
    };
    let session = store.create(|id| {
        plan_session(
            id,
            &manifest,
            &base,
            &req.methods,
            req.raters.clone(),
            req.adjudicator.clone(),
            req.seed,
            req.blinded,
        )
    })?;
    Ok(Json(SessionCreated {
        schema_version: SCHEMA_VERSION,
        session_id: session.id.clone(),
        items: session.items.iter().map(|it| it.item_id.clone()).collect(),
        raters: session.raters.clone(),
    }))
}

#[derive(Deserialize)]
struct RaterQuery {
    rater: String,
}

async fn rater_items(
    State(store): State<Arc<Store>>,
    Path(id): Path<String>,
    Query(q): Query<RaterQuery>,
) -> ApiResult<RaterItems> {
    let session = store.get(&id)?;
    let order = session.order_for(&q.rater)?;
    let items: Vec<RaterItem> = order
        .into_iter()
        .enumerate()
        .map(|(i, it)| RaterItem {
            item_id: it.item_id.clone(),
            position: i + 1,
            image_url: format!("/items/{}/image", it.item_id),
            score: session.latest(&it.item_id, &q.rater),
            method: (!session.blinded).then_some(it.method),
        })
        .collect();
    Ok(Json(RaterItems {
        schema_version: SCHEMA_VERSION,
        session_id: session.id.clone(),
        rater: q.rater,
        rubric: RUBRIC.iter().map(|s| s.to_string()).collect(),
        progress: Progress {
            rated: items.iter().filter(|i| i.score.is_some()).count(),
            total: items.len(),
        },
        items,
    }))
}

#[derive(Deserialize)]
struct ImageQuery {
    #[serde(default = "default_true")]
    overlay: bool,
}

async fn item_image(
    State(store): State<Arc<Store>>,
    Path(item_id): Path<String>,
    Query(q): Query<ImageQuery>,
) -> Result<impl IntoResponse, ServiceError> {
    let session = store.find_item(&item_id)?;
    let item = session.item(&item_id)?.clone();
    let png = tokio::task::spawn_blocking(move || -> Result<Vec<u8>, ServiceError> {
        let minip = load_minip(&item.minip)?;
        let mask = if q.overlay { Some(load_mask(&item.overlay)?) } else { None };
        Ok(composite_png(&minip, mask.as_ref()))
    })
    .await
    .map_err(|e| ServiceError::BadRequest(e.to_string()))??;
    Ok(([(header::CONTENT_TYPE, "image/png")], png))
}

async fn submit_rating(State(store): State<Arc<Store>>, Json(req): Json<SubmitRating>) -> ApiResult<RatingAck> {
    let score = score_u8(req.score)?;
    let session = store.find_item(&req.item_id)?;
    let rating = LikertRating {
        item_id: req.item_id.clone(),
        rater_id: req.rater_id.clone(),
        score,
        timestamp: req.timestamp.unwrap_or_else(now_ms),
    };
    let session = store.append(&session.id, Event::Rating(rating))?;
    let revision = session
        .audit(&req.item_id)
        .iter()
        .filter(|r| r.rater_id == req.rater_id)
        .count();
    Ok(Json(RatingAck {
        schema_version: SCHEMA_VERSION,
        item_id: req.item_id,
        rater_id: req.rater_id,
        score,
        revision,
    }))
}

async fn item_audit(State(store): State<Arc<Store>>, Path(item_id): Path<String>) -> ApiResult<AuditView> {
    let session = store.find_item(&item_id)?;
    session.item(&item_id)?;
    Ok(Json(AuditView {
        schema_version: SCHEMA_VERSION,
        ratings: session.audit(&item_id).into_iter().cloned().collect(),
        item_id,
    }))
}

async fn consensus_view(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<ConsensusView> {
    let session = store.get(&id)?;
    let pending = session.pending();
    let finalized = session.finalized();
    Ok(Json(ConsensusView {
        schema_version: SCHEMA_VERSION,
        session_id: session.id.clone(),
        incomplete: session.items.len() - finalized.len() - pending.len(),
        pending,
        finalized,
    }))
}

async fn submit_consensus(
    State(store): State<Arc<Store>>,
    Json(req): Json<SubmitConsensus>,
) -> ApiResult<ConsensusAck> {
    let score = score_u8(req.score)?;
    let session = store.find_item(&req.item_id)?;
    let session = store.append(
        &session.id,
        Event::Consensus {
            item_id: req.item_id.clone(),
            adjudicator: req.adjudicator,
            score,
            timestamp: now_ms(),
        },
    )?;
    let record = session.consensus(&req.item_id).expect("adjudicated item is final");
    Ok(Json(ConsensusAck {
        schema_version: SCHEMA_VERSION,
        record,
    }))
}

async fn results(State(store): State<Arc<Store>>, Path(id): Path<String>) -> ApiResult<Results> {
    Ok(Json(store.get(&id)?.results()?))
}

async fn rubric() -> Json<RubricView> {
    Json(RubricView {
        schema_version: SCHEMA_VERSION,
        rubric: RUBRIC.iter().map(|s| s.to_string()).collect(),
    })
}

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/rubric", get(rubric))
        .route("/sessions", post(create_session))
        .route("/sessions/{id}/items", get(rater_items))
        .route("/sessions/{id}/consensus", get(consensus_view))
        .route("/sessions/{id}/results", get(results))
        .route("/items/{id}/image", get(item_image))
        .route("/items/{id}/audit", get(item_audit))
        .route("/ratings", post(submit_rating))
        .route("/consensus", post(submit_consensus))
        .with_state(store)
}

/// Serves the API on `addr` until the process is stopped.
pub async fn serve(store: Arc<Store>, addr: std::net::SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(store)).await
}
