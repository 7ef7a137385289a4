//! HTTP administration service over one policy document.
//!
//! All mutations go through a single write lock, so the admitted log always
//! equals the result of some serial order of the requests. Both matrices are
//! recomputed on every mutation; reads never recompute and never bump the
//! revision.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;

use axum::extract::{Path, Query, State};
use axum::http::{HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use parking_lot::RwLock;
use precedent_core::io::MatrixFormat;
use precedent_core::{
    diff_matrices, explain_cell, interpolate, serialize_matrix, serialize_policy, AccessMatrix, Admission, CellDiff,
    Choice, CollisionRecord, CollisionStrategy, EntityId, Explanation, Mode, PolicyDocument, PrecedentDecl,
    PrecedentLog, Universe,
};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tower_http::cors::{AllowOrigin, Any, CorsLayer};

#[derive(Debug, thiserror::Error)]
pub enum ServiceError {
    #[error(transparent)]
    Core(#[from] precedent_core::Error),
    #[error("writing {path}: {source}")]
    Persist {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// Everything the service knows at one revision.
struct Session {
    doc: PolicyDocument,
    universe: Universe,
    log: PrecedentLog,
    revision: u64,
    partial: Arc<AccessMatrix>,
    sequential: Arc<AccessMatrix>,
}

impl Session {
    fn matrix(&self, mode: Mode) -> Arc<AccessMatrix> {
        match mode {
            Mode::Partial => Arc::clone(&self.partial),
            Mode::Sequential => Arc::clone(&self.sequential),
        }
    }

    fn recompute(&mut self) -> Result<(), precedent_core::Error> {
        let rules = self.log.admitted_rules();
        let depth = self.doc.settings.dominance_depth;
        self.partial = Arc::new(interpolate(&self.universe, &rules, Mode::Partial, depth)?);
        self.sequential = Arc::new(interpolate(&self.universe, &rules, Mode::Sequential, depth)?);
        Ok(())
    }

    /// The document as it should be persisted: admitted precedents only.
    fn current_document(&self) -> PolicyDocument {
        self.doc.with_precedents(self.log.admitted().iter().map(|p| &p.rule))
    }
}

pub struct AppState {
    session: RwLock<Session>,
    persist_to: Option<PathBuf>,
}

impl AppState {
    /// Loads a document, admitting its precedents under the declared strategy.
    pub fn new(doc: PolicyDocument, persist_to: Option<PathBuf>) -> Result<Self, ServiceError> {
        let universe = doc.universe()?;
        let (log, _) = doc.build_log(&universe, doc.settings.collision_strategy)?;
        let empty = Arc::new(interpolate(&universe, &[], Mode::Partial, doc.settings.dominance_depth)?);
        let mut session = Session {
            doc,
            universe,
            log,
            revision: 1,
            partial: Arc::clone(&empty),
            sequential: empty,
        };
        session.recompute()?;
        Ok(AppState {
            session: RwLock::new(session),
            persist_to,
        })
    }

    pub fn revision(&self) -> u64 {
        self.session.read().revision
    }

    pub fn document(&self) -> PolicyDocument {
        self.session.read().current_document()
    }

    /// Writes the admitted log back to the policy file, if one is attached.
    pub fn persist(&self) -> Result<(), ServiceError> {
        let doc = self.document();
        self.write(&doc)
    }

    fn write(&self, doc: &PolicyDocument) -> Result<(), ServiceError> {
        let Some(path) = &self.persist_to else {
            return Ok(());
        };
        let tmp = path.with_extension("json.tmp");
        let err = |source| ServiceError::Persist {
            path: path.clone(),
            source,
        };
        std::fs::write(&tmp, serialize_policy(doc)).map_err(err)?;
        std::fs::rename(&tmp, path).map_err(err)
    }
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: serde_json::Value,
}

impl ApiError {
    fn new(status: StatusCode, message: impl ToString) -> Self {
        ApiError {
            status,
            body: json!({ "error": message.to_string() }),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

fn parse_mode(raw: Option<&str>, default: Mode) -> Result<Mode, ApiError> {
    match raw {
        None => Ok(default),
        Some(s) => s.parse().map_err(|e: String| ApiError::new(StatusCode::BAD_REQUEST, e)),
    }
}

#[derive(Deserialize)]
struct ModeQuery {
    mode: Option<String>,
}

#[derive(Serialize)]
struct MatrixResponse<'a> {
    revision: u64,
    mode: Mode,
    counts: precedent_core::interpolate::MatrixCounts,
    table: String,
    matrix: &'a AccessMatrix,
}

async fn get_matrix(State(state): State<Arc<AppState>>, Query(q): Query<ModeQuery>) -> Result<Response, ApiError> {
    let session = state.session.read();
    let mode = parse_mode(q.mode.as_deref(), session.doc.settings.mode)?;
    let matrix = session.matrix(mode);
    Ok(Json(MatrixResponse {
        revision: session.revision,
        mode,
        counts: matrix.counts(),
        table: serialize_matrix(&matrix, MatrixFormat::Table),
        matrix: &matrix,
    })
    .into_response())
}

#[derive(Deserialize)]
struct ExplainQuery {
    subject: String,
    object: String,
    mode: Option<String>,
}

#[derive(Serialize)]
struct ExplainResponse {
    revision: u64,
    explanation: Explanation,
}

async fn get_explain(
    State(state): State<Arc<AppState>>,
    Query(q): Query<ExplainQuery>,
) -> Result<Json<ExplainResponse>, ApiError> {
    let session = state.session.read();
    let mode = parse_mode(q.mode.as_deref(), session.doc.settings.mode)?;
    let matrix = session.matrix(mode);
    let (subject, object) = (EntityId(q.subject), EntityId(q.object));
    // Members of an equivalence class are explained through their representative.
    let not_found = |kind: &str, id: &EntityId| ApiError::new(StatusCode::NOT_FOUND, format!("unknown {kind} `{id}`"));
    let s = session
        .universe
        .representative(precedent_core::EntityKind::Subject, &subject)
        .ok_or_else(|| not_found("subject", &subject))?;
    let o = session
        .universe
        .representative(precedent_core::EntityKind::Object, &object)
        .ok_or_else(|| not_found("object", &object))?;
    let explanation = explain_cell(&matrix, s, o).map_err(|e| ApiError::new(StatusCode::NOT_FOUND, e))?;
    Ok(Json(ExplainResponse {
        revision: session.revision,
        explanation,
    }))
}

async fn get_policy(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    let session = state.session.read();
    Json(json!({
        "revision": session.revision,
        "document": session.current_document(),
        "pending": session.log.pending().collect::<Vec<_>>(),
    }))
}

async fn get_audit(State(state): State<Arc<AppState>>) -> Response {
    let session = state.session.read();
    let text = precedent_core::export_audit(&session.log);
    (
        [(axum::http::header::CONTENT_TYPE, "application/json")],
        text,
    )
        .into_response()
}

#[derive(Serialize)]
struct CollisionsResponse {
    revision: u64,
    collisions: Vec<CollisionRecord>,
}

async fn get_collisions(State(state): State<Arc<AppState>>) -> Json<CollisionsResponse> {
    let session = state.session.read();
    Json(CollisionsResponse {
        revision: session.revision,
        collisions: session.log.collisions().to_vec(),
    })
}

/// Applies a mutation under the write lock; on success bumps the revision,
/// recomputes the matrices and writes the document through.
fn mutate<T>(
    state: &AppState,
    f: impl FnOnce(&mut PrecedentLog, &Universe) -> Result<T, ApiError>,
) -> Result<(T, u64), ApiError> {
    let mut session = state.session.write();
    let mut log = session.log.clone();
    let value = f(&mut log, &session.universe)?;
    session.log = log;
    session.revision += 1;
    session
        .recompute()
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    let doc = session.current_document();
    state
        .write(&doc)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    Ok((value, session.revision))
}

async fn post_precedent(State(state): State<Arc<AppState>>, Json(body): Json<PrecedentDecl>) -> Response {
    let rule = match body.to_rule() {
        Ok(rule) => rule,
        Err(e) => return ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e).into_response(),
    };
    let result = mutate(&state, |log, universe| {
        log.apply(universe, &rule)
            .map_err(|e| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e))
    });
    match result {
        Err(e) => e.into_response(),
        Ok((admission, revision)) => {
            let status = match &admission {
                Admission::Admitted { .. } => StatusCode::OK,
                Admission::Rejected { .. } => StatusCode::CONFLICT,
                Admission::Pending { .. } => StatusCode::ACCEPTED,
            };
            let mut body = serde_json::to_value(&admission).expect("admission serializes");
            body["revision"] = json!(revision);
            (status, Json(body)).into_response()
        }
    }
}

#[derive(Deserialize)]
struct ResolutionBody {
    choice: Choice,
}

async fn post_resolution(
    State(state): State<Arc<AppState>>,
    Path(id): Path<u64>,
    Json(body): Json<ResolutionBody>,
) -> Result<Json<serde_json::Value>, ApiError> {
    let (admitted, revision) = mutate(&state, |log, _| {
        log.resolve(id, body.choice).map_err(|e| match e {
            precedent_core::Error::UnknownCollision(_) => ApiError::new(StatusCode::NOT_FOUND, e),
            _ => ApiError::new(StatusCode::CONFLICT, e),
        })
    })?;
    Ok(Json(json!({ "revision": revision, "collision_id": id, "admitted": admitted })))
}

#[derive(Deserialize)]
struct WhatIfBody {
    #[serde(default)]
    precedents: Vec<PrecedentDecl>,
    mode: Option<String>,
}

#[derive(Serialize)]
struct WhatIfResponse {
    revision: u64,
    mode: Mode,
    diff: Vec<CellDiff>,
}

async fn post_whatif(
    State(state): State<Arc<AppState>>,
    Json(body): Json<WhatIfBody>,
) -> Result<Json<WhatIfResponse>, ApiError> {
    let session = state.session.read();
    let mode = parse_mode(body.mode.as_deref(), session.doc.settings.mode)?;
    let invalid = |e: precedent_core::Error| ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, e);
    let mut sandbox = PrecedentLog::new(CollisionStrategy::OverwriteOld);
    for rule in session.log.admitted_rules() {
        sandbox.apply(&session.universe, &rule).map_err(invalid)?;
    }
    for decl in &body.precedents {
        let rule = decl.to_rule().map_err(invalid)?;
        sandbox.apply(&session.universe, &rule).map_err(invalid)?;
    }
    let hypothetical = interpolate(
        &session.universe,
        &sandbox.admitted_rules(),
        mode,
        session.doc.settings.dominance_depth,
    )
    .map_err(invalid)?;
    let diff = diff_matrices(&session.matrix(mode), &hypothetical)
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, e))?;
    Ok(Json(WhatIfResponse {
        revision: session.revision,
        mode,
        diff,
    }))
}

/// The service routes. `cors_origin = None` allows any origin.
pub fn router(state: Arc<AppState>, cors_origin: Option<HeaderValue>) -> Router {
    let origin = match cors_origin {
        Some(origin) => AllowOrigin::exact(origin),
        None => AllowOrigin::any(),
    };
    let cors = CorsLayer::new().allow_origin(origin).allow_methods(Any).allow_headers(Any);
    Router::new()
        .route("/matrix", get(get_matrix))
        .route("/explain", get(get_explain))
        .route("/policy", get(get_policy))
        .route("/audit", get(get_audit))
        .route("/collisions", get(get_collisions))
        .route("/precedents", post(post_precedent))
        .route("/collisions/{id}/resolution", post(post_resolution))
        .route("/whatif", post(post_whatif))
        .layer(cors)
        .with_state(state)
}

/// Serves until `shutdown` completes, then persists the admitted log.
pub async fn serve(
    state: Arc<AppState>,
    listener: tokio::net::TcpListener,
    cors_origin: Option<HeaderValue>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let addr: Option<SocketAddr> = listener.local_addr().ok();
    tracing::info!(?addr, "policy service listening");
    axum::serve(listener, router(Arc::clone(&state), cors_origin))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|source| ServiceError::Persist {
            path: PathBuf::from("<listener>"),
            source,
        })?;
    state.persist()
}
