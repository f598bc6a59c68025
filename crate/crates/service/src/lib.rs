//! HTTP service for live mechanism sessions.
//!
//! Each session is a sequential state machine behind its own lock, so
//! requests to one session are served in arrival order while different
//! sessions run in parallel. With a data directory every mutation is
//! appended to the session's log and sessions are rebuilt by replay at
//! start-up.

pub mod error;
pub mod session;
pub mod store;

use std::collections::HashMap;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{FromRequest, Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::Response;
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use tokio::sync::{Mutex, RwLock};

use sem_core::equilibrium::SolverConfig;

pub use error::ApiError;
use session::{QuoteView, RealizeView, Report, Session, SessionView, TraceView, WhatIf};
use store::Store;

#[derive(Clone, Default)]
pub struct Config {
    /// Requests must carry `Authorization: Bearer <token>` when set.
    pub token: Option<String>,
    pub solver: Option<SolverConfig>,
}

#[derive(Clone)]
pub struct AppState {
    sessions: Arc<RwLock<HashMap<String, Arc<Mutex<Session>>>>>,
    store: Option<Store>,
    config: Arc<Config>,
}

impl AppState {
    pub fn in_memory(config: Config) -> AppState {
        AppState { sessions: Arc::default(), store: None, config: Arc::new(config) }
    }

    /// Opens `dir` and replays every session logged there.
    pub fn persistent(dir: &Path, config: Config) -> Result<AppState, ApiError> {
        let store = Store::open(dir).map_err(|e| ApiError::internal(e.to_string()))?;
        let mut sessions = HashMap::new();
        for log in store.load_all().map_err(|e| ApiError::internal(e.to_string()))? {
            let s = Session::replay(&log)?;
            sessions.insert(s.id().to_string(), Arc::new(Mutex::new(s)));
        }
        Ok(AppState { sessions: Arc::new(RwLock::new(sessions)), store: Some(store), config: Arc::new(config) })
    }

    async fn session(&self, id: &str) -> Result<Arc<Mutex<Session>>, ApiError> {
        self.sessions.read().await.get(id).cloned().ok_or_else(|| ApiError::not_found(id))
    }

    /// Runs `f` on the session on a blocking thread, then persists any log
    /// entries it added.
    async fn with_session<T, F>(&self, id: &str, f: F) -> Result<T, ApiError>
    where
        T: Send + 'static,
        F: FnOnce(&mut Session) -> Result<T, ApiError> + Send + 'static,
    {
        let cell = self.session(id).await?;
        let mut guard = cell.lock_owned().await;
        let store = self.store.clone();
        tokio::task::spawn_blocking(move || {
            let before = guard.log().len();
            let out = f(&mut guard);
            if let Some(store) = store {
                let added = &guard.log()[before..];
                if !added.is_empty() {
                    store.append(guard.id(), added).map_err(|e| ApiError::internal(e.to_string()))?;
                }
            }
            out
        })
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateRequest {
    /// Market document (TOML).
    pub spec: String,
    pub seed: u64,
    #[serde(default)]
    pub id: Option<String>,
}

#[derive(Debug, Deserialize)]
pub struct ArrivalsRequest {
    pub arrivals: Vec<Report>,
}

/// JSON body whose rejections use the service's error format.
struct Body<T>(T);

impl<S: Send + Sync, T: DeserializeOwned> FromRequest<S> for Body<T> {
    type Rejection = ApiError;

    async fn from_request(req: Request, state: &S) -> Result<Self, ApiError> {
        Json::<T>::from_request(req, state).await.map(|Json(v)| Body(v)).map_err(|e| ApiError::bad_request(e.body_text()))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(show))
        .route("/sessions/{id}/arrivals", post(arrivals))
        .route("/sessions/{id}/realize", post(realize))
        .route("/sessions/{id}/whatif", post(whatif))
        .route("/sessions/{id}/trace", get(trace))
        .layer(middleware::from_fn_with_state(state.clone(), auth))
        .with_state(state)
}

async fn auth(State(state): State<AppState>, req: Request, next: Next) -> Result<Response, ApiError> {
    if let Some(token) = &state.config.token {
        let given = req.headers().get(header::AUTHORIZATION).and_then(|v| v.to_str().ok()).and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return Err(ApiError::unauthorized());
        }
    }
    Ok(next.run(req).await)
}

async fn create(State(state): State<AppState>, Body(req): Body<CreateRequest>) -> Result<(StatusCode, Json<SessionView>), ApiError> {
    let id = req.id.unwrap_or_else(|| uuid::Uuid::new_v4().to_string());
    if id.is_empty() || !id.chars().all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_') {
        return Err(ApiError::bad_request("id must be non-empty and use only letters, digits, `-` and `_`"));
    }
    let solver = state.config.solver.clone().unwrap_or_else(SolverConfig::precise);
    let mut sessions = state.sessions.write().await;
    if sessions.contains_key(&id) {
        return Err(ApiError::duplicate(&id));
    }
    let (spec, seed, sid) = (req.spec, req.seed, id.clone());
    let session = tokio::task::spawn_blocking(move || Session::create(sid, &spec, seed, solver))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))??;
    if let Some(store) = &state.store {
        store.append(&id, session.log()).map_err(|e| ApiError::internal(e.to_string()))?;
    }
    let view = session.view();
    sessions.insert(id, Arc::new(Mutex::new(session)));
    Ok((StatusCode::CREATED, Json(view)))
}

async fn show(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionView>, ApiError> {
    state.with_session(&id, |s| Ok(s.view())).await.map(Json)
}

async fn arrivals(State(state): State<AppState>, UrlPath(id): UrlPath<String>, Body(req): Body<ArrivalsRequest>) -> Result<Json<QuoteView>, ApiError> {
    state.with_session(&id, move |s| s.post_arrivals(req.arrivals)).await.map(Json)
}

async fn realize(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<RealizeView>, ApiError> {
    state.with_session(&id, |s| s.realize()).await.map(Json)
}

async fn whatif(State(state): State<AppState>, UrlPath(id): UrlPath<String>, Body(req): Body<WhatIf>) -> Result<Json<QuoteView>, ApiError> {
    state.with_session(&id, move |s| s.whatif(&req)).await.map(Json)
}

async fn trace(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<TraceView>, ApiError> {
    state.with_session(&id, |s| Ok(s.trace())).await.map(Json)
}

/// Serves until the process is stopped.
pub async fn serve(addr: std::net::SocketAddr, state: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    axum::serve(listener, router(state)).await
}
