//! HTTP service over the verification engine: cases, runs, graphs,
//! contestation sessions, escalation and reports, backed by a document store.

pub mod api;
pub mod config;
pub mod error;
pub mod middleware;
pub mod state;
pub mod store;

use std::future::Future;
use std::sync::Arc;

use axum::extract::DefaultBodyLimit;
use axum::http::{header, HeaderName, HeaderValue, Method};
use axum::routing::{get, post};
use axum::Router;
use thiserror::Error;
use tokio::net::TcpListener;
use tower_http::cors::{AllowOrigin, CorsLayer};

pub use config::{ProviderMode, ServiceConfig};
pub use error::ApiError;
pub use state::AppState;
pub use store::{FsStore, MemStore, RecordKind, Store, StoreRecord};

#[derive(Debug, Error)]
pub enum ServeError {
    #[error(transparent)]
    Store(#[from] store::StoreError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("invalid ui_origin `{0}`")]
    Origin(String),
}

/// Builds the router with auth and CORS set from `config`.
pub fn app(state: Arc<AppState>, config: &ServiceConfig) -> Result<Router, ServeError> {
    let mut router = Router::new()
        .route("/health", get(api::health))
        .route("/cases", post(api::create_case))
        .route("/cases/{id}", get(api::get_case))
        .route("/cases/{id}/verify", post(api::verify))
        .route("/cases/{id}/result", get(api::get_result))
        .route("/cases/{id}/graphs/{kind}", get(api::get_graph))
        .route("/cases/{id}/sessions", post(api::create_session))
        .route("/cases/{id}/escalate/{kind}", post(api::escalate))
        .route("/cases/{id}/report", get(api::report))
        .route("/sessions/{id}", get(api::get_session))
        .route("/sessions/{id}/actions", post(api::post_action))
        .layer(axum::middleware::from_fn_with_state(state.clone(), middleware::idempotency))
        .layer(DefaultBodyLimit::max(middleware::MAX_BODY_BYTES));
    if let Some(token) = config.api_token.as_deref().filter(|t| !t.is_empty()) {
        router = router.layer(axum::middleware::from_fn_with_state(Arc::<str>::from(token), middleware::require_token));
    }
    if let Some(origin) = &config.ui_origin {
        let origin = HeaderValue::from_str(origin).map_err(|_| ServeError::Origin(origin.clone()))?;
        router = router.layer(
            CorsLayer::new()
                .allow_origin(AllowOrigin::list([origin]))
                .allow_methods([Method::GET, Method::POST, Method::OPTIONS])
                .allow_headers([header::CONTENT_TYPE, header::AUTHORIZATION, HeaderName::from_static(middleware::IDEMPOTENCY_HEADER)])
                .expose_headers([HeaderName::from_static(middleware::REPLAYED_HEADER)]),
        );
    }
    Ok(router.with_state(state))
}

/// Serves on an already bound listener until `shutdown` resolves.
pub async fn serve_on(
    listener: TcpListener,
    config: ServiceConfig,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServeError> {
    let state = Arc::new(AppState::new(config.open_store()?, config.providers.build(), config.pipeline.clone()));
    let router = app(state, &config)?;
    tracing::info!(addr = %listener.local_addr()?, providers = ?config.providers.mode, "listening");
    axum::serve(listener, router).with_graceful_shutdown(shutdown).await?;
    Ok(())
}

pub async fn serve(config: ServiceConfig, shutdown: impl Future<Output = ()> + Send + 'static) -> Result<(), ServeError> {
    let listener = TcpListener::bind(&config.listen).await?;
    serve_on(listener, config, shutdown).await
}
