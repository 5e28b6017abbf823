//! Bearer-token check and `Idempotency-Key` replay.

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use argverify_core::canonical;
use axum::body::{Body, Bytes};
use axum::extract::{Request, State};
use axum::http::{HeaderMap, HeaderValue, Method, StatusCode};
use axum::middleware::Next;
use axum::response::{IntoResponse, Response};

use crate::error::ApiError;
use crate::state::AppState;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";
pub const REPLAYED_HEADER: &str = "idempotent-replayed";
pub const MAX_BODY_BYTES: usize = 16 * 1024 * 1024;

pub async fn require_token(State(token): State<Arc<str>>, req: Request, next: Next) -> Response {
    let ok = req
        .headers()
        .get(axum::http::header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "))
        .is_some_and(|t| t == &*token);
    if ok || req.method() == Method::OPTIONS {
        next.run(req).await
    } else {
        ApiError::new(StatusCode::UNAUTHORIZED, "Unauthorized", "missing or wrong bearer token").into_response()
    }
}

#[derive(Debug, Clone)]
enum Entry {
    InFlight { request_digest: String },
    Done { request_digest: String, status: StatusCode, headers: HeaderMap, body: Bytes },
}

#[derive(Debug, Default)]
pub struct IdempotencyCache {
    entries: Mutex<HashMap<String, Entry>>,
}

/// A POST carrying an `Idempotency-Key` runs once; a retry with the same key
/// and body gets the recorded response. 5xx responses are not recorded so
/// they can be retried.
pub async fn idempotency(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    if req.method() != Method::POST {
        return next.run(req).await;
    }
    let Some(key) = req.headers().get(IDEMPOTENCY_HEADER).and_then(|v| v.to_str().ok()).map(str::to_owned) else {
        return next.run(req).await;
    };
    let scope = format!("{} {} {}", req.method(), req.uri().path(), key);
    let (parts, body) = req.into_parts();
    let bytes = match axum::body::to_bytes(body, MAX_BODY_BYTES).await {
        Ok(b) => b,
        Err(e) => return ApiError::new(StatusCode::PAYLOAD_TOO_LARGE, "BodyTooLarge", e.to_string()).into_response(),
    };
    let request_digest = canonical::digest_bytes(&bytes);
    {
        let mut entries = state.idempotency.entries.lock().unwrap();
        match entries.get(&scope) {
            Some(Entry::Done { request_digest: d, status, headers, body }) if *d == request_digest => {
                let mut resp = (*status, headers.clone(), body.clone()).into_response();
                resp.headers_mut().insert(REPLAYED_HEADER, HeaderValue::from_static("true"));
                return resp;
            }
            Some(Entry::InFlight { request_digest: d }) if *d == request_digest => {
                return ApiError::conflict("IdempotencyKeyInFlight", "a request with this idempotency key is still running")
                    .into_response();
            }
            Some(_) => {
                return ApiError::unprocessable("IdempotencyKeyReuse", "idempotency key was already used with a different body")
                    .into_response();
            }
            None => {
                entries.insert(scope.clone(), Entry::InFlight { request_digest: request_digest.clone() });
            }
        }
    }
    let resp = next.run(Request::from_parts(parts, Body::from(bytes))).await;
    let (parts, body) = resp.into_parts();
    let body = match axum::body::to_bytes(body, usize::MAX).await {
        Ok(b) => b,
        Err(e) => {
            state.idempotency.entries.lock().unwrap().remove(&scope);
            return ApiError::internal(e.to_string()).into_response();
        }
    };
    {
        let mut entries = state.idempotency.entries.lock().unwrap();
        if parts.status.is_server_error() {
            entries.remove(&scope);
        } else {
            entries.insert(scope, Entry::Done { request_digest, status: parts.status, headers: parts.headers.clone(), body: body.clone() });
        }
    }
    Response::from_parts(parts, Body::from(body))
}
