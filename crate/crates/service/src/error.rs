use argverify_core::model::FieldViolation;
use argverify_core::ContestError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;

use crate::store::StoreError;

/// Error body returned by every endpoint:
/// `{"error": code, "message": ..., "violations": [...], "provider_id": ...}`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    pub error: String,
    pub message: String,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub violations: Vec<FieldViolation>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub provider_id: Option<String>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self { status, error: code.to_owned(), message: message.into(), violations: vec![], provider_id: None }
    }

    pub fn not_found(what: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", what)
    }

    pub fn conflict(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::CONFLICT, code, message)
    }

    pub fn unprocessable(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn invalid_case(violations: Vec<FieldViolation>) -> Self {
        let message = violations.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
        Self { violations, ..Self::unprocessable("InvalidCase", message) }
    }

    pub fn provider(provider_id: impl Into<String>, message: impl Into<String>) -> Self {
        Self { provider_id: Some(provider_id.into()), ..Self::new(StatusCode::BAD_GATEWAY, "ProviderFailure", message) }
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }

    pub fn with_violation(mut self, field: &str, message: impl Into<String>) -> Self {
        self.violations.push(FieldViolation { field: field.to_owned(), message: message.into() });
        self
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        tracing::error!(%e, "store failure");
        ApiError::internal(e.to_string())
    }
}

pub fn contest_code(e: &ContestError) -> &'static str {
    match e {
        ContestError::UnknownTarget { .. } => "UnknownTarget",
        ContestError::InvalidEdit(_) => "InvalidEdit",
        ContestError::InvalidAction(_) => "InvalidAction",
        ContestError::UnresolvedProvenance(_) => "UnresolvedProvenance",
        ContestError::DuplicateId(_) => "DuplicateId",
        ContestError::Cycle(_) => "Cycle",
        ContestError::SectionUnavailable(_) => "SectionUnavailable",
        ContestError::Graph(_) => "InvalidGraph",
        ContestError::Semantics(_) => "InvalidScores",
    }
}

impl From<ContestError> for ApiError {
    fn from(e: ContestError) -> Self {
        let field = match &e {
            ContestError::UnknownTarget { .. } => "target",
            ContestError::UnresolvedProvenance(_) => "payload.card.provenance.evidence_id",
            ContestError::InvalidEdit(_) => "payload",
            ContestError::DuplicateId(_) => "payload.card.argument_id",
            ContestError::Cycle(_) => "payload.relations",
            ContestError::SectionUnavailable(_) => "claim_kind",
            _ => "action",
        };
        ApiError::unprocessable(contest_code(&e), e.to_string()).with_violation(field, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_string(&self).unwrap_or_default();
        (self.status, [(axum::http::header::CONTENT_TYPE, "application/json")], body).into_response()
    }
}
