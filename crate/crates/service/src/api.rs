//! Route handlers.

use std::sync::Arc;

use argverify_core::canonical::{self, FloatStyle};
use argverify_core::model::{FieldViolation, MicroGraph};
use argverify_core::pipeline::ResolvedSection;
use argverify_core::providers::{escalate as run_escalation, EscalationOutcome};
use argverify_core::report::{build_report, render, SectionFinding};
use argverify_core::semantics::StrengthAssignment;
use argverify_core::{
    run_pipeline, CasePackage, ClaimKind, ClashRecord, ContestAction, ContestationSession, OverallStatus, PipelineConfig, PipelineError,
    ReportFormat, SectionResult, Verdict, VerificationResult,
};
use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use chrono::Utc;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::ApiError;
use crate::state::{AppState, RunState, RunStatus};
use crate::store::RecordKind;

type Shared = State<Arc<AppState>>;
type ApiResult = Result<Response, ApiError>;

fn json_response<T: Serialize>(status: StatusCode, value: &T) -> ApiResult {
    let body = canonical::to_string(value, FloatStyle::Exact).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(raw_json(status, body))
}

fn raw_json(status: StatusCode, body: String) -> Response {
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

/// Deserializes and reports the offending field path on failure.
fn from_value<T: DeserializeOwned>(value: Value) -> Result<T, FieldViolation> {
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        FieldViolation { field: if path == "." { "body".to_owned() } else { path }, message: e.into_inner().to_string() }
    })
}

fn parse_body(body: &Bytes) -> Result<Value, FieldViolation> {
    if body.iter().all(u8::is_ascii_whitespace) {
        return Ok(Value::Object(Default::default()));
    }
    serde_json::from_slice(body).map_err(|e| FieldViolation { field: "body".to_owned(), message: e.to_string() })
}

fn load<T: DeserializeOwned>(state: &AppState, kind: RecordKind, key: &str) -> Result<Option<T>, ApiError> {
    match state.store.get(kind, key)? {
        Some(rec) => serde_json::from_str(&rec.body).map(Some).map_err(|e| ApiError::internal(format!("stored {kind} `{key}`: {e}"))),
        None => Ok(None),
    }
}

fn put<T: Serialize>(state: &AppState, kind: RecordKind, key: &str, value: &T) -> Result<String, ApiError> {
    let body = canonical::to_string(value, FloatStyle::Exact).map_err(|e| ApiError::internal(e.to_string()))?;
    Ok(state.store.put(kind, key, body)?.digest)
}

fn require_case(state: &AppState, case_id: &str) -> Result<CasePackage, ApiError> {
    load(state, RecordKind::Case, case_id)?.ok_or_else(|| ApiError::not_found(format!("unknown case `{case_id}`")))
}

fn require_result(state: &AppState, case_id: &str) -> Result<VerificationResult, ApiError> {
    require_case(state, case_id)?;
    load(state, RecordKind::Result, case_id)?.ok_or_else(|| ApiError::not_found(format!("case `{case_id}` has no verification result yet")))
}

fn require_session(state: &AppState, session_id: &str) -> Result<ContestationSession, ApiError> {
    load(state, RecordKind::Session, session_id)?.ok_or_else(|| ApiError::not_found(format!("unknown session `{session_id}`")))
}

fn parse_kind(raw: &str) -> Result<ClaimKind, ApiError> {
    raw.parse().map_err(|_| ApiError::not_found(format!("unknown claim kind `{raw}`")))
}

fn resolved(result: &VerificationResult, kind: ClaimKind) -> Result<&ResolvedSection, ApiError> {
    match result.sections.get(&kind) {
        Some(SectionResult::Resolved(r)) => Ok(r),
        Some(SectionResult::Failed(e)) => {
            Err(ApiError::unprocessable("SectionUnavailable", format!("section {kind} failed at {:?}: {}", e.stage, e.message)))
        }
        None => Err(ApiError::not_found(format!("result has no {kind} section"))),
    }
}

fn ensure_idle(state: &AppState, case_id: &str) -> Result<(), ApiError> {
    match state.run(case_id) {
        Some(r) if r.status == RunStatus::Running => {
            Err(ApiError::conflict("RunActive", format!("verification run {} is still running for case `{case_id}`", r.run_id)))
        }
        _ => Ok(()),
    }
}

pub async fn health() -> Response {
    raw_json(StatusCode::OK, "{\"status\": \"ok\"}\n".to_owned())
}

#[derive(Serialize)]
struct CaseCreated<'a> {
    case_id: &'a str,
    digest: String,
}

pub async fn create_case(State(state): Shared, body: Bytes) -> ApiResult {
    let mut value = parse_body(&body).map_err(|v| ApiError::invalid_case(vec![v]))?;
    // a missing id is reported like an empty one
    if let Value::Object(map) = &mut value {
        map.entry("case_id").or_insert_with(|| Value::String(String::new()));
    }
    let case: CasePackage = from_value(value).map_err(|v| ApiError::invalid_case(vec![v]))?;
    let violations = case.validate();
    if !violations.is_empty() {
        return Err(ApiError::invalid_case(violations));
    }
    let lock = state.case_lock(&case.case_id);
    let _guard = lock.lock().await;
    let body = canonical::to_string(&case, FloatStyle::Exact).map_err(|e| ApiError::internal(e.to_string()))?;
    if let Some(existing) = state.store.get(RecordKind::Case, &case.case_id)? {
        if existing.body == body {
            return json_response(StatusCode::OK, &CaseCreated { case_id: &case.case_id, digest: existing.digest });
        }
        return Err(ApiError::conflict("CaseExists", format!("case `{}` already exists with different content", case.case_id)));
    }
    let digest = state.store.put(RecordKind::Case, &case.case_id, body)?.digest;
    json_response(StatusCode::CREATED, &CaseCreated { case_id: &case.case_id, digest })
}

pub async fn get_case(State(state): Shared, Path(case_id): Path<String>) -> ApiResult {
    let rec = state.store.get(RecordKind::Case, &case_id)?.ok_or_else(|| ApiError::not_found(format!("unknown case `{case_id}`")))?;
    Ok(raw_json(StatusCode::OK, rec.body))
}

fn merge(base: &mut Value, overrides: Value) {
    match (base, overrides) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (slot, v) => *slot = v,
    }
}

fn effective_config(defaults: &PipelineConfig, body: &Bytes) -> Result<PipelineConfig, ApiError> {
    let overrides =
        parse_body(body).map_err(|v| ApiError::unprocessable("InvalidConfig", v.message.clone()).with_violation(&v.field, v.message))?;
    if !overrides.is_object() {
        return Err(ApiError::unprocessable("InvalidConfig", "config overrides must be a JSON object"));
    }
    let mut merged = serde_json::to_value(defaults).map_err(|e| ApiError::internal(e.to_string()))?;
    merge(&mut merged, overrides);
    let cfg: PipelineConfig =
        from_value(merged).map_err(|v| ApiError::unprocessable("InvalidConfig", v.message.clone()).with_violation(&v.field, v.message))?;
    cfg.check().map_err(|m| ApiError::unprocessable("InvalidConfig", m.clone()).with_violation("config", m))?;
    Ok(cfg)
}

pub async fn verify(State(state): Shared, Path(case_id): Path<String>, body: Bytes) -> ApiResult {
    let case = require_case(&state, &case_id)?;
    let cfg = effective_config(&state.pipeline_defaults, &body)?;
    let run = {
        let mut runs = state.runs.lock().unwrap();
        if let Some(r) = runs.get(&case_id).filter(|r| r.status == RunStatus::Running) {
            return Err(ApiError::conflict("RunActive", format!("verification run {} is already running for case `{case_id}`", r.run_id)));
        }
        let run =
            RunState { run_id: uuid::Uuid::new_v4().to_string(), case_id: case_id.clone(), status: RunStatus::Running, failure: None };
        runs.insert(case_id.clone(), run.clone());
        run
    };
    tracing::info!(case = %case_id, run = %run.run_id, "verification run started");
    let task_state = state.clone();
    let run_id = run.run_id.clone();
    tokio::spawn(async move {
        let providers = task_state.providers.clone();
        let outcome = tokio::task::spawn_blocking(move || run_pipeline(&case, &cfg, &providers)).await;
        let lock = task_state.case_lock(&case_id);
        let _guard = lock.lock().await;
        let failure = match outcome {
            Ok(Ok(result)) => put(&task_state, RecordKind::Result, &case_id, &result).err(),
            Ok(Err(PipelineError::Provider(e))) => Some(ApiError::provider(e.provider(), e.to_string())),
            Ok(Err(PipelineError::InvalidCase(v))) => Some(ApiError::invalid_case(v)),
            Ok(Err(e @ PipelineError::InvalidConfig(_))) => Some(ApiError::unprocessable("InvalidConfig", e.to_string())),
            Err(e) => Some(ApiError::internal(format!("verification task failed: {e}"))),
        };
        tracing::info!(case = %case_id, run = %run_id, failed = failure.is_some(), "verification run finished");
        let mut runs = task_state.runs.lock().unwrap();
        if let Some(r) = runs.get_mut(&case_id).filter(|r| r.run_id == run_id) {
            r.status = if failure.is_some() { RunStatus::Failed } else { RunStatus::Succeeded };
            r.failure = failure;
        }
    });
    json_response(StatusCode::ACCEPTED, &run)
}

pub async fn get_result(State(state): Shared, Path(case_id): Path<String>) -> ApiResult {
    require_case(&state, &case_id)?;
    match state.run(&case_id) {
        Some(r) if r.status == RunStatus::Running => return json_response(StatusCode::ACCEPTED, &r),
        Some(RunState { failure: Some(f), .. }) => return Err(f),
        _ => {}
    }
    let rec = state
        .store
        .get(RecordKind::Result, &case_id)?
        .ok_or_else(|| ApiError::not_found(format!("case `{case_id}` has no verification result yet")))?;
    Ok(raw_json(StatusCode::OK, rec.body))
}

#[derive(Deserialize)]
pub struct SessionQuery {
    session: Option<String>,
}

/// The case result, or a session's current result when `session` is given.
fn view_result(state: &AppState, case_id: &str, session: Option<&str>) -> Result<(VerificationResult, Vec<ContestAction>), ApiError> {
    match session {
        Some(sid) => {
            require_case(state, case_id)?;
            let s = require_session(state, sid)?;
            if s.case_id != case_id {
                return Err(ApiError::not_found(format!("session `{sid}` does not belong to case `{case_id}`")));
            }
            Ok((s.current, s.log))
        }
        None => Ok((require_result(state, case_id)?, vec![])),
    }
}

#[derive(Serialize)]
struct GraphView<'a> {
    case_id: &'a str,
    claim_kind: ClaimKind,
    statement: &'a str,
    graph: &'a MicroGraph<f64>,
    assignment: &'a StrengthAssignment<f64>,
    sigma: f64,
    verdict: Verdict,
    uncertain: bool,
    final_verdict: Verdict,
    clash_records: &'a [ClashRecord],
    #[serde(skip_serializing_if = "Option::is_none")]
    escalation: Option<&'a EscalationOutcome>,
}

pub async fn get_graph(State(state): Shared, Path((case_id, kind)): Path<(String, String)>, Query(q): Query<SessionQuery>) -> ApiResult {
    let kind = parse_kind(&kind)?;
    let (result, _) = view_result(&state, &case_id, q.session.as_deref())?;
    let r = resolved(&result, kind)?;
    json_response(
        StatusCode::OK,
        &GraphView {
            case_id: &case_id,
            claim_kind: kind,
            statement: &r.claim.statement,
            graph: &r.graph,
            assignment: &r.assignment,
            sigma: r.sigma,
            verdict: r.verdict,
            uncertain: r.uncertain,
            final_verdict: r.effective_verdict(),
            clash_records: &r.clash_records,
            escalation: r.escalation.as_ref(),
        },
    )
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct NewSession {
    #[serde(default)]
    session_id: Option<String>,
}

#[derive(Serialize)]
struct SessionCreated<'a> {
    session_id: &'a str,
    case_id: &'a str,
    current_digest: &'a str,
}

pub async fn create_session(State(state): Shared, Path(case_id): Path<String>, body: Bytes) -> ApiResult {
    let result = require_result(&state, &case_id)?;
    let req: NewSession = parse_body(&body)
        .and_then(from_value)
        .map_err(|v| ApiError::unprocessable("InvalidSession", v.message.clone()).with_violation(&v.field, v.message))?;
    let session_id = match req.session_id {
        Some(id) if id.trim().is_empty() => {
            return Err(
                ApiError::unprocessable("InvalidSession", "session_id non-empty").with_violation("session_id", "session_id non-empty")
            )
        }
        Some(id) => id,
        None => uuid::Uuid::new_v4().to_string(),
    };
    let lock = state.session_lock(&session_id);
    let _guard = lock.lock().await;
    if state.store.get(RecordKind::Session, &session_id)?.is_some() {
        return Err(ApiError::conflict("SessionExists", format!("session `{session_id}` already exists")));
    }
    let session = ContestationSession::new(session_id.clone(), result);
    put(&state, RecordKind::Session, &session_id, &session)?;
    json_response(
        StatusCode::CREATED,
        &SessionCreated { session_id: &session_id, case_id: &case_id, current_digest: &session.current_digest },
    )
}

pub async fn get_session(State(state): Shared, Path(session_id): Path<String>) -> ApiResult {
    let rec =
        state.store.get(RecordKind::Session, &session_id)?.ok_or_else(|| ApiError::not_found(format!("unknown session `{session_id}`")))?;
    Ok(raw_json(StatusCode::OK, rec.body))
}

#[derive(Serialize)]
struct ActionApplied<'a> {
    session_id: &'a str,
    action_id: &'a str,
    log_length: usize,
    current_digest: &'a str,
    overall_status: OverallStatus,
    sections: Vec<SectionFinding>,
}

fn action_response(session: &ContestationSession, action_id: &str) -> ApiResult {
    let report = build_report(&session.current, &session.log, None);
    json_response(
        StatusCode::OK,
        &ActionApplied {
            session_id: &session.session_id,
            action_id,
            log_length: session.log.len(),
            current_digest: &session.current_digest,
            overall_status: report.overall_status,
            sections: report.sections,
        },
    )
}

/// Fills `action_id`, `actor` and `at` when the client leaves them out.
fn complete_action(value: &mut Value) {
    if let Value::Object(map) = value {
        map.entry("action_id").or_insert_with(|| Value::String(uuid::Uuid::new_v4().to_string()));
        map.entry("actor").or_insert_with(|| Value::String("reviewer".to_owned()));
        map.entry("at").or_insert_with(|| Value::String(Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)));
    }
}

pub async fn post_action(State(state): Shared, Path(session_id): Path<String>, body: Bytes) -> ApiResult {
    let invalid = |v: FieldViolation| ApiError::unprocessable("InvalidAction", v.message.clone()).with_violation(&v.field, v.message);
    let mut value = parse_body(&body).map_err(invalid)?;
    complete_action(&mut value);
    let action: ContestAction = from_value(value).map_err(invalid)?;
    let lock = state.session_lock(&session_id);
    let _guard = lock.lock().await;
    let session = require_session(&state, &session_id)?;
    if let Some(prev) = session.log.iter().find(|a| a.action_id == action.action_id) {
        if *prev == action {
            return action_response(&session, &action.action_id);
        }
        return Err(ApiError::unprocessable("DuplicateActionId", format!("action id `{}` is already in the log", action.action_id))
            .with_violation("action_id", "action_id must be unique within the session"));
    }
    let action_id = action.action_id.clone();
    let next = session.apply_action(action)?;
    put(&state, RecordKind::Session, &session_id, &next)?;
    tracing::info!(session = %session_id, action = %action_id, log = next.log.len(), "contest action applied");
    action_response(&next, &action_id)
}

pub async fn escalate(State(state): Shared, Path((case_id, kind)): Path<(String, String)>) -> ApiResult {
    let kind = parse_kind(&kind)?;
    ensure_idle(&state, &case_id)?;
    let lock = state.case_lock(&case_id);
    let _guard = lock.lock().await;
    let mut result = require_result(&state, &case_id)?;
    let section = resolved(&result, kind)?;
    if !section.uncertain {
        return Err(ApiError::unprocessable(
            "NotUncertain",
            format!("section {kind} has σ={:.6}, outside the uncertainty band; only uncertain sections are escalated", section.sigma),
        ));
    }
    let (claim, graph, assignment) = (section.claim.clone(), section.graph.clone(), section.assignment.clone());
    let verifier = state.providers.verifier.clone();
    let outcome = tokio::task::spawn_blocking(move || run_escalation(verifier.as_ref(), &claim, &graph, &assignment))
        .await
        .map_err(|e| ApiError::internal(e.to_string()))?;
    if let Some(SectionResult::Resolved(r)) = result.sections.get_mut(&kind) {
        r.escalation = Some(outcome.clone());
    }
    put(&state, RecordKind::Result, &case_id, &result)?;
    json_response(StatusCode::OK, &outcome)
}

#[derive(Deserialize)]
pub struct ReportQuery {
    format: Option<String>,
    session: Option<String>,
}

pub async fn report(State(state): Shared, Path(case_id): Path<String>, Query(q): Query<ReportQuery>) -> ApiResult {
    let format: ReportFormat = match q.format.as_deref() {
        None => ReportFormat::Json,
        Some(f) => f.parse().map_err(|m: String| ApiError::unprocessable("InvalidFormat", m.clone()).with_violation("format", m))?,
    };
    let (result, log) = view_result(&state, &case_id, q.session.as_deref())?;
    let body = render(&build_report(&result, &log, None), format);
    let content_type = match format {
        ReportFormat::Json => "application/json",
        ReportFormat::Markdown => "text/markdown; charset=utf-8",
    };
    Ok((StatusCode::OK, [(header::CONTENT_TYPE, content_type)], body).into_response())
}
