use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use argverify_core::{PipelineConfig, ProviderSet};
use serde::Serialize;

use crate::error::ApiError;
use crate::middleware::IdempotencyCache;
use crate::store::Store;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Running,
    Succeeded,
    Failed,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunState {
    pub run_id: String,
    pub case_id: String,
    pub status: RunStatus,
    #[serde(skip)]
    pub failure: Option<ApiError>,
}

type LockMap = Mutex<HashMap<String, Arc<tokio::sync::Mutex<()>>>>;

/// Shared state behind the router. Everything durable lives in the store;
/// runs, locks and the idempotency cache are per process.
pub struct AppState {
    pub store: Arc<dyn Store>,
    pub providers: ProviderSet,
    pub pipeline_defaults: PipelineConfig,
    pub(crate) runs: Mutex<HashMap<String, RunState>>,
    case_locks: LockMap,
    session_locks: LockMap,
    pub(crate) idempotency: IdempotencyCache,
}

impl AppState {
    pub fn new(store: Arc<dyn Store>, providers: ProviderSet, pipeline_defaults: PipelineConfig) -> Self {
        Self {
            store,
            providers,
            pipeline_defaults,
            runs: Mutex::default(),
            case_locks: Mutex::default(),
            session_locks: Mutex::default(),
            idempotency: IdempotencyCache::default(),
        }
    }

    fn lock_for(map: &LockMap, key: &str) -> Arc<tokio::sync::Mutex<()>> {
        map.lock().unwrap().entry(key.to_owned()).or_default().clone()
    }

    /// Serializes writes to a case and its stored result.
    pub fn case_lock(&self, case_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        Self::lock_for(&self.case_locks, case_id)
    }

    /// Single writer per session.
    pub fn session_lock(&self, session_id: &str) -> Arc<tokio::sync::Mutex<()>> {
        Self::lock_for(&self.session_locks, session_id)
    }

    pub fn run(&self, case_id: &str) -> Option<RunState> {
        self.runs.lock().unwrap().get(case_id).cloned()
    }
}
