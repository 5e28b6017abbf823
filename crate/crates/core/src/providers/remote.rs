//! HTTP+JSON providers.
//!
//! Every call is one `POST {base_url}/v1/{op}` carrying
//! `{"op", "model", "prompt_version", "prompt", "input"}` and expecting a
//! single JSON object back. Transport failures, 429 and 5xx responses are
//! retried with exponential backoff; malformed bodies are not.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::PathBuf;
use std::sync::{Arc, Condvar, Mutex};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use super::{
    CardDraft, ClaimDraft, GeneratorProvider, JudgeProvider, JudgeVerdict, ProviderError, ProviderKind, VerifierProvider, VerifierReply,
};
use crate::model::{ArgumentCard, CasePackage, Claim, ClaimKind, EvidenceItem, MicroGraph};
use crate::semantics::StrengthAssignment;

const DECOMPOSE_PROMPT: &str = include_str!("../../prompts/decompose.v1.txt");
const GENERATE_PROMPT: &str = include_str!("../../prompts/generate_card.v1.txt");
const JUDGE_PROMPT: &str = include_str!("../../prompts/judge_clash.v1.txt");
const ESCALATE_PROMPT: &str = include_str!("../../prompts/escalate.v1.txt");

/// Connection settings for a remote provider endpoint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RemoteSettings {
    pub base_url: String,
    pub auth_token: Option<String>,
    pub model: String,
    pub timeout_ms: u64,
    pub max_attempts: u32,
    pub backoff_base_ms: u64,
    pub max_in_flight: usize,
    /// Append-only JSON-lines copy of the call log.
    pub log_path: Option<PathBuf>,
}

impl Default for RemoteSettings {
    fn default() -> Self {
        Self {
            base_url: "http://127.0.0.1:8700".to_owned(),
            auth_token: None,
            model: "default".to_owned(),
            timeout_ms: 30_000,
            max_attempts: 3,
            backoff_base_ms: 500,
            max_in_flight: 4,
            log_path: None,
        }
    }
}

impl RemoteSettings {
    /// Applies `ARGVERIFY_PROVIDER_*` environment overrides.
    pub fn with_env(mut self) -> Self {
        self.apply_env(|k| std::env::var(k).ok());
        self
    }

    pub fn apply_env(&mut self, get: impl Fn(&str) -> Option<String>) {
        if let Some(v) = get("ARGVERIFY_PROVIDER_BASE_URL") {
            self.base_url = v;
        }
        if let Some(v) = get("ARGVERIFY_PROVIDER_TOKEN") {
            self.auth_token = Some(v);
        }
        if let Some(v) = get("ARGVERIFY_PROVIDER_MODEL") {
            self.model = v;
        }
        if let Some(v) = get("ARGVERIFY_PROVIDER_TIMEOUT_MS").and_then(|v| v.parse().ok()) {
            self.timeout_ms = v;
        }
        if let Some(v) = get("ARGVERIFY_PROVIDER_MAX_ATTEMPTS").and_then(|v| v.parse().ok()) {
            self.max_attempts = v;
        }
        if let Some(v) = get("ARGVERIFY_PROVIDER_BACKOFF_MS").and_then(|v| v.parse().ok()) {
            self.backoff_base_ms = v;
        }
        if let Some(v) = get("ARGVERIFY_PROVIDER_MAX_IN_FLIGHT").and_then(|v| v.parse().ok()) {
            self.max_in_flight = v;
        }
        if let Some(v) = get("ARGVERIFY_PROVIDER_LOG") {
            self.log_path = Some(PathBuf::from(v));
        }
    }
}

/// One remote interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RemoteCallLog {
    pub provider_id: String,
    pub op: String,
    pub request_hash: String,
    pub latency_ms: u64,
    pub retries: u32,
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Counting semaphore bounding concurrent requests.
struct InFlight {
    free: Mutex<usize>,
    cv: Condvar,
}

impl InFlight {
    fn acquire(&self) -> InFlightGuard<'_> {
        let mut free = self.free.lock().expect("semaphore poisoned");
        while *free == 0 {
            free = self.cv.wait(free).expect("semaphore poisoned");
        }
        *free -= 1;
        InFlightGuard(self)
    }
}

struct InFlightGuard<'a>(&'a InFlight);

impl Drop for InFlightGuard<'_> {
    fn drop(&mut self) {
        *self.0.free.lock().expect("semaphore poisoned") += 1;
        self.0.cv.notify_one();
    }
}

enum Attempt {
    Retry(String),
    Fatal(ProviderError),
}

/// Shared HTTP client with retry, logging and a global in-flight limit.
pub struct RemoteClient {
    settings: RemoteSettings,
    agent: ureq::Agent,
    in_flight: InFlight,
    log: Mutex<Vec<RemoteCallLog>>,
}

impl RemoteClient {
    pub fn new(settings: RemoteSettings) -> Self {
        let agent: ureq::Agent = ureq::Agent::config_builder()
            .timeout_global(Some(Duration::from_millis(settings.timeout_ms)))
            .http_status_as_error(false)
            .build()
            .into();
        let in_flight = InFlight { free: Mutex::new(settings.max_in_flight.max(1)), cv: Condvar::new() };
        Self { settings, agent, in_flight, log: Mutex::new(Vec::new()) }
    }

    pub fn settings(&self) -> &RemoteSettings {
        &self.settings
    }

    /// Snapshot of the call log.
    pub fn call_log(&self) -> Vec<RemoteCallLog> {
        self.log.lock().expect("log poisoned").clone()
    }

    fn record(&self, entry: RemoteCallLog) {
        if let Some(path) = &self.settings.log_path {
            let line = serde_json::to_string(&entry).expect("log entry serializes");
            let res = OpenOptions::new().create(true).append(true).open(path).and_then(|mut f| writeln!(f, "{line}"));
            if let Err(err) = res {
                tracing::warn!(path = %path.display(), %err, "could not append provider call log");
            }
        }
        self.log.lock().expect("log poisoned").push(entry);
    }

    fn attempt(&self, provider: &str, url: &str, body: &str) -> Result<Value, Attempt> {
        let mut req = self.agent.post(url).header("content-type", "application/json");
        if let Some(token) = &self.settings.auth_token {
            req = req.header("authorization", &format!("Bearer {token}"));
        }
        let mut resp = req.send(body).map_err(|e| Attempt::Retry(e.to_string()))?;
        let status = resp.status().as_u16();
        let text = resp.body_mut().read_to_string().map_err(|e| Attempt::Retry(e.to_string()))?;
        if status == 429 || status >= 500 {
            return Err(Attempt::Retry(format!("HTTP {status}")));
        }
        if !(200..300).contains(&status) {
            return Err(Attempt::Fatal(ProviderError::Unavailable {
                provider: provider.to_owned(),
                message: format!("HTTP {status}: {text}"),
            }));
        }
        serde_json::from_str(&text).map_err(|e| {
            Attempt::Fatal(ProviderError::Schema { provider: provider.to_owned(), message: format!("response is not JSON: {e}") })
        })
    }

    /// Sends one request, retrying transient failures, and decodes the
    /// response into `T`.
    pub fn call<T: DeserializeOwned>(
        &self,
        provider: &str,
        op: &str,
        prompt_version: &str,
        prompt: String,
        input: Value,
    ) -> Result<T, ProviderError> {
        let body = json!({
            "op": op,
            "model": self.settings.model,
            "prompt_version": prompt_version,
            "prompt": prompt,
            "input": input,
        })
        .to_string();
        let request_hash = hex::encode(Sha256::digest(body.as_bytes()));
        let url = format!("{}/v1/{op}", self.settings.base_url.trim_end_matches('/'));
        let attempts = self.settings.max_attempts.max(1);

        let _slot = self.in_flight.acquire();
        let started = Instant::now();
        let mut retries = 0;
        let result = loop {
            match self.attempt(provider, &url, &body) {
                Ok(v) => break Ok(v),
                Err(Attempt::Fatal(e)) => break Err(e),
                Err(Attempt::Retry(msg)) => {
                    if retries + 1 >= attempts {
                        break Err(ProviderError::Unavailable {
                            provider: provider.to_owned(),
                            message: format!("{msg} (after {attempts} attempts)"),
                        });
                    }
                    let wait = self.settings.backoff_base_ms.saturating_mul(1 << retries.min(16));
                    tracing::debug!(provider, op, retries, wait, %msg, "retrying provider call");
                    std::thread::sleep(Duration::from_millis(wait));
                    retries += 1;
                }
            }
        };
        let decoded = result.and_then(|v| {
            serde_json::from_value::<T>(v).map_err(|e| ProviderError::Schema { provider: provider.to_owned(), message: e.to_string() })
        });
        self.record(RemoteCallLog {
            provider_id: provider.to_owned(),
            op: op.to_owned(),
            request_hash,
            latency_ms: started.elapsed().as_millis() as u64,
            retries,
            ok: decoded.is_ok(),
            error: decoded.as_ref().err().map(|e| e.to_string()),
        });
        decoded
    }
}

fn render(template: &str, vars: &[(&str, &str)]) -> String {
    let mut out = template.to_owned();
    for (k, v) in vars {
        out = out.replace(&format!("{{{{{k}}}}}"), v);
    }
    out
}

fn prompt_version(template: &str) -> &str {
    template.lines().next().and_then(|l| l.strip_prefix("# prompt: ")).unwrap_or("unversioned")
}

pub struct RemoteGenerator {
    client: Arc<RemoteClient>,
    id: String,
}

impl RemoteGenerator {
    pub fn new(client: Arc<RemoteClient>) -> Self {
        let id = format!("remote-generator:{}", client.settings().model);
        Self { client, id }
    }

    pub fn client(&self) -> &RemoteClient {
        &self.client
    }
}

#[derive(Deserialize)]
struct DecomposeReply {
    claims: Vec<ClaimDraft>,
}

impl GeneratorProvider for RemoteGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn decompose(&self, case: &CasePackage) -> Result<Vec<ClaimDraft>, ProviderError> {
        let clues: Vec<String> = case.clues.iter().map(|c| format!("- {}", c.text)).collect();
        let prompt =
            render(DECOMPOSE_PROMPT, &[("media", &case.media.reference), ("context", &case.context), ("clues", &clues.join("\n"))]);
        let input = json!({ "case_id": case.case_id, "media": case.media, "context": case.context, "clues": case.clues });
        let reply: DecomposeReply = self.client.call(&self.id, "decompose", prompt_version(DECOMPOSE_PROMPT), prompt, input)?;
        let mut drafts = Vec::with_capacity(6);
        for kind in ClaimKind::ALL {
            let mut matching = reply.claims.iter().filter(|d| d.kind == kind);
            match (matching.next(), matching.next()) {
                (Some(d), None) if !d.statement.trim().is_empty() => drafts.push(d.clone()),
                _ => {
                    return Err(ProviderError::Schema {
                        provider: self.id.clone(),
                        message: format!("expected exactly one non-empty `{kind}` claim"),
                    })
                }
            }
        }
        Ok(drafts)
    }

    fn generate(&self, claim: &Claim<f64>, evidence: &EvidenceItem) -> Result<CardDraft, ProviderError> {
        let origin = serde_json::to_value(evidence.origin).expect("enum serializes");
        let prompt = render(
            GENERATE_PROMPT,
            &[
                ("kind", claim.kind.as_str()),
                ("claim", &claim.statement),
                ("evidence_id", &evidence.evidence_id),
                ("origin", origin.as_str().unwrap_or_default()),
                ("source", evidence.source_name.as_deref().unwrap_or("unknown source")),
                ("evidence", &evidence.text),
            ],
        );
        let input = json!({ "claim": claim, "evidence": evidence });
        let draft: CardDraft = self.client.call(&self.id, "generate", prompt_version(GENERATE_PROMPT), prompt, input)?;
        draft.check(&self.id)?;
        Ok(draft)
    }
}

pub struct RemoteJudge {
    client: Arc<RemoteClient>,
    id: String,
}

impl RemoteJudge {
    pub fn new(client: Arc<RemoteClient>) -> Self {
        let id = format!("remote-judge:{}", client.settings().model);
        Self { client, id }
    }
}

impl JudgeProvider<f64> for RemoteJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn judge(&self, claim: &Claim<f64>, support: &ArgumentCard<f64>, attack: &ArgumentCard<f64>) -> Result<JudgeVerdict, ProviderError> {
        let prompt = render(
            JUDGE_PROMPT,
            &[
                ("kind", claim.kind.as_str()),
                ("claim", &claim.statement),
                ("support_id", &support.argument_id),
                ("support", &support.text),
                ("attack_id", &attack.argument_id),
                ("attack", &attack.text),
            ],
        );
        let input = json!({ "claim": claim, "support": support, "attack": attack });
        let verdict: JudgeVerdict = self.client.call(&self.id, "judge", prompt_version(JUDGE_PROMPT), prompt, input)?;
        if let Some(c) = verdict.confidence {
            if !(0.0..=1.0).contains(&c) {
                return Err(ProviderError::Schema { provider: self.id.clone(), message: "confidence must lie in [0,1]".to_owned() });
            }
        }
        Ok(verdict)
    }
}

pub struct RemoteVerifier {
    client: Arc<RemoteClient>,
    id: String,
}

impl RemoteVerifier {
    pub fn new(client: Arc<RemoteClient>) -> Self {
        let id = format!("remote-verifier:{}", client.settings().model);
        Self { client, id }
    }
}

impl VerifierProvider for RemoteVerifier {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Remote
    }

    fn verify(&self, claim: &Claim<f64>, graph: &MicroGraph<f64>, sigma: &StrengthAssignment<f64>) -> Result<VerifierReply, ProviderError> {
        let args: Vec<String> = graph
            .arguments
            .iter()
            .map(|a| {
                let s = sigma.get(&a.argument_id).unwrap_or(a.base_strength);
                format!("- [{}] {:?} sigma={s:.6}: {}", a.argument_id, a.stance, a.text)
            })
            .collect();
        let claim_sigma = format!("{:.6}", sigma.get(&claim.claim_id).unwrap_or(claim.base_strength));
        let prompt = render(
            ESCALATE_PROMPT,
            &[("kind", claim.kind.as_str()), ("claim", &claim.statement), ("sigma", &claim_sigma), ("arguments", &args.join("\n"))],
        );
        let input = json!({ "claim": claim, "graph": graph, "sigma": sigma });
        self.client.call(&self.id, "escalate", prompt_version(ESCALATE_PROMPT), prompt, input)
    }
}
