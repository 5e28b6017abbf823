//! Model and tool services behind three roles: the argument generator, the
//! clash judge and the escalation verifier.
//!
//! Each role has a deterministic mock ([`mock`]) and an HTTP+JSON remote
//! implementation ([`remote`]). [`scripted`] holds a canned-response HTTP
//! server used to exercise the remote path in tests.

pub mod mock;
pub mod remote;
pub mod scripted;

use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{AnnotatedRelation, ArgumentCard, CasePackage, Claim, ClaimKind, EvidenceItem, MicroGraph, QualityScores, Stance};
use crate::report::Verdict;
use crate::scalar::Scalar;
use crate::semantics::StrengthAssignment;

pub use mock::{MockGenerator, MockJudge, MockVerifier};
pub use remote::{RemoteCallLog, RemoteClient, RemoteGenerator, RemoteJudge, RemoteSettings, RemoteVerifier};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProviderKind {
    Mock,
    Remote,
}

impl fmt::Display for ProviderKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ProviderKind::Mock => "mock",
            ProviderKind::Remote => "remote",
        })
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ProviderError {
    #[error("provider `{provider}` unavailable: {message}")]
    Unavailable { provider: String, message: String },
    #[error("provider `{provider}` returned malformed output: {message}")]
    Schema { provider: String, message: String },
}

impl ProviderError {
    pub fn provider(&self) -> &str {
        match self {
            ProviderError::Unavailable { provider, .. } | ProviderError::Schema { provider, .. } => provider,
        }
    }
}

/// Claim statement proposed by a generator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClaimDraft {
    pub kind: ClaimKind,
    pub statement: String,
    #[serde(default)]
    pub low_information: bool,
}

/// Everything a generator contributes to an argument card.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CardDraft {
    pub text: String,
    pub stance: Stance,
    pub rationale: String,
    pub quality: QualityScores<f64>,
    #[serde(default)]
    pub relations: Vec<AnnotatedRelation>,
}

impl CardDraft {
    pub fn check(&self, provider: &str) -> Result<(), ProviderError> {
        let bad = |m: &str| Err(ProviderError::Schema { provider: provider.to_owned(), message: m.to_owned() });
        if self.text.trim().is_empty() {
            return bad("text must be non-empty");
        }
        if self.rationale.trim().is_empty() {
            return bad("rationale must be non-empty");
        }
        if !self.quality.is_valid() {
            return bad("quality components must lie in [0,1]");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Winner {
    Support,
    Attack,
    Tie,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JudgeVerdict {
    pub winner: Winner,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub confidence: Option<f64>,
    pub rationale: String,
}

/// What a stronger verifier decided for an uncertain claim.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VerifierDecision {
    Supported,
    Refuted,
    Defer,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VerifierReply {
    pub decision: VerifierDecision,
    #[serde(default)]
    pub rationale: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum EscalationDecision {
    Override { verdict: Verdict },
    DeferToHuman,
}

/// Recorded result of escalating one uncertain section.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EscalationOutcome {
    pub provider_id: String,
    pub decision: EscalationDecision,
    #[serde(default)]
    pub rationale: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl EscalationOutcome {
    pub fn override_verdict(&self) -> Option<Verdict> {
        match self.decision {
            EscalationDecision::Override { verdict } => Some(verdict),
            EscalationDecision::DeferToHuman => None,
        }
    }
}

/// Phrases claims and turns evidence into argument drafts.
pub trait GeneratorProvider: Send + Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> ProviderKind;
    /// One draft per claim kind.
    fn decompose(&self, case: &CasePackage) -> Result<Vec<ClaimDraft>, ProviderError>;
    fn generate(&self, claim: &Claim<f64>, evidence: &EvidenceItem) -> Result<CardDraft, ProviderError>;
}

/// Decides which of two opposing arguments is stronger.
pub trait JudgeProvider<S: Scalar>: Send + Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }
    fn judge(&self, claim: &Claim<S>, support: &ArgumentCard<S>, attack: &ArgumentCard<S>) -> Result<JudgeVerdict, ProviderError>;
}

/// Stronger model consulted for uncertain claims.
pub trait VerifierProvider: Send + Sync {
    fn id(&self) -> &str;
    fn kind(&self) -> ProviderKind;
    fn verify(&self, claim: &Claim<f64>, graph: &MicroGraph<f64>, sigma: &StrengthAssignment<f64>) -> Result<VerifierReply, ProviderError>;
}

/// Runs the verifier for one uncertain claim. Provider failures never
/// propagate: they turn into a deferral carrying the error text.
pub fn escalate(
    verifier: &dyn VerifierProvider,
    claim: &Claim<f64>,
    graph: &MicroGraph<f64>,
    sigma: &StrengthAssignment<f64>,
) -> EscalationOutcome {
    let provider_id = verifier.id().to_owned();
    match verifier.verify(claim, graph, sigma) {
        Ok(reply) => {
            let decision = match reply.decision {
                VerifierDecision::Supported => EscalationDecision::Override { verdict: Verdict::Supported },
                VerifierDecision::Refuted => EscalationDecision::Override { verdict: Verdict::Refuted },
                VerifierDecision::Defer => EscalationDecision::DeferToHuman,
            };
            tracing::info!(provider = %provider_id, claim = %claim.kind, ?decision, "escalation outcome");
            EscalationOutcome { provider_id, decision, rationale: reply.rationale, error: None }
        }
        Err(err) => {
            tracing::warn!(provider = %provider_id, claim = %claim.kind, %err, "verifier failed, deferring to human review");
            EscalationOutcome {
                provider_id,
                decision: EscalationDecision::DeferToHuman,
                rationale: "verifier failed; deferred to human review".to_owned(),
                error: Some(err.to_string()),
            }
        }
    }
}

/// The three provider roles used by a pipeline run.
#[derive(Clone)]
pub struct ProviderSet {
    pub generator: Arc<dyn GeneratorProvider>,
    pub judge: Arc<dyn JudgeProvider<f64>>,
    pub verifier: Arc<dyn VerifierProvider>,
}

impl fmt::Debug for ProviderSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ProviderSet")
            .field("generator", &self.generator.id())
            .field("judge", &self.judge.id())
            .field("verifier", &self.verifier.id())
            .finish()
    }
}

impl ProviderSet {
    pub fn new(
        generator: Arc<dyn GeneratorProvider>,
        judge: Arc<dyn JudgeProvider<f64>>,
        verifier: Arc<dyn VerifierProvider>,
    ) -> Result<Self, String> {
        for id in [generator.id(), judge.id(), verifier.id()] {
            if id.trim().is_empty() {
                return Err("provider identifiers must be non-empty".to_owned());
            }
        }
        Ok(Self { generator, judge, verifier })
    }

    pub fn mock() -> Self {
        Self {
            generator: Arc::new(MockGenerator::default()),
            judge: Arc::new(MockJudge::default()),
            verifier: Arc::new(MockVerifier::default()),
        }
    }

    /// All three roles served by one remote endpoint sharing a client, so
    /// the in-flight limit is global.
    pub fn remote(settings: RemoteSettings) -> Self {
        let client = Arc::new(RemoteClient::new(settings));
        Self {
            generator: Arc::new(RemoteGenerator::new(client.clone())),
            judge: Arc::new(RemoteJudge::new(client.clone())),
            verifier: Arc::new(RemoteVerifier::new(client)),
        }
    }
}
