//! Case → six resolved claim sections.
//!
//! For each claim kind: top-k evidence selection, evidence-to-argument
//! conversion, micro-graph construction, clash resolution, evaluation,
//! verdict and (for uncertain sections) escalation. Sections are
//! independent; a failure in one is recorded as a [`SectionError`] and the
//! rest proceed.

pub mod relevance;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::clash::{resolve_claim, ClashConfig, ClashRecord};
use crate::model::{
    build_micro_graph, ArgumentCard, CardOrigin, CasePackage, Claim, ClaimKind, EvidenceItem, FieldViolation, MicroGraph, Provenance,
    Relation,
};
use crate::providers::{escalate, EscalationOutcome, GeneratorProvider, ProviderError, ProviderSet};
use crate::report::{verdict_of, UncertaintyBand, Verdict};
use crate::semantics::{evaluate_graph, intrinsic_strength, StrengthAssignment, StrengthWeights};

pub use relevance::{rank_evidence, select_top_k, RelevanceScore, RelevanceScorer, TokenOverlapScorer};

pub const RESULT_SCHEMA_VERSION: u32 = 1;

fn default_k() -> usize {
    8
}

fn default_parallel() -> usize {
    6
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    #[serde(default = "default_k")]
    pub k: usize,
    #[serde(default)]
    pub weights: StrengthWeights<f64>,
    #[serde(default)]
    pub clash: ClashConfig<f64>,
    #[serde(default)]
    pub uncertainty_band: UncertaintyBand,
    /// Consult the verifier for sections that end in the band.
    #[serde(default = "default_true")]
    pub auto_escalate: bool,
    /// Upper bound on sections processed at the same time.
    #[serde(default = "default_parallel")]
    pub max_parallel_sections: usize,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            k: default_k(),
            weights: StrengthWeights::default(),
            clash: ClashConfig::default(),
            uncertainty_band: UncertaintyBand::default(),
            auto_escalate: true,
            max_parallel_sections: default_parallel(),
        }
    }
}

impl PipelineConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.k == 0 {
            return Err("k must be at least 1".to_owned());
        }
        self.weights.check().map_err(|e| e.to_string())?;
        self.clash.check().map_err(|e| e.to_string())?;
        self.uncertainty_band.check()?;
        Ok(())
    }
}

/// Pipeline stage at which a section failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Generate,
    Build,
    ClashResolution,
    Evaluate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SectionError {
    pub claim: Claim<f64>,
    pub stage: Stage,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provider_id: Option<String>,
    pub message: String,
}

impl SectionError {
    pub fn is_provider_failure(&self) -> bool {
        self.provider_id.is_some()
    }
}

/// A fully evaluated claim section.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResolvedSection {
    pub claim: Claim<f64>,
    /// Evidence ids chosen for this claim, most relevant first.
    pub selected_evidence: Vec<String>,
    pub graph: MicroGraph<f64>,
    /// Base strengths before clash resolution, for arguments it changed.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub pre_clash_strengths: BTreeMap<String, f64>,
    pub assignment: StrengthAssignment<f64>,
    #[serde(default)]
    pub clash_records: Vec<ClashRecord>,
    pub sigma: f64,
    pub verdict: Verdict,
    pub uncertain: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub escalation: Option<EscalationOutcome>,
    #[serde(default)]
    pub notes: Vec<String>,
}

impl ResolvedSection {
    /// Verifier override when one was recorded, otherwise the score verdict.
    pub fn effective_verdict(&self) -> Verdict {
        self.escalation.as_ref().and_then(EscalationOutcome::override_verdict).unwrap_or(self.verdict)
    }

    /// Re-evaluates the current graph and refreshes sigma, verdict and the
    /// uncertain flag. Does not touch clash records or escalation.
    pub fn recompute(&mut self, weights: &StrengthWeights<f64>, band: &UncertaintyBand) -> Result<(), crate::semantics::SemanticsError> {
        let assignment = evaluate_graph(&self.graph, weights)?;
        self.sigma = assignment.get(&self.claim.claim_id).unwrap_or(self.claim.base_strength);
        let (verdict, uncertain) = verdict_of(self.sigma, band);
        self.assignment = assignment;
        self.verdict = verdict;
        self.uncertain = uncertain;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "snake_case")]
pub enum SectionResult {
    Resolved(ResolvedSection),
    Failed(SectionError),
}

impl SectionResult {
    pub fn claim(&self) -> &Claim<f64> {
        match self {
            SectionResult::Resolved(r) => &r.claim,
            SectionResult::Failed(e) => &e.claim,
        }
    }

    pub fn resolved(&self) -> Option<&ResolvedSection> {
        match self {
            SectionResult::Resolved(r) => Some(r),
            SectionResult::Failed(_) => None,
        }
    }

    pub fn resolved_mut(&mut self) -> Option<&mut ResolvedSection> {
        match self {
            SectionResult::Resolved(r) => Some(r),
            SectionResult::Failed(_) => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProviderIds {
    pub generator: String,
    pub judge: String,
    pub verifier: String,
}

/// Output of one pipeline run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerificationResult {
    pub schema_version: u32,
    pub case_id: String,
    pub config: PipelineConfig,
    pub providers: ProviderIds,
    /// Provenance of every evidence item in the case.
    pub evidence_index: BTreeMap<String, Provenance>,
    pub sections: BTreeMap<ClaimKind, SectionResult>,
}

impl VerificationResult {
    pub fn section(&self, kind: ClaimKind) -> Option<&SectionResult> {
        self.sections.get(&kind)
    }

    pub fn resolved(&self, kind: ClaimKind) -> Option<&ResolvedSection> {
        self.sections.get(&kind).and_then(SectionResult::resolved)
    }

    pub fn section_errors(&self) -> impl Iterator<Item = &SectionError> {
        self.sections.values().filter_map(|s| match s {
            SectionResult::Failed(e) => Some(e),
            SectionResult::Resolved(_) => None,
        })
    }
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid case: {}", .0.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "))]
    InvalidCase(Vec<FieldViolation>),
    #[error("invalid pipeline config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Provider(#[from] ProviderError),
}

/// One claim per kind, phrased by the generator.
pub fn decompose_claims(case: &CasePackage, generator: &dyn GeneratorProvider) -> Result<Vec<Claim<f64>>, ProviderError> {
    let drafts = generator.decompose(case)?;
    let by_kind: BTreeMap<ClaimKind, _> = drafts.into_iter().map(|d| (d.kind, d)).collect();
    ClaimKind::ALL
        .into_iter()
        .map(|kind| {
            let draft = by_kind.get(&kind).ok_or_else(|| ProviderError::Schema {
                provider: generator.id().to_owned(),
                message: format!("no `{kind}` claim produced"),
            })?;
            let mut claim = Claim::new(kind, draft.statement.clone());
            claim.low_information = draft.low_information;
            if let Some(&p) = case.claim_priors.get(&kind) {
                claim.base_strength = p;
            }
            Ok(claim)
        })
        .collect()
}

/// Turns selected evidence into cards (one per item) and the flagged
/// argument→argument relations among them.
pub fn evidence_to_arguments(
    claim: &Claim<f64>,
    items: &[EvidenceItem],
    generator: &dyn GeneratorProvider,
    weights: &StrengthWeights<f64>,
) -> Result<(Vec<ArgumentCard<f64>>, Vec<Relation>), ProviderError> {
    let mut cards = Vec::with_capacity(items.len());
    let mut card_of: BTreeMap<&str, String> = BTreeMap::new();
    let mut flagged = Vec::new();
    for (i, item) in items.iter().enumerate() {
        let draft = generator.generate(claim, item)?;
        let tau = intrinsic_strength(&draft.quality, weights)
            .map_err(|e| ProviderError::Schema { provider: generator.id().to_owned(), message: e.to_string() })?;
        let id = format!("{}-{:02}", claim.kind, i + 1);
        card_of.insert(item.evidence_id.as_str(), id.clone());
        flagged.extend(draft.relations.iter().map(|r| (id.clone(), r.clone())));
        cards.push(ArgumentCard {
            argument_id: id,
            text: draft.text,
            stance: draft.stance,
            provenance: item.provenance(),
            rationale: draft.rationale,
            base_strength: tau,
            quality: draft.quality,
            origin: CardOrigin::Generated,
            accepted: false,
        });
    }
    let mut relations: Vec<Relation> = Vec::new();
    let mut pairs = BTreeSet::new();
    for (source, rel) in flagged {
        // Targets outside this claim's selection are dropped.
        let Some(target) = card_of.get(rel.target.as_str()) else { continue };
        if *target == source {
            continue;
        }
        // Mutual flags describe one relation, not two.
        let key = if source < *target { (source.clone(), target.clone()) } else { (target.clone(), source.clone()) };
        if !pairs.insert(key) {
            continue;
        }
        relations.push(Relation { source, target: target.clone(), polarity: rel.reason.polarity(), reason: Some(rel.reason) });
    }
    Ok((cards, relations))
}

fn provider_failure(claim: &Claim<f64>, stage: Stage, err: &ProviderError) -> SectionError {
    SectionError { claim: claim.clone(), stage, provider_id: Some(err.provider().to_owned()), message: err.to_string() }
}

fn run_section(
    case: &CasePackage,
    claim: Claim<f64>,
    cfg: &PipelineConfig,
    providers: &ProviderSet,
    scorer: &dyn RelevanceScorer,
) -> SectionResult {
    let items = select_top_k(case, &claim, cfg.k, scorer);
    let selected_evidence = items.iter().map(|e| e.evidence_id.clone()).collect();
    let (cards, relations) = match evidence_to_arguments(&claim, &items, providers.generator.as_ref(), &cfg.weights) {
        Ok(v) => v,
        Err(e) => return SectionResult::Failed(provider_failure(&claim, Stage::Generate, &e)),
    };
    let graph = match build_micro_graph(claim.clone(), cards, &relations) {
        Ok(g) => g,
        Err(e) => return SectionResult::Failed(SectionError { claim, stage: Stage::Build, provider_id: None, message: e.to_string() }),
    };
    let (resolved, clash_records) = match resolve_claim(&graph, &cfg.clash, providers.judge.as_ref()) {
        Ok(v) => v,
        Err(crate::clash::ClashError::Judge(e)) => return SectionResult::Failed(provider_failure(&claim, Stage::ClashResolution, &e)),
        Err(e) => {
            return SectionResult::Failed(SectionError { claim, stage: Stage::ClashResolution, provider_id: None, message: e.to_string() })
        }
    };
    let pre_clash_strengths = graph
        .arguments
        .iter()
        .filter(|a| resolved.card(&a.argument_id).is_some_and(|b| b.base_strength != a.base_strength))
        .map(|a| (a.argument_id.clone(), a.base_strength))
        .collect();

    let mut notes = Vec::new();
    if claim.low_information {
        notes.push("Claim statement is a placeholder: the case carried no post context.".to_owned());
    }
    if resolved.arguments.is_empty() {
        notes.push("No evidence was available for this claim.".to_owned());
    }

    let mut section = ResolvedSection {
        claim: claim.clone(),
        selected_evidence,
        graph: resolved,
        pre_clash_strengths,
        assignment: StrengthAssignment { sigma: BTreeMap::new(), converged: false, iterations: 0 },
        clash_records,
        sigma: claim.base_strength,
        verdict: Verdict::Uncertain,
        uncertain: true,
        escalation: None,
        notes,
    };
    if let Err(e) = section.recompute(&cfg.weights, &cfg.uncertainty_band) {
        return SectionResult::Failed(SectionError { claim, stage: Stage::Evaluate, provider_id: None, message: e.to_string() });
    }
    if section.uncertain && cfg.auto_escalate {
        section.escalation = Some(escalate(providers.verifier.as_ref(), &section.claim, &section.graph, &section.assignment));
    }
    SectionResult::Resolved(section)
}

/// Runs the full pipeline with the default relevance scorer.
pub fn run_pipeline(case: &CasePackage, cfg: &PipelineConfig, providers: &ProviderSet) -> Result<VerificationResult, PipelineError> {
    run_pipeline_with(case, cfg, providers, &TokenOverlapScorer)
}

pub fn run_pipeline_with(
    case: &CasePackage,
    cfg: &PipelineConfig,
    providers: &ProviderSet,
    scorer: &dyn RelevanceScorer,
) -> Result<VerificationResult, PipelineError> {
    let violations = case.validate();
    if !violations.is_empty() {
        return Err(PipelineError::InvalidCase(violations));
    }
    cfg.check().map_err(PipelineError::InvalidConfig)?;
    let claims = decompose_claims(case, providers.generator.as_ref())?;
    tracing::info!(case = %case.case_id, evidence = case.evidence.len(), k = cfg.k, "running verification pipeline");

    let mut sections = BTreeMap::new();
    for chunk in claims.chunks(cfg.max_parallel_sections.max(1)) {
        let done: Vec<SectionResult> = std::thread::scope(|scope| {
            let handles: Vec<_> =
                chunk.iter().cloned().map(|claim| scope.spawn(move || run_section(case, claim, cfg, providers, scorer))).collect();
            handles.into_iter().map(|h| h.join().expect("section worker panicked")).collect()
        });
        for s in done {
            sections.insert(s.claim().kind, s);
        }
    }

    Ok(VerificationResult {
        schema_version: RESULT_SCHEMA_VERSION,
        case_id: case.case_id.clone(),
        config: cfg.clone(),
        providers: ProviderIds {
            generator: providers.generator.id().to_owned(),
            judge: providers.judge.id().to_owned(),
            verifier: providers.verifier.id().to_owned(),
        },
        evidence_index: case.evidence.iter().map(|e| (e.evidence_id.clone(), e.provenance())).collect(),
        sections,
    })
}
