//! Deterministic providers. They never perform I/O and are pure functions
//! of their inputs, which makes end-to-end runs reproducible byte for byte.

use std::sync::OnceLock;

use regex::Regex;

use super::{
    CardDraft, ClaimDraft, GeneratorProvider, JudgeProvider, JudgeVerdict, ProviderError, ProviderKind, VerifierDecision, VerifierProvider,
    VerifierReply, Winner,
};
use crate::model::{
    ArgumentCard, CasePackage, Claim, ClaimKind, EvidenceItem, EvidenceOrigin, MediaKind, MicroGraph, QualityScores, Stance,
};
use crate::scalar::Scalar;
use crate::semantics::StrengthAssignment;

const EXCERPT_CHARS: usize = 160;

/// Templated claim phrasing plus annotation read-back for cards.
#[derive(Debug, Clone)]
pub struct MockGenerator {
    id: String,
}

impl Default for MockGenerator {
    fn default() -> Self {
        Self { id: "mock-generator".to_owned() }
    }
}

fn date_pattern() -> &'static Regex {
    static RE: OnceLock<Regex> = OnceLock::new();
    RE.get_or_init(|| {
        let month = "January|February|March|April|May|June|July|August|September|October|November|December";
        Regex::new(&format!(r"\b\d{{4}}-\d{{2}}-\d{{2}}|\b(?:{month})\s+\d{{1,2}},\s*\d{{4}}\b|\b\d{{1,2}}\s+(?:{month})\s+\d{{4}}\b"))
            .expect("static regex")
    })
}

/// First date-looking span in the technical metadata, then the context, then the clues.
pub fn find_date(case: &CasePackage) -> Option<String> {
    let re = date_pattern();
    case.media
        .technical
        .values()
        .map(String::as_str)
        .chain(std::iter::once(case.context.as_str()))
        .chain(case.clues.iter().map(|c| c.text.as_str()))
        .find_map(|text| re.find(text).map(|m| m.as_str().to_owned()))
}

fn excerpt(context: &str) -> String {
    let trimmed = context.trim();
    let end = trimmed.find(['.', '!', '?']).map(|i| i + 1).unwrap_or(trimmed.len());
    let sentence = &trimmed[..end];
    if sentence.chars().count() <= EXCERPT_CHARS {
        sentence.to_owned()
    } else {
        let cut: String = sentence.chars().take(EXCERPT_CHARS).collect();
        format!("{}...", cut.trim_end())
    }
}

fn origin_label(origin: EvidenceOrigin) -> &'static str {
    match origin {
        EvidenceOrigin::Frame => "Frame",
        EvidenceOrigin::MetadataField => "Metadata",
        EvidenceOrigin::Ocr => "OCR",
        EvidenceOrigin::Asr => "Transcript",
        EvidenceOrigin::ReverseSearch => "Reverse-search",
        EvidenceOrigin::Article => "Article",
        EvidenceOrigin::Clue => "Clue",
    }
}

impl MockGenerator {
    pub fn new(id: impl Into<String>) -> Self {
        Self { id: id.into() }
    }

    fn statement(kind: ClaimKind, media: &str, excerpt: &str, date: Option<&str>) -> String {
        match kind {
            ClaimKind::What => format!("The {media} shows the event described in the post: {excerpt}"),
            ClaimKind::Where => format!("The {media} was recorded at the location stated in the post: {excerpt}"),
            ClaimKind::When => match date {
                Some(d) => format!("The event shown in the {media} happened on {d}."),
                None => format!("The event shown in the {media} happened at the time implied by the post: {excerpt}"),
            },
            ClaimKind::Who => format!("The people, groups, or sources named in the post are the ones involved: {excerpt}"),
            ClaimKind::Why => format!("The {media} was shared to support the narrative of the post: {excerpt}"),
            ClaimKind::Authenticity => format!("The {media} is authentic: not edited, synthetic, or recaptured."),
        }
    }
}

impl GeneratorProvider for MockGenerator {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn decompose(&self, case: &CasePackage) -> Result<Vec<ClaimDraft>, ProviderError> {
        let media = match case.media.kind {
            MediaKind::Image => "image",
            MediaKind::Video => "video",
        };
        let date = find_date(case);
        let empty = case.context.trim().is_empty();
        let ex = excerpt(&case.context);
        Ok(ClaimKind::ALL
            .into_iter()
            .map(|kind| {
                let dated = kind == ClaimKind::When && date.is_some();
                if empty && !dated {
                    ClaimDraft {
                        kind,
                        statement: format!("No post context was supplied to state the {kind} claim for this {media}."),
                        low_information: true,
                    }
                } else {
                    ClaimDraft { kind, statement: Self::statement(kind, media, &ex, date.as_deref()), low_information: false }
                }
            })
            .collect())
    }

    fn generate(&self, claim: &Claim<f64>, evidence: &EvidenceItem) -> Result<CardDraft, ProviderError> {
        let ann = evidence.annotations.get(&claim.kind).cloned().unwrap_or_default();
        let source = evidence.source_name.as_deref().map(|s| format!(" from {s}")).unwrap_or_default();
        let draft = CardDraft {
            text: ann.text.unwrap_or_else(|| evidence.text.clone()),
            stance: ann.stance.unwrap_or(Stance::Neutral),
            rationale: ann
                .rationale
                .unwrap_or_else(|| format!("{} evidence{source} considered for the {} claim.", origin_label(evidence.origin), claim.kind)),
            quality: ann.quality.unwrap_or(QualityScores::uniform(0.5)),
            relations: ann.relations,
        };
        draft.check(&self.id)?;
        Ok(draft)
    }
}

/// Picks the card with the higher claim relevance; equal relevance is a tie.
#[derive(Debug, Clone)]
pub struct MockJudge {
    id: String,
}

impl Default for MockJudge {
    fn default() -> Self {
        Self { id: "mock-judge".to_owned() }
    }
}

impl<S: Scalar> JudgeProvider<S> for MockJudge {
    fn id(&self) -> &str {
        &self.id
    }

    fn judge(&self, _claim: &Claim<S>, support: &ArgumentCard<S>, attack: &ArgumentCard<S>) -> Result<JudgeVerdict, ProviderError> {
        let (s, a) = (support.quality.rel, attack.quality.rel);
        let winner = if s > a {
            Winner::Support
        } else if a > s {
            Winner::Attack
        } else {
            Winner::Tie
        };
        Ok(JudgeVerdict {
            winner,
            confidence: None,
            rationale: format!("claim relevance {:.2} vs {:.2}", s.to_f64_lossy(), a.to_f64_lossy()),
        })
    }
}

/// Always defers to human review.
#[derive(Debug, Clone)]
pub struct MockVerifier {
    id: String,
}

impl Default for MockVerifier {
    fn default() -> Self {
        Self { id: "mock-verifier".to_owned() }
    }
}

impl VerifierProvider for MockVerifier {
    fn id(&self) -> &str {
        &self.id
    }

    fn kind(&self) -> ProviderKind {
        ProviderKind::Mock
    }

    fn verify(&self, _: &Claim<f64>, _: &MicroGraph<f64>, _: &StrengthAssignment<f64>) -> Result<VerifierReply, ProviderError> {
        Ok(VerifierReply { decision: VerifierDecision::Defer, rationale: "deferred to human review".to_owned() })
    }
}
