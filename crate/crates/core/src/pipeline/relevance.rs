//! Evidence relevance scoring and top-k selection.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::model::{CasePackage, Claim, ClaimKind, EvidenceItem};

const STOPWORDS: &[&str] = &[
    "a", "an", "and", "are", "as", "at", "be", "by", "for", "from", "has", "have", "in", "is", "it", "its", "of", "on", "or", "that",
    "the", "this", "to", "was", "were", "with", "not", "no", "post", "shown", "shows",
];

const MONTHS: &[&str] = &[
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
    "jan",
    "feb",
    "mar",
    "apr",
    "jun",
    "jul",
    "aug",
    "sep",
    "sept",
    "oct",
    "nov",
    "dec",
];

/// Extra query terms per claim kind.
pub fn kind_keywords(kind: ClaimKind) -> &'static [&'static str] {
    match kind {
        ClaimKind::What => &["event", "scene", "shows", "footage", "incident", "depicts", "crash", "fire", "explosion", "protest"],
        ClaimKind::Where => &[
            "location",
            "located",
            "city",
            "country",
            "province",
            "village",
            "landmark",
            "street",
            "geolocated",
            "coordinates",
            "gps",
            "near",
            "region",
        ],
        ClaimKind::When => &[
            "date",
            "dated",
            "time",
            "timestamp",
            "published",
            "posted",
            "uploaded",
            "recorded",
            "year",
            "day",
            "earlier",
            "before",
            "after",
        ],
        ClaimKind::Who => &[
            "people",
            "person",
            "group",
            "military",
            "army",
            "force",
            "official",
            "government",
            "spokesperson",
            "pilot",
            "aircraft",
            "operator",
            "account",
            "source",
        ],
        ClaimKind::Why => {
            &["narrative", "motive", "propaganda", "claim", "claims", "shared", "viral", "misleading", "context", "caption", "purpose"]
        }
        ClaimKind::Authenticity => &[
            "authentic",
            "edited",
            "manipulated",
            "synthetic",
            "deepfake",
            "generated",
            "recaptured",
            "cropped",
            "spliced",
            "original",
            "metadata",
            "forensic",
            "artifacts",
        ],
    }
}

/// Lower-cased alphanumeric tokens, stopwords and single characters removed.
pub fn tokens(text: &str) -> BTreeSet<String> {
    text.split(|c: char| !c.is_alphanumeric())
        .filter(|t| t.chars().count() >= 2)
        .map(str::to_lowercase)
        .filter(|t| !STOPWORDS.contains(&t.as_str()))
        .collect()
}

fn is_year(token: &str) -> bool {
    token.len() == 4 && (token.starts_with("19") || token.starts_with("20")) && token.chars().all(|c| c.is_ascii_digit())
}

/// Capitalized words that do not open a sentence.
fn toponym_like(text: &str) -> BTreeSet<String> {
    let mut out = BTreeSet::new();
    let mut sentence_start = true;
    for raw in text.split_whitespace() {
        let word: String = raw.chars().filter(|c| c.is_alphanumeric()).collect();
        if !sentence_start && word.chars().count() >= 3 && word.chars().next().is_some_and(char::is_uppercase) {
            out.insert(word.to_lowercase());
        }
        sentence_start = raw.ends_with(['.', '!', '?', ':']);
    }
    out
}

/// Pluggable relevance function.
pub trait RelevanceScorer: Send + Sync {
    fn score(&self, claim: &Claim<f64>, item: &EvidenceItem) -> f64;
}

/// Case-folded token overlap between the evidence text and the claim
/// statement plus kind keywords. When-claims also count year tokens and
/// month names; Where-claims also count capitalized place-like words.
#[derive(Debug, Clone, Copy, Default)]
pub struct TokenOverlapScorer;

impl RelevanceScorer for TokenOverlapScorer {
    fn score(&self, claim: &Claim<f64>, item: &EvidenceItem) -> f64 {
        let mut query = tokens(&claim.statement);
        query.extend(kind_keywords(claim.kind).iter().map(|s| (*s).to_owned()));
        let ev = tokens(&item.text);
        let mut hits: BTreeSet<&str> = ev.iter().filter(|t| query.contains(*t)).map(String::as_str).collect();
        match claim.kind {
            ClaimKind::When => hits.extend(ev.iter().filter(|t| is_year(t) || MONTHS.contains(&t.as_str())).map(String::as_str)),
            ClaimKind::Where => {
                let places = toponym_like(&item.text);
                hits.extend(ev.iter().filter(|t| places.contains(*t)).map(String::as_str));
            }
            _ => {}
        }
        hits.len() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelevanceScore {
    pub evidence_id: String,
    pub claim_kind: ClaimKind,
    pub score: f64,
}

/// Scores the whole pool, best first; equal scores fall back to ascending id.
pub fn rank_evidence(case: &CasePackage, claim: &Claim<f64>, scorer: &dyn RelevanceScorer) -> Vec<RelevanceScore> {
    let mut ranked: Vec<RelevanceScore> = case
        .evidence
        .iter()
        .map(|item| RelevanceScore {
            evidence_id: item.evidence_id.clone(),
            claim_kind: claim.kind,
            score: scorer.score(claim, item).max(0.0),
        })
        .collect();
    ranked
        .sort_by(|a, b| b.score.partial_cmp(&a.score).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.evidence_id.cmp(&b.evidence_id)));
    ranked
}

/// The `min(k, pool)` most relevant evidence items for a claim.
pub fn select_top_k(case: &CasePackage, claim: &Claim<f64>, k: usize, scorer: &dyn RelevanceScorer) -> Vec<EvidenceItem> {
    rank_evidence(case, claim, scorer).into_iter().take(k).filter_map(|r| case.evidence_by_id(&r.evidence_id).cloned()).collect()
}
