//! Domain types for cases, claims, evidence, argument cards and the
//! per-claim micro-graphs, together with structural validation.
//!
//! Node ids are opaque caller-supplied strings. Inside a [`MicroGraph`] the
//! claim and its arguments share one id space.

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;
use std::str::FromStr;

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

/// Image or video.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MediaKind {
    Image,
    Video,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MediaDescriptor {
    pub kind: MediaKind,
    pub reference: String,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub technical: BTreeMap<String, String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClueKind {
    SourceLink,
    Caption,
    FactcheckNote,
}

/// External clue supplied with the case (source link, caption, fact-check note).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Clue {
    pub kind: ClueKind,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub url: Option<String>,
}

/// Where a piece of evidence was extracted from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvidenceOrigin {
    Frame,
    MetadataField,
    Ocr,
    Asr,
    ReverseSearch,
    Article,
    Clue,
}

/// The six claim-centered verification questions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClaimKind {
    What,
    Where,
    When,
    Who,
    Why,
    Authenticity,
}

impl ClaimKind {
    pub const ALL: [ClaimKind; 6] =
        [ClaimKind::What, ClaimKind::Where, ClaimKind::When, ClaimKind::Who, ClaimKind::Why, ClaimKind::Authenticity];

    pub fn as_str(self) -> &'static str {
        match self {
            ClaimKind::What => "what",
            ClaimKind::Where => "where",
            ClaimKind::When => "when",
            ClaimKind::Who => "who",
            ClaimKind::Why => "why",
            ClaimKind::Authenticity => "authenticity",
        }
    }

    /// Heading used in rendered reports.
    pub fn title(self) -> &'static str {
        match self {
            ClaimKind::What => "What",
            ClaimKind::Where => "Where",
            ClaimKind::When => "When",
            ClaimKind::Who => "Who",
            ClaimKind::Why => "Why",
            ClaimKind::Authenticity => "Authenticity",
        }
    }
}

impl fmt::Display for ClaimKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Error)]
#[error("unknown claim kind `{0}`")]
pub struct UnknownClaimKind(pub String);

impl FromStr for ClaimKind {
    type Err = UnknownClaimKind;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        ClaimKind::ALL
            .into_iter()
            .find(|k| k.as_str().eq_ignore_ascii_case(s) || (s.eq_ignore_ascii_case("auth") && *k == ClaimKind::Authenticity))
            .ok_or_else(|| UnknownClaimKind(s.to_owned()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Stance {
    Support,
    Attack,
    Neutral,
}

impl Stance {
    /// Polarity of the stance-implied argument→claim edge, if any.
    pub fn claim_polarity(self) -> Option<Polarity> {
        match self {
            Stance::Support => Some(Polarity::Support),
            Stance::Attack => Some(Polarity::Attack),
            Stance::Neutral => None,
        }
    }
}

/// Edge polarity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Polarity {
    Support,
    Attack,
}

/// The only situations in which argument→argument edges are created.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RelationReason {
    /// Two readings of the same visual cue that disagree.
    SameCueOppositeReading,
    /// Metadata contradicts a reported date or location.
    MetadataContradiction,
    /// Two independent trusted sources confirm the same fact.
    IndependentCorroboration,
}

impl RelationReason {
    pub fn polarity(self) -> Polarity {
        match self {
            RelationReason::IndependentCorroboration => Polarity::Support,
            RelationReason::SameCueOppositeReading | RelationReason::MetadataContradiction => Polarity::Attack,
        }
    }
}

/// Relation a generator may flag from one evidence item towards another,
/// scoped to a single claim kind.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnnotatedRelation {
    pub target: String,
    pub reason: RelationReason,
}

/// Structured hints attached to an evidence record for one claim kind.
///
/// Upstream extraction tools (or a human curator) may pre-label evidence;
/// the mock generator turns these labels into argument cards verbatim.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EvidenceAnnotation {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stance: Option<Stance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub quality: Option<QualityScores<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rationale: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub relations: Vec<AnnotatedRelation>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvidenceItem {
    pub evidence_id: String,
    pub origin: EvidenceOrigin,
    pub text: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub timestamp: Option<DateTime<Utc>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trust_hint: Option<f64>,
    /// Frame index, metadata key, paragraph index, ...
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locator: Option<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub annotations: BTreeMap<ClaimKind, EvidenceAnnotation>,
}

impl EvidenceItem {
    pub fn provenance(&self) -> Provenance {
        Provenance {
            evidence_id: self.evidence_id.clone(),
            source_url: self.source_url.clone(),
            source_name: self.source_name.clone(),
            locator: self.locator.clone(),
            retrieved_at: self.timestamp,
        }
    }
}

/// Normalized verification input.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CasePackage {
    pub case_id: String,
    pub media: MediaDescriptor,
    #[serde(default)]
    pub context: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub clues: Vec<Clue>,
    #[serde(default)]
    pub evidence: Vec<EvidenceItem>,
    /// Optional per-kind override of the claim base strength (default 0.5).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub claim_priors: BTreeMap<ClaimKind, f64>,
}

/// A field-level problem with an input document.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FieldViolation {
    pub field: String,
    pub message: String,
}

impl FieldViolation {
    fn new(field: impl Into<String>, message: impl Into<String>) -> Self {
        Self { field: field.into(), message: message.into() }
    }
}

impl fmt::Display for FieldViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

impl CasePackage {
    /// Checks every package invariant and returns all violations found.
    pub fn validate(&self) -> Vec<FieldViolation> {
        let mut out = Vec::new();
        if self.case_id.trim().is_empty() {
            out.push(FieldViolation::new("case_id", "case_id non-empty"));
        }
        let mut seen = BTreeSet::new();
        for (i, ev) in self.evidence.iter().enumerate() {
            let field = |f: &str| format!("evidence[{i}].{f}");
            if ev.evidence_id.trim().is_empty() {
                out.push(FieldViolation::new(field("evidence_id"), "evidence_id non-empty"));
            } else if !seen.insert(ev.evidence_id.as_str()) {
                out.push(FieldViolation::new(field("evidence_id"), format!("duplicate evidence_id `{}`", ev.evidence_id)));
            }
            if ev.text.trim().is_empty() {
                out.push(FieldViolation::new(field("text"), "text non-empty"));
            }
            if let Some(t) = ev.trust_hint {
                if !(0.0..=1.0).contains(&t) {
                    out.push(FieldViolation::new(field("trust_hint"), "trust_hint must lie in [0,1]"));
                }
            }
            for (kind, ann) in &ev.annotations {
                if let Some(q) = &ann.quality {
                    if !q.is_valid() {
                        out.push(FieldViolation::new(
                            field(&format!("annotations.{kind}.quality")),
                            "quality components must lie in [0,1]",
                        ));
                    }
                }
            }
        }
        let ids: BTreeSet<&str> = self.evidence.iter().map(|e| e.evidence_id.as_str()).collect();
        for (i, ev) in self.evidence.iter().enumerate() {
            for (kind, ann) in &ev.annotations {
                for rel in &ann.relations {
                    if !ids.contains(rel.target.as_str()) {
                        out.push(FieldViolation::new(
                            format!("evidence[{i}].annotations.{kind}.relations"),
                            format!("relation target `{}` does not resolve", rel.target),
                        ));
                    }
                }
            }
        }
        for (kind, p) in &self.claim_priors {
            if !(0.0..=1.0).contains(p) {
                out.push(FieldViolation::new(format!("claim_priors.{kind}"), "claim prior must lie in [0,1]"));
            }
        }
        out
    }

    pub fn evidence_by_id(&self, id: &str) -> Option<&EvidenceItem> {
        self.evidence.iter().find(|e| e.evidence_id == id)
    }
}

/// One claim-centered verification question.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct Claim<S> {
    pub claim_id: String,
    pub kind: ClaimKind,
    pub statement: String,
    pub base_strength: S,
    /// Set when the case offered too little context to phrase the claim.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub low_information: bool,
}

impl<S: Scalar> Claim<S> {
    pub fn new(kind: ClaimKind, statement: impl Into<String>) -> Self {
        Self { claim_id: format!("claim-{kind}"), kind, statement: statement.into(), base_strength: S::half(), low_information: false }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    pub evidence_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_url: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source_name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub locator: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub retrieved_at: Option<DateTime<Utc>>,
}

impl Provenance {
    pub fn for_evidence(evidence_id: impl Into<String>) -> Self {
        Self { evidence_id: evidence_id.into(), source_url: None, source_name: None, locator: None, retrieved_at: None }
    }
}

/// Inputs to the intrinsic strength of an argument.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct QualityScores<S> {
    /// Source reliability.
    pub src: S,
    /// Cross-source corroboration.
    pub corr: S,
    /// Cross-modal consistency.
    pub r#mod: S,
    /// Claim relevance.
    pub rel: S,
}

impl<S: Scalar> QualityScores<S> {
    pub fn new(src: S, corr: S, r#mod: S, rel: S) -> Self {
        Self { src, corr, r#mod, rel }
    }

    pub fn uniform(v: S) -> Self {
        Self::new(v, v, v, v)
    }

    pub fn is_valid(&self) -> bool {
        [self.src, self.corr, self.r#mod, self.rel].iter().all(|v| v.in_unit())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum CardOrigin {
    #[default]
    Generated,
    HumanAdded,
    HumanEdited,
}

/// One evidence-grounded argument.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ArgumentCard<S> {
    pub argument_id: String,
    pub text: String,
    pub stance: Stance,
    pub provenance: Provenance,
    pub rationale: String,
    pub base_strength: S,
    pub quality: QualityScores<S>,
    #[serde(default)]
    pub origin: CardOrigin,
    /// Set by a reviewer's Accept action; carries no score semantics.
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub accepted: bool,
}

/// Directed edge between two node ids.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Edge {
    pub source: String,
    pub target: String,
}

impl Edge {
    pub fn new(source: impl Into<String>, target: impl Into<String>) -> Self {
        Self { source: source.into(), target: target.into() }
    }
}

/// Requested argument→argument relation for [`build_micro_graph`].
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Relation {
    pub source: String,
    pub target: String,
    pub polarity: Polarity,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reason: Option<RelationReason>,
}

/// Claim-centered bipolar argument graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct MicroGraph<S> {
    pub claim: Claim<S>,
    pub arguments: Vec<ArgumentCard<S>>,
    pub supports: Vec<Edge>,
    pub attacks: Vec<Edge>,
}

impl<S: Scalar> MicroGraph<S> {
    pub fn new(claim: Claim<S>) -> Self {
        Self { claim, arguments: Vec::new(), supports: Vec::new(), attacks: Vec::new() }
    }

    pub fn node_count(&self) -> usize {
        1 + self.arguments.len()
    }

    /// Claim id first, then argument ids in card order.
    pub fn node_ids(&self) -> impl Iterator<Item = &str> {
        std::iter::once(self.claim.claim_id.as_str()).chain(self.arguments.iter().map(|a| a.argument_id.as_str()))
    }

    pub fn card(&self, id: &str) -> Option<&ArgumentCard<S>> {
        self.arguments.iter().find(|a| a.argument_id == id)
    }

    pub fn card_mut(&mut self, id: &str) -> Option<&mut ArgumentCard<S>> {
        self.arguments.iter_mut().find(|a| a.argument_id == id)
    }

    /// Base strength of any node.
    pub fn tau(&self, id: &str) -> Option<S> {
        if id == self.claim.claim_id {
            Some(self.claim.base_strength)
        } else {
            self.card(id).map(|c| c.base_strength)
        }
    }

    pub fn supporters_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.supports.iter().filter(move |e| e.target == id).map(|e| e.source.as_str())
    }

    pub fn attackers_of<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a str> + 'a {
        self.attacks.iter().filter(move |e| e.target == id).map(|e| e.source.as_str())
    }

    /// Drops the card and every incident edge. Returns false if absent.
    pub fn remove_argument(&mut self, id: &str) -> bool {
        let before = self.arguments.len();
        self.arguments.retain(|a| a.argument_id != id);
        if self.arguments.len() == before {
            return false;
        }
        self.supports.retain(|e| e.source != id && e.target != id);
        self.attacks.retain(|e| e.source != id && e.target != id);
        true
    }

    /// Argument→argument relations currently in the graph.
    pub fn argument_relations(&self) -> Vec<Relation> {
        let claim = self.claim.claim_id.as_str();
        let mk = |e: &Edge, polarity| Relation { source: e.source.clone(), target: e.target.clone(), polarity, reason: None };
        self.supports
            .iter()
            .filter(|e| e.target != claim)
            .map(|e| mk(e, Polarity::Support))
            .chain(self.attacks.iter().filter(|e| e.target != claim).map(|e| mk(e, Polarity::Attack)))
            .collect()
    }

    /// Sorts both edge lists so structurally equal graphs compare equal.
    pub fn normalize(&mut self) {
        self.supports.sort();
        self.attacks.sort();
    }

    /// Swaps the polarity of every relation into the claim, and the stance
    /// of every card with it. Argument→argument relations are kept: flipping
    /// them too changes interior scores asymmetrically once τ ≠ 0.5, so only
    /// this form mirrors σ(claim) around 0.5.
    pub fn reflected(&self) -> Self {
        let claim = self.claim.claim_id.clone();
        let mut g = self.clone();
        let (to_claim_s, keep_s): (Vec<Edge>, Vec<Edge>) = g.supports.drain(..).partition(|e| e.target == claim);
        let (to_claim_a, keep_a): (Vec<Edge>, Vec<Edge>) = g.attacks.drain(..).partition(|e| e.target == claim);
        g.supports = keep_s.into_iter().chain(to_claim_a).collect();
        g.attacks = keep_a.into_iter().chain(to_claim_s).collect();
        for card in &mut g.arguments {
            card.stance = match card.stance {
                Stance::Support => Stance::Attack,
                Stance::Attack => Stance::Support,
                Stance::Neutral => Stance::Neutral,
            };
        }
        g.normalize();
        g
    }

    /// Swaps every support edge with every attack edge, argument→argument
    /// relations included.
    pub fn reflected_wholesale(&self) -> Self {
        let mut g = self.reflected();
        let claim = self.claim.claim_id.clone();
        let (inner_s, claim_s): (Vec<Edge>, Vec<Edge>) = g.supports.drain(..).partition(|e| e.target != claim);
        let (inner_a, claim_a): (Vec<Edge>, Vec<Edge>) = g.attacks.drain(..).partition(|e| e.target != claim);
        g.supports = claim_s.into_iter().chain(inner_a).collect();
        g.attacks = claim_a.into_iter().chain(inner_s).collect();
        g.normalize();
        g
    }

    /// Node indices (0 = claim, i+1 = argument i) in an order where every
    /// node comes after all of its in-neighbours. Returns the ids left on or
    /// between cycles when no such order exists. Edges with unknown
    /// endpoints are ignored.
    pub fn topological_order(&self) -> Result<Vec<usize>, Vec<String>> {
        let index = self.index();
        let n = self.node_count();
        let mut indeg = vec![0usize; n];
        let mut out: Vec<Vec<usize>> = vec![Vec::new(); n];
        for e in self.supports.iter().chain(&self.attacks) {
            if let (Some(&s), Some(&t)) = (index.get(e.source.as_str()), index.get(e.target.as_str())) {
                indeg[t] += 1;
                out[s].push(t);
            }
        }
        // Kahn, always taking the smallest ready index for a stable order.
        let mut ready: BTreeSet<usize> = (0..n).filter(|&i| indeg[i] == 0).collect();
        let mut order = Vec::with_capacity(n);
        while let Some(i) = ready.pop_first() {
            order.push(i);
            for &t in &out[i] {
                indeg[t] -= 1;
                if indeg[t] == 0 {
                    ready.insert(t);
                }
            }
        }
        if order.len() == n {
            return Ok(order);
        }
        // Peel sinks off the remainder so only cyclic nodes are reported.
        let mut alive: Vec<bool> = vec![true; n];
        for &i in &order {
            alive[i] = false;
        }
        loop {
            let sink = (0..n).find(|&i| alive[i] && out[i].iter().all(|&t| !alive[t]));
            match sink {
                Some(i) => alive[i] = false,
                None => break,
            }
        }
        let ids: Vec<&str> = self.node_ids().collect();
        let mut left: Vec<String> = (0..n).filter(|&i| alive[i]).map(|i| ids[i].to_owned()).collect();
        left.sort();
        Err(left)
    }

    pub(crate) fn index(&self) -> HashMap<&str, usize> {
        self.node_ids().enumerate().map(|(i, id)| (id, i)).collect()
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> ValidationReport {
        validate_micro_graph(self)
    }
}

/// Which invariant a [`Violation`] breaks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    DuplicateNodeId,
    EmptyText,
    EmptyRationale,
    StrengthOutOfRange,
    DanglingEndpoint,
    ClaimOutgoingEdge,
    SelfEdge,
    DuplicateEdge,
    ConflictingEdge,
    MissingStanceEdge,
    StanceEdgeMismatch,
    NeutralClaimEdge,
    Cycle,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub rule: Rule,
    pub subject: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} ({})", self.message, self.subject)
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, rule: Rule) -> bool {
        self.violations.iter().any(|v| v.rule == rule)
    }

    fn push(&mut self, rule: Rule, subject: impl Into<String>, message: impl Into<String>) {
        self.violations.push(Violation { rule, subject: subject.into(), message: message.into() });
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.violations.iter().map(|v| v.to_string()).collect();
        f.write_str(&parts.join("; "))
    }
}

/// Returns every violated micro-graph invariant; an empty report means valid.
pub fn validate_micro_graph<S: Scalar>(graph: &MicroGraph<S>) -> ValidationReport {
    let mut report = ValidationReport::default();
    let claim_id = graph.claim.claim_id.as_str();

    if !graph.claim.base_strength.in_unit() {
        report.push(Rule::StrengthOutOfRange, claim_id, "claim base strength outside [0,1]");
    }
    let mut ids = BTreeSet::new();
    ids.insert(claim_id);
    for card in &graph.arguments {
        let id = card.argument_id.as_str();
        if !ids.insert(id) {
            report.push(Rule::DuplicateNodeId, id, "node id is not unique");
        }
        if card.text.trim().is_empty() {
            report.push(Rule::EmptyText, id, "argument text is empty");
        }
        if card.rationale.trim().is_empty() {
            report.push(Rule::EmptyRationale, id, "argument rationale is empty");
        }
        if !card.base_strength.in_unit() {
            report.push(Rule::StrengthOutOfRange, id, "argument base strength outside [0,1]");
        }
    }

    let mut seen: HashMap<(&str, &str), Polarity> = HashMap::new();
    let edges = graph.supports.iter().map(|e| (e, Polarity::Support)).chain(graph.attacks.iter().map(|e| (e, Polarity::Attack)));
    for (edge, pol) in edges {
        let subject = format!("{}->{}", edge.source, edge.target);
        let mut dangling = false;
        for end in [&edge.source, &edge.target] {
            if !ids.contains(end.as_str()) {
                report.push(Rule::DanglingEndpoint, subject.clone(), format!("edge endpoint `{end}` is not a node"));
                dangling = true;
            }
        }
        if edge.source == claim_id {
            report.push(Rule::ClaimOutgoingEdge, subject.clone(), "claim node has outgoing edge");
        }
        if edge.source == edge.target {
            report.push(Rule::SelfEdge, subject.clone(), "self edge");
        }
        match seen.get(&(edge.source.as_str(), edge.target.as_str())) {
            Some(&p) if p == pol => report.push(Rule::DuplicateEdge, subject.clone(), "duplicate edge"),
            Some(_) => report.push(Rule::ConflictingEdge, subject.clone(), "pair appears in both supports and attacks"),
            None => {
                seen.insert((edge.source.as_str(), edge.target.as_str()), pol);
            }
        }
        if !dangling && edge.target == claim_id {
            if let Some(card) = graph.card(&edge.source) {
                match card.stance.claim_polarity() {
                    None => report.push(Rule::NeutralClaimEdge, subject, "neutral argument has an edge to the claim"),
                    Some(p) if p != pol => report.push(Rule::StanceEdgeMismatch, subject, "claim edge polarity contradicts stance"),
                    Some(_) => {}
                }
            }
        }
    }

    for card in &graph.arguments {
        if let Some(pol) = card.stance.claim_polarity() {
            if !seen.contains_key(&(card.argument_id.as_str(), claim_id)) {
                let what = if pol == Polarity::Support { "support" } else { "attack" };
                report.push(
                    Rule::MissingStanceEdge,
                    card.argument_id.clone(),
                    format!("{what} argument lacks its {what} edge to the claim"),
                );
            }
        }
    }

    if let Err(cyclic) = graph.topological_order() {
        report.push(Rule::Cycle, cyclic.join(","), format!("cycle detected {{{}}}", cyclic.join(",")));
    }
    report
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("cycle detected {{{}}}", .0.join(","))]
    Cycle(Vec<String>),
    #[error("dangling reference `{0}`")]
    DanglingReference(String),
    #[error("duplicate node id `{0}`")]
    DuplicateId(String),
    #[error("relation {from}->{to} must connect two arguments")]
    InvalidRelation { from: String, to: String },
    #[error("invalid graph: {0}")]
    Invalid(ValidationReport),
}

/// Assembles a micro-graph from cards and argument→argument relations,
/// adding the stance-implied argument→claim edges.
pub fn build_micro_graph<S: Scalar>(
    claim: Claim<S>,
    cards: Vec<ArgumentCard<S>>,
    relations: &[Relation],
) -> Result<MicroGraph<S>, GraphError> {
    let mut ids = BTreeSet::new();
    ids.insert(claim.claim_id.clone());
    for card in &cards {
        if !ids.insert(card.argument_id.clone()) {
            return Err(GraphError::DuplicateId(card.argument_id.clone()));
        }
    }
    let mut graph = MicroGraph::new(claim);
    for card in &cards {
        match card.stance.claim_polarity() {
            Some(Polarity::Support) => graph.supports.push(Edge::new(&card.argument_id, &graph.claim.claim_id)),
            Some(Polarity::Attack) => graph.attacks.push(Edge::new(&card.argument_id, &graph.claim.claim_id)),
            None => {}
        }
    }
    graph.arguments = cards;
    for rel in relations {
        for end in [&rel.source, &rel.target] {
            if !ids.contains(end) {
                return Err(GraphError::DanglingReference(end.clone()));
            }
        }
        if rel.source == graph.claim.claim_id || rel.target == graph.claim.claim_id {
            return Err(GraphError::InvalidRelation { from: rel.source.clone(), to: rel.target.clone() });
        }
        let edge = Edge::new(&rel.source, &rel.target);
        let list = match rel.polarity {
            Polarity::Support => &mut graph.supports,
            Polarity::Attack => &mut graph.attacks,
        };
        if !list.contains(&edge) {
            list.push(edge);
        }
    }
    graph.normalize();
    if let Err(cyclic) = graph.topological_order() {
        return Err(GraphError::Cycle(cyclic));
    }
    let report = graph.validate();
    if !report.is_ok() {
        return Err(GraphError::Invalid(report));
    }
    Ok(graph)
}
