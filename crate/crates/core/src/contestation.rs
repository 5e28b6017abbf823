//! Human contestation of claim graphs.
//!
//! A session holds the baseline result, an append-only log of reviewer
//! actions, and the current result, which is always `replay(baseline, log)`.
//! Each action touches exactly one claim section and re-evaluates it. Clash
//! resolution is never re-run: reviewer-set strengths are authoritative.

use chrono::{DateTime, Utc};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::canonical;
use crate::model::{build_micro_graph, ArgumentCard, CardOrigin, ClaimKind, Edge, GraphError, Relation, Stance};
use crate::pipeline::{ResolvedSection, VerificationResult};
use crate::semantics::SemanticsError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ActionKind {
    Accept,
    Reject,
    Edit,
    Add,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EditPayload {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_text: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_stance: Option<Stance>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub new_tau: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ActionPayload {
    #[default]
    None,
    Edit(EditPayload),
    Add {
        card: ArgumentCard<f64>,
        #[serde(default)]
        relations: Vec<Relation>,
    },
}

/// One reviewer action.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestAction {
    pub action_id: String,
    pub claim_kind: ClaimKind,
    pub kind: ActionKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub target: Option<String>,
    #[serde(default)]
    pub payload: ActionPayload,
    pub actor: String,
    pub at: DateTime<Utc>,
}

impl ContestAction {
    fn base(claim_kind: ClaimKind, kind: ActionKind, target: Option<String>, payload: ActionPayload) -> Self {
        Self { action_id: String::new(), claim_kind, kind, target, payload, actor: String::new(), at: DateTime::<Utc>::UNIX_EPOCH }
    }

    pub fn accept(claim_kind: ClaimKind, target: impl Into<String>) -> Self {
        Self::base(claim_kind, ActionKind::Accept, Some(target.into()), ActionPayload::None)
    }

    pub fn reject(claim_kind: ClaimKind, target: impl Into<String>) -> Self {
        Self::base(claim_kind, ActionKind::Reject, Some(target.into()), ActionPayload::None)
    }

    pub fn edit(claim_kind: ClaimKind, target: impl Into<String>, edit: EditPayload) -> Self {
        Self::base(claim_kind, ActionKind::Edit, Some(target.into()), ActionPayload::Edit(edit))
    }

    pub fn add(claim_kind: ClaimKind, card: ArgumentCard<f64>, relations: Vec<Relation>) -> Self {
        Self::base(claim_kind, ActionKind::Add, None, ActionPayload::Add { card, relations })
    }

    pub fn by(mut self, actor: impl Into<String>, action_id: impl Into<String>, at: DateTime<Utc>) -> Self {
        self.actor = actor.into();
        self.action_id = action_id.into();
        self.at = at;
        self
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ContestError {
    #[error("unknown target `{target}` in the {claim_kind} graph")]
    UnknownTarget { claim_kind: ClaimKind, target: String },
    #[error("invalid edit: {0}")]
    InvalidEdit(String),
    #[error("invalid action: {0}")]
    InvalidAction(String),
    #[error("provenance must resolve: evidence `{0}` is not in the case")]
    UnresolvedProvenance(String),
    #[error("argument id `{0}` already exists")]
    DuplicateId(String),
    #[error("cycle detected {{{}}}", .0.join(","))]
    Cycle(Vec<String>),
    #[error("section {0} has no resolved graph to contest")]
    SectionUnavailable(ClaimKind),
    #[error(transparent)]
    Graph(GraphError),
    #[error(transparent)]
    Semantics(#[from] SemanticsError),
}

impl From<GraphError> for ContestError {
    fn from(e: GraphError) -> Self {
        match e {
            GraphError::Cycle(ids) => ContestError::Cycle(ids),
            GraphError::DuplicateId(id) => ContestError::DuplicateId(id),
            other => ContestError::Graph(other),
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("action {index} is invalid: {error}")]
pub struct ReplayError {
    pub index: usize,
    pub error: ContestError,
}

fn target<'a>(action: &'a ContestAction, section: &ResolvedSection) -> Result<&'a str, ContestError> {
    let t = action.target.as_deref().ok_or_else(|| ContestError::InvalidAction(format!("{:?} requires a target", action.kind)))?;
    if section.graph.card(t).is_none() {
        return Err(ContestError::UnknownTarget { claim_kind: action.claim_kind, target: t.to_owned() });
    }
    Ok(t)
}

fn rewire_claim_edge(section: &mut ResolvedSection, id: &str, stance: Stance) {
    let claim = section.claim.claim_id.clone();
    let g = &mut section.graph;
    g.supports.retain(|e| !(e.source == id && e.target == claim));
    g.attacks.retain(|e| !(e.source == id && e.target == claim));
    match stance {
        Stance::Support => g.supports.push(Edge::new(id, &claim)),
        Stance::Attack => g.attacks.push(Edge::new(id, &claim)),
        Stance::Neutral => {}
    }
}

/// Applies one action to a result, returning the updated result.
pub fn apply_to_result(result: &VerificationResult, action: &ContestAction) -> Result<VerificationResult, ContestError> {
    let mut next = result.clone();
    let weights = next.config.weights;
    let band = next.config.uncertainty_band;
    let evidence_known = |id: &str| result.evidence_index.contains_key(id);
    let section = next
        .sections
        .get_mut(&action.claim_kind)
        .and_then(|s| s.resolved_mut())
        .ok_or(ContestError::SectionUnavailable(action.claim_kind))?;

    match action.kind {
        ActionKind::Accept => {
            let t = target(action, section)?.to_owned();
            section.graph.card_mut(&t).expect("target checked").accepted = true;
            return Ok(next);
        }
        ActionKind::Reject => {
            let t = target(action, section)?.to_owned();
            if action.payload != ActionPayload::None {
                return Err(ContestError::InvalidAction("reject takes no payload".to_owned()));
            }
            section.graph.remove_argument(&t);
            section.clash_records.retain(|c| c.support_id != t && c.attack_id != t);
            section.pre_clash_strengths.remove(&t);
        }
        ActionKind::Edit => {
            let t = target(action, section)?.to_owned();
            let ActionPayload::Edit(edit) = &action.payload else {
                return Err(ContestError::InvalidEdit("edit requires an edit payload".to_owned()));
            };
            if edit.new_text.is_none() && edit.new_stance.is_none() && edit.new_tau.is_none() {
                return Err(ContestError::InvalidEdit("edit changes nothing".to_owned()));
            }
            if let Some(tau) = edit.new_tau {
                if !(0.0..=1.0).contains(&tau) {
                    return Err(ContestError::InvalidEdit(format!("tau {tau} outside [0,1]")));
                }
            }
            if edit.new_text.as_deref().is_some_and(|s| s.trim().is_empty()) {
                return Err(ContestError::InvalidEdit("text must be non-empty".to_owned()));
            }
            let card = section.graph.card_mut(&t).expect("target checked");
            if let Some(text) = &edit.new_text {
                card.text = text.clone();
            }
            if let Some(tau) = edit.new_tau {
                card.base_strength = tau;
            }
            if card.origin == CardOrigin::Generated {
                card.origin = CardOrigin::HumanEdited;
            }
            if let Some(stance) = edit.new_stance {
                card.stance = stance;
                rewire_claim_edge(section, &t, stance);
            }
        }
        ActionKind::Add => {
            if action.target.is_some() {
                return Err(ContestError::InvalidAction("add takes no target".to_owned()));
            }
            let ActionPayload::Add { card, relations } = &action.payload else {
                return Err(ContestError::InvalidAction("add requires a card payload".to_owned()));
            };
            if !evidence_known(&card.provenance.evidence_id) {
                return Err(ContestError::UnresolvedProvenance(card.provenance.evidence_id.clone()));
            }
            if !(0.0..=1.0).contains(&card.base_strength) || !card.quality.is_valid() {
                return Err(ContestError::InvalidAction("card strengths must lie in [0,1]".to_owned()));
            }
            if card.text.trim().is_empty() || card.rationale.trim().is_empty() {
                return Err(ContestError::InvalidAction("card text and rationale must be non-empty".to_owned()));
            }
            let mut card = card.clone();
            card.origin = CardOrigin::HumanAdded;
            let mut cards = section.graph.arguments.clone();
            cards.push(card);
            let mut rels = section.graph.argument_relations();
            rels.extend(relations.iter().cloned());
            section.graph = build_micro_graph(section.claim.clone(), cards, &rels)?;
        }
    }

    section.graph.normalize();
    let report = section.graph.validate();
    if !report.is_ok() {
        return Err(ContestError::Graph(GraphError::Invalid(report)));
    }
    section.recompute(&weights, &band)?;
    if section.escalation.take().is_some() {
        section.notes.push(format!("Escalation outcome cleared by contest action {}.", action.action_id));
    }
    Ok(next)
}

/// Folds the log over the baseline.
pub fn replay(baseline: &VerificationResult, log: &[ContestAction]) -> Result<VerificationResult, ReplayError> {
    log.iter()
        .enumerate()
        .try_fold(baseline.clone(), |acc, (index, action)| apply_to_result(&acc, action).map_err(|error| ReplayError { index, error }))
}

/// Where a stored session disagrees with its recomputation.
#[derive(Debug, Clone, PartialEq)]
pub struct Divergence {
    pub stored_digest: String,
    pub recomputed_digest: String,
    /// First claim kind whose section differs, if the difference is in a section.
    pub first_section: Option<ClaimKind>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContestationSession {
    pub session_id: String,
    pub case_id: String,
    pub baseline: VerificationResult,
    pub log: Vec<ContestAction>,
    pub current: VerificationResult,
    /// Digest of the canonical JSON of `current`.
    pub current_digest: String,
}

impl ContestationSession {
    pub fn new(session_id: impl Into<String>, baseline: VerificationResult) -> Self {
        let current_digest = canonical::digest(&baseline).expect("result serializes");
        Self {
            session_id: session_id.into(),
            case_id: baseline.case_id.clone(),
            current: baseline.clone(),
            baseline,
            log: Vec::new(),
            current_digest,
        }
    }

    /// Applies an action and appends it to the log; the session is left
    /// untouched on error.
    pub fn apply_action(&self, action: ContestAction) -> Result<Self, ContestError> {
        let current = apply_to_result(&self.current, &action)?;
        let mut next = self.clone();
        next.current_digest = canonical::digest(&current).expect("result serializes");
        next.current = current;
        next.log.push(action);
        Ok(next)
    }

    /// Recomputes `replay(baseline, log)` and compares digests with the stored current.
    pub fn check_replay(&self) -> Result<Result<(), Divergence>, ReplayError> {
        let recomputed = replay(&self.baseline, &self.log)?;
        let recomputed_digest = canonical::digest(&recomputed).expect("result serializes");
        let stored_digest = canonical::digest(&self.current).expect("result serializes");
        if recomputed_digest == stored_digest && stored_digest == self.current_digest {
            return Ok(Ok(()));
        }
        let first_section = ClaimKind::ALL.into_iter().find(|k| {
            let a = self.current.sections.get(k).map(|s| canonical::digest(s).expect("section serializes"));
            let b = recomputed.sections.get(k).map(|s| canonical::digest(s).expect("section serializes"));
            a != b
        });
        Ok(Err(Divergence { stored_digest, recomputed_digest, first_section }))
    }

    pub fn to_json(&self) -> String {
        canonical::to_string(self, canonical::FloatStyle::Exact).expect("session serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(text)
    }
}

#[cfg(test)]
mod tests {
    use std::collections::BTreeMap;

    use super::*;
    use crate::model::tests::card;
    use crate::model::{Claim, MicroGraph, Provenance};
    use crate::pipeline::{PipelineConfig, ProviderIds, SectionResult};
    use crate::report::Verdict;
    use crate::semantics::evaluate_graph;
    use approx::assert_abs_diff_eq;

    fn result_with(cards: Vec<ArgumentCard<f64>>) -> VerificationResult {
        let cfg = PipelineConfig::default();
        let mut sections = BTreeMap::new();
        for kind in ClaimKind::ALL {
            let claim = Claim::new(kind, format!("{kind} claim"));
            let cards = if kind == ClaimKind::Who { cards.clone() } else { vec![] };
            let graph = build_micro_graph(claim.clone(), cards, &[]).unwrap();
            let mut s = ResolvedSection {
                claim,
                selected_evidence: vec![],
                graph,
                pre_clash_strengths: BTreeMap::new(),
                assignment: evaluate_graph(&MicroGraph::new(Claim::new(kind, "x")), &cfg.weights).unwrap(),
                clash_records: vec![],
                sigma: 0.5,
                verdict: Verdict::Uncertain,
                uncertain: true,
                escalation: None,
                notes: vec![],
            };
            s.recompute(&cfg.weights, &cfg.uncertainty_band).unwrap();
            sections.insert(kind, SectionResult::Resolved(s));
        }
        let evidence_index = ["ev-s", "ev-t", "ev-new"].iter().map(|id| (id.to_string(), Provenance::for_evidence(*id))).collect();
        VerificationResult {
            schema_version: 1,
            case_id: "case".into(),
            config: cfg,
            providers: ProviderIds { generator: "g".into(), judge: "j".into(), verifier: "v".into() },
            evidence_index,
            sections,
        }
    }

    fn who_sigma(r: &VerificationResult) -> f64 {
        r.resolved(ClaimKind::Who).unwrap().sigma
    }

    #[test]
    fn reject_sole_support_returns_to_neutral() {
        let base = result_with(vec![card("s", Stance::Support, 0.8)]);
        assert_abs_diff_eq!(who_sigma(&base), 0.695_121_951_219_512_1, epsilon = 1e-9);
        let after = apply_to_result(&base, &ContestAction::reject(ClaimKind::Who, "s")).unwrap();
        assert_eq!(who_sigma(&after), 0.5);
        assert_eq!(after.resolved(ClaimKind::Who).unwrap().verdict, Verdict::Uncertain);
    }

    #[test]
    fn accept_is_metadata_only() {
        let base = result_with(vec![card("s", Stance::Support, 0.8)]);
        let after = apply_to_result(&base, &ContestAction::accept(ClaimKind::Who, "s")).unwrap();
        let (a, b) = (base.resolved(ClaimKind::Who).unwrap(), after.resolved(ClaimKind::Who).unwrap());
        assert_eq!(a.assignment, b.assignment);
        assert!(b.graph.card("s").unwrap().accepted);
    }

    #[test]
    fn edit_tau_to_zero() {
        let base = result_with(vec![card("s", Stance::Support, 0.8)]);
        let edit = EditPayload { new_tau: Some(0.0), ..Default::default() };
        let after = apply_to_result(&base, &ContestAction::edit(ClaimKind::Who, "s", edit)).unwrap();
        assert_eq!(who_sigma(&after), 0.5);
        assert_eq!(after.resolved(ClaimKind::Who).unwrap().graph.card("s").unwrap().origin, CardOrigin::HumanEdited);
    }

    #[test]
    fn edit_stance_rewires() {
        let base = result_with(vec![card("s", Stance::Support, 0.8)]);
        let edit = EditPayload { new_stance: Some(Stance::Attack), ..Default::default() };
        let after = apply_to_result(&base, &ContestAction::edit(ClaimKind::Who, "s", edit)).unwrap();
        let g = &after.resolved(ClaimKind::Who).unwrap().graph;
        assert!(g.supports.is_empty());
        assert_eq!(g.attacks, vec![Edge::new("s", "claim-who")]);
        assert_abs_diff_eq!(who_sigma(&after), 1.0 - 0.695_121_951_219_512_1, epsilon = 1e-12);
    }

    #[test]
    fn invalid_actions() {
        let base = result_with(vec![card("s", Stance::Support, 0.8)]);
        assert!(matches!(apply_to_result(&base, &ContestAction::reject(ClaimKind::Who, "ghost")), Err(ContestError::UnknownTarget { .. })));
        let bad = EditPayload { new_tau: Some(1.5), ..Default::default() };
        assert!(matches!(apply_to_result(&base, &ContestAction::edit(ClaimKind::Who, "s", bad)), Err(ContestError::InvalidEdit(_))));
        assert!(matches!(
            apply_to_result(&base, &ContestAction::edit(ClaimKind::Who, "s", EditPayload::default())),
            Err(ContestError::InvalidEdit(_))
        ));

        let mut stray = card("n", Stance::Attack, 0.4);
        stray.provenance = Provenance::for_evidence("nowhere");
        assert!(matches!(
            apply_to_result(&base, &ContestAction::add(ClaimKind::Who, stray, vec![])),
            Err(ContestError::UnresolvedProvenance(_))
        ));
        let mut dup = card("s", Stance::Attack, 0.4);
        dup.provenance = Provenance::for_evidence("ev-new");
        assert!(matches!(apply_to_result(&base, &ContestAction::add(ClaimKind::Who, dup, vec![])), Err(ContestError::DuplicateId(_))));
    }

    #[test]
    fn add_with_cycle_rejected() {
        use crate::model::Polarity;
        let base = result_with(vec![card("s", Stance::Support, 0.8), card("t", Stance::Attack, 0.6)]);
        let step = apply_to_result(
            &base,
            &ContestAction::add(
                ClaimKind::Who,
                {
                    let mut c = card("n", Stance::Attack, 0.4);
                    c.provenance = Provenance::for_evidence("ev-new");
                    c
                },
                vec![Relation { source: "n".into(), target: "s".into(), polarity: Polarity::Attack, reason: None }],
            ),
        )
        .unwrap();
        assert_eq!(step.resolved(ClaimKind::Who).unwrap().graph.card("n").unwrap().origin, CardOrigin::HumanAdded);
        let mut c2 = card("m", Stance::Neutral, 0.4);
        c2.provenance = Provenance::for_evidence("ev-new");
        let err = apply_to_result(
            &step,
            &ContestAction::add(
                ClaimKind::Who,
                c2,
                vec![
                    Relation { source: "m".into(), target: "n".into(), polarity: Polarity::Support, reason: None },
                    Relation { source: "s".into(), target: "m".into(), polarity: Polarity::Support, reason: None },
                ],
            ),
        )
        .unwrap_err();
        assert_eq!(err, ContestError::Cycle(vec!["m".into(), "n".into(), "s".into()]));
    }

    #[test]
    fn session_replay_and_tamper_detection() {
        let base = result_with(vec![card("s", Stance::Support, 0.8), card("t", Stance::Attack, 0.6)]);
        let s0 = ContestationSession::new("sess", base);
        assert_eq!(s0.check_replay().unwrap(), Ok(()));
        let s1 = s0.apply_action(ContestAction::reject(ClaimKind::Who, "t")).unwrap();
        let s2 = s1.apply_action(ContestAction::accept(ClaimKind::Who, "s")).unwrap();
        assert_eq!(s2.log.len(), 2);
        assert_eq!(s2.check_replay().unwrap(), Ok(()));

        let reloaded = ContestationSession::from_json(&s2.to_json()).unwrap();
        assert_eq!(reloaded, s2);
        assert_eq!(reloaded.check_replay().unwrap(), Ok(()));

        let mut tampered = s2.clone();
        if let Some(SectionResult::Resolved(r)) = tampered.current.sections.get_mut(&ClaimKind::Who) {
            r.sigma = 0.9;
        }
        let div = tampered.check_replay().unwrap().unwrap_err();
        assert_eq!(div.first_section, Some(ClaimKind::Who));

        // failed action leaves the session as it was
        assert!(s2.apply_action(ContestAction::reject(ClaimKind::Who, "t")).is_err());
        assert_eq!(s2.log.len(), 2);
    }

    #[test]
    fn locality() {
        let base = result_with(vec![card("s", Stance::Support, 0.8)]);
        let after = apply_to_result(&base, &ContestAction::reject(ClaimKind::Who, "s")).unwrap();
        for k in ClaimKind::ALL.into_iter().filter(|k| *k != ClaimKind::Who) {
            assert_eq!(base.sections[&k], after.sections[&k]);
        }
    }
}
