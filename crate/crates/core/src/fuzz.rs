//! Seeded random micro-graphs and the semantics property checks run over them.

use std::fmt;

use chrono::{DateTime, Duration, Utc};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::contestation::{ContestAction, EditPayload};
use crate::model::{
    build_micro_graph, AnnotatedRelation, ArgumentCard, CardOrigin, CasePackage, Claim, ClaimKind, EvidenceAnnotation, EvidenceItem,
    EvidenceOrigin, MediaDescriptor, MediaKind, MicroGraph, Polarity, Provenance, QualityScores, Relation, RelationReason, Stance,
};
use crate::pipeline::VerificationResult;
use crate::semantics::{evaluate_graph, evaluate_graph_iterative, StrengthAssignment, StrengthWeights};

pub const MAX_FUZZ_NODES: usize = 64;
/// Tolerance for the float comparisons in the property checks.
pub const PROPERTY_TOLERANCE: f64 = 1e-9;

pub type Evaluator = fn(&MicroGraph<f64>) -> StrengthAssignment<f64>;

/// The topological evaluator with default weights.
pub fn topological(graph: &MicroGraph<f64>) -> StrengthAssignment<f64> {
    evaluate_graph(graph, &StrengthWeights::default()).expect("fuzz graphs are valid")
}

/// Deliberately wrong: leaks a little strength into every node. Only for
/// checking that the harness catches a broken evaluator.
pub fn faulty(graph: &MicroGraph<f64>) -> StrengthAssignment<f64> {
    let mut a = topological(graph);
    for v in a.sigma.values_mut() {
        *v = (*v + 1e-3).min(1.0);
    }
    a
}

fn random_tau(rng: &mut ChaCha8Rng) -> f64 {
    match rng.random_range(0..20) {
        0 => 0.0,
        1 => 1.0,
        _ => rng.random::<f64>(),
    }
}

fn random_card(rng: &mut ChaCha8Rng, id: String) -> ArgumentCard<f64> {
    let stance = match rng.random_range(0..5) {
        0 => Stance::Neutral,
        1 | 2 => Stance::Support,
        _ => Stance::Attack,
    };
    let tau = random_tau(rng);
    ArgumentCard {
        text: format!("generated argument {id}"),
        provenance: Provenance::for_evidence(format!("ev-{id}")),
        argument_id: id,
        stance,
        rationale: "generated".to_owned(),
        base_strength: tau,
        quality: QualityScores::uniform(tau),
        origin: CardOrigin::Generated,
        accepted: false,
    }
}

/// A random acyclic micro-graph with between 1 and `max_nodes` nodes
/// (claim included). Argument→argument edges only run from a later card to
/// an earlier one, which rules out cycles by construction.
pub fn random_graph(rng: &mut ChaCha8Rng, max_nodes: usize) -> MicroGraph<f64> {
    let n = rng.random_range(1..=max_nodes.max(1));
    let mut claim = Claim::new(ClaimKind::Who, "generated claim");
    if rng.random_bool(0.5) {
        claim.base_strength = random_tau(rng);
    }
    let cards: Vec<ArgumentCard<f64>> = (0..n - 1).map(|i| random_card(rng, format!("a{i:02}"))).collect();
    let mut relations = Vec::new();
    for i in 0..cards.len() {
        for j in 0..i {
            if rng.random_bool(0.25) {
                let polarity = if rng.random_bool(0.5) { Polarity::Support } else { Polarity::Attack };
                relations.push(Relation {
                    source: cards[i].argument_id.clone(),
                    target: cards[j].argument_id.clone(),
                    polarity,
                    reason: None,
                });
            }
        }
    }
    build_micro_graph(claim, cards, &relations).expect("generated graph is acyclic")
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Property {
    Boundedness,
    NeutralFixedness,
    ReflectionSymmetry,
    EvaluatorEquivalence,
    SupportMonotonicity,
}

impl fmt::Display for Property {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Property::Boundedness => "boundedness",
            Property::NeutralFixedness => "neutral fixedness",
            Property::ReflectionSymmetry => "reflection symmetry",
            Property::EvaluatorEquivalence => "evaluator equivalence",
            Property::SupportMonotonicity => "support monotonicity",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropertyViolation {
    pub property: Property,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub node: Option<String>,
    pub detail: String,
}

fn claim_at_half(graph: &MicroGraph<f64>) -> MicroGraph<f64> {
    let mut g = graph.clone();
    g.claim.base_strength = 0.5;
    g
}

fn with_leaf(graph: &MicroGraph<f64>, stance: Stance, tau: f64) -> MicroGraph<f64> {
    let mut cards = graph.arguments.clone();
    let mut leaf = cards.first().cloned().unwrap_or_else(|| {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        random_card(&mut rng, String::new())
    });
    leaf.argument_id = "leaf-added".to_owned();
    leaf.stance = stance;
    leaf.base_strength = tau;
    leaf.quality = QualityScores::uniform(tau);
    cards.push(leaf);
    build_micro_graph(graph.claim.clone(), cards, &graph.argument_relations()).expect("leaf keeps the graph acyclic")
}

fn claim_sigma(graph: &MicroGraph<f64>, eval: Evaluator) -> f64 {
    eval(graph).get(&graph.claim.claim_id).expect("claim is scored")
}

/// Boundedness, neutral fixedness and evaluator equivalence on `graph`;
/// reflection symmetry and leaf monotonicity on its τ(claim)=0.5 variant.
/// `leaf_tau` is the strength of the added leaf, in (0,1].
pub fn check_graph(graph: &MicroGraph<f64>, eval: Evaluator, leaf_tau: f64) -> Vec<PropertyViolation> {
    let mut out = Vec::new();
    let a = eval(graph);
    let reference = evaluate_graph_iterative(graph);
    for id in graph.node_ids() {
        let s = a.get(id).unwrap_or(f64::NAN);
        let tau = graph.tau(id).expect("node exists");
        if !(0.0..=1.0).contains(&s) {
            out.push(PropertyViolation { property: Property::Boundedness, node: Some(id.to_owned()), detail: format!("σ = {s}") });
        }
        let leaf = graph.supporters_of(id).next().is_none() && graph.attackers_of(id).next().is_none();
        if leaf && s != tau {
            out.push(PropertyViolation {
                property: Property::NeutralFixedness,
                node: Some(id.to_owned()),
                detail: format!("σ = {s} but τ = {tau}"),
            });
        }
        let r = reference.get(id).unwrap_or(f64::NAN);
        if !reference.converged || !((s - r).abs() < PROPERTY_TOLERANCE) {
            out.push(PropertyViolation {
                property: Property::EvaluatorEquivalence,
                node: Some(id.to_owned()),
                detail: format!("topological {s} vs iterative {r} (converged: {})", reference.converged),
            });
        }
    }

    let half = claim_at_half(graph);
    let s = claim_sigma(&half, eval);
    let mut reflections = vec![("claim relations", half.reflected())];
    if half.argument_relations().is_empty() {
        reflections.push(("wholesale", half.reflected_wholesale()));
    }
    for (how, reflected) in reflections {
        let r = claim_sigma(&reflected, eval);
        if !((s + r - 1.0).abs() < PROPERTY_TOLERANCE) {
            out.push(PropertyViolation {
                property: Property::ReflectionSymmetry,
                node: Some(half.claim.claim_id.clone()),
                detail: format!("σ = {s}, σ after {how} swap = {r}, expected {}", 1.0 - s),
            });
        }
    }

    for (stance, increase) in [(Stance::Support, true), (Stance::Attack, false)] {
        let after = claim_sigma(&with_leaf(&half, stance, leaf_tau), eval);
        let ok = if increase { after > s } else { after < s };
        if !ok {
            out.push(PropertyViolation {
                property: Property::SupportMonotonicity,
                node: Some(half.claim.claim_id.clone()),
                detail: format!("adding a {stance:?} leaf with τ = {leaf_tau} moved σ(claim) from {s} to {after}"),
            });
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FuzzConfig {
    pub nodes: usize,
    pub graphs: usize,
    pub seed: u64,
}

impl FuzzConfig {
    pub fn check(&self) -> Result<(), String> {
        if self.nodes == 0 || self.nodes > MAX_FUZZ_NODES {
            return Err(format!("--nodes must be between 1 and {MAX_FUZZ_NODES}, got {}", self.nodes));
        }
        Ok(())
    }
}

/// The first graph that broke a property.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Counterexample {
    pub seed: u64,
    pub graph_index: usize,
    pub violations: Vec<PropertyViolation>,
    pub graph: MicroGraph<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FuzzSummary {
    pub graphs_checked: usize,
    pub counterexample: Option<Counterexample>,
}

/// Checks `cfg.graphs` seeded graphs, stopping at the first violation.
pub fn run_fuzz(cfg: &FuzzConfig, eval: Evaluator) -> Result<FuzzSummary, String> {
    cfg.check()?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    for i in 0..cfg.graphs {
        let graph = random_graph(&mut rng, cfg.nodes);
        let leaf_tau = rng.random_range(0.01..=1.0);
        let violations = check_graph(&graph, eval, leaf_tau);
        if !violations.is_empty() {
            return Ok(FuzzSummary {
                graphs_checked: i + 1,
                counterexample: Some(Counterexample { seed: cfg.seed, graph_index: i, violations, graph }),
            });
        }
    }
    Ok(FuzzSummary { graphs_checked: cfg.graphs, counterexample: None })
}

const WORDS: &[&str] = &[
    "jet", "crash", "village", "caption", "frame", "footage", "Punjab", "May", "2025", "smoke", "pilot", "wreckage", "report", "upload",
    "source", "river", "bridge", "night", "protest", "crowd",
];

const ORIGINS: [EvidenceOrigin; 7] = [
    EvidenceOrigin::Frame,
    EvidenceOrigin::MetadataField,
    EvidenceOrigin::Ocr,
    EvidenceOrigin::Asr,
    EvidenceOrigin::ReverseSearch,
    EvidenceOrigin::Article,
    EvidenceOrigin::Clue,
];

fn sentence(rng: &mut ChaCha8Rng, words: usize) -> String {
    (0..words).map(|_| WORDS[rng.random_range(0..WORDS.len())]).collect::<Vec<_>>().join(" ")
}

fn random_quality(rng: &mut ChaCha8Rng) -> QualityScores<f64> {
    QualityScores::new(random_tau(rng), random_tau(rng), random_tau(rng), random_tau(rng))
}

/// A valid case with up to `max_evidence` annotated evidence items.
pub fn random_case(rng: &mut ChaCha8Rng, max_evidence: usize) -> CasePackage {
    let n = rng.random_range(0..=max_evidence);
    let ids: Vec<String> = (0..n).map(|i| format!("ev-{i:02}")).collect();
    let evidence = ids
        .iter()
        .map(|id| {
            let mut annotations = std::collections::BTreeMap::new();
            for kind in ClaimKind::ALL {
                if !rng.random_bool(0.4) {
                    continue;
                }
                let stance = match rng.random_range(0..3) {
                    0 => Stance::Support,
                    1 => Stance::Attack,
                    _ => Stance::Neutral,
                };
                let mut relations = Vec::new();
                if n > 1 && rng.random_bool(0.2) {
                    let reason = match rng.random_range(0..3) {
                        0 => RelationReason::SameCueOppositeReading,
                        1 => RelationReason::MetadataContradiction,
                        _ => RelationReason::IndependentCorroboration,
                    };
                    relations.push(AnnotatedRelation { target: ids[rng.random_range(0..n)].clone(), reason });
                }
                let ann = EvidenceAnnotation { stance: Some(stance), quality: Some(random_quality(rng)), relations, ..Default::default() };
                annotations.insert(kind, ann);
            }
            EvidenceItem {
                evidence_id: id.clone(),
                origin: ORIGINS[rng.random_range(0..ORIGINS.len())],
                text: sentence(rng, 6),
                source_url: rng.random_bool(0.3).then(|| format!("https://example.org/{id}")),
                source_name: None,
                timestamp: None,
                trust_hint: None,
                locator: None,
                annotations,
            }
        })
        .collect();
    CasePackage {
        case_id: format!("case-{:08x}", rng.random::<u32>()),
        media: MediaDescriptor { kind: MediaKind::Video, reference: "media/clip.mp4".to_owned(), technical: Default::default() },
        context: sentence(rng, 10),
        clues: Vec::new(),
        evidence,
        claim_priors: Default::default(),
    }
}

/// A contest action that is valid against `current`, or `None` when no
/// section offers anything to act on. `seq` numbers the action.
pub fn random_action(rng: &mut ChaCha8Rng, current: &VerificationResult, seq: usize) -> Option<ContestAction> {
    let kinds: Vec<ClaimKind> = ClaimKind::ALL.into_iter().filter(|k| current.resolved(*k).is_some()).collect();
    if kinds.is_empty() {
        return None;
    }
    let kind = kinds[rng.random_range(0..kinds.len())];
    let section = current.resolved(kind).expect("filtered above");
    let cards = &section.graph.arguments;
    let evidence: Vec<&String> = current.evidence_index.keys().collect();
    let can_add = !evidence.is_empty();
    if cards.is_empty() && !can_add {
        return None;
    }
    let choice = if cards.is_empty() { 3 } else { rng.random_range(0..if can_add { 4 } else { 3 }) };
    let action = match choice {
        0 => ContestAction::accept(kind, cards[rng.random_range(0..cards.len())].argument_id.clone()),
        1 => ContestAction::reject(kind, cards[rng.random_range(0..cards.len())].argument_id.clone()),
        2 => {
            let target = cards[rng.random_range(0..cards.len())].argument_id.clone();
            let mut edit = EditPayload::default();
            while edit == EditPayload::default() {
                if rng.random_bool(0.5) {
                    edit.new_tau = Some(random_tau(rng));
                }
                if rng.random_bool(0.4) {
                    edit.new_stance = Some([Stance::Support, Stance::Attack, Stance::Neutral][rng.random_range(0..3)]);
                }
                if rng.random_bool(0.3) {
                    edit.new_text = Some(sentence(rng, 5));
                }
            }
            ContestAction::edit(kind, target, edit)
        }
        _ => {
            let id = format!("human-{seq:03}");
            let tau = random_tau(rng);
            let card = ArgumentCard {
                argument_id: id.clone(),
                text: sentence(rng, 7),
                stance: [Stance::Support, Stance::Attack, Stance::Neutral][rng.random_range(0..3)],
                provenance: Provenance::for_evidence(evidence[rng.random_range(0..evidence.len())].clone()),
                rationale: "reviewer supplied".to_owned(),
                base_strength: tau,
                quality: QualityScores::uniform(tau),
                origin: CardOrigin::HumanAdded,
                accepted: false,
            };
            // Edges only leave the new card, so they cannot close a cycle.
            let mut relations = Vec::new();
            for c in cards {
                if rng.random_bool(0.3) {
                    let polarity = if rng.random_bool(0.5) { Polarity::Support } else { Polarity::Attack };
                    relations.push(Relation { source: id.clone(), target: c.argument_id.clone(), polarity, reason: None });
                }
            }
            ContestAction::add(kind, card, relations)
        }
    };
    let at = DateTime::<Utc>::UNIX_EPOCH + Duration::seconds(1_750_000_000 + seq as i64);
    Some(action.by("fuzz-reviewer", format!("act-{seq:03}"), at))
}
