//! Contestable verification of image and video posts.
//!
//! A case is decomposed into six claims (authenticity, who, what, when,
//! where, why). Each claim gets its own bipolar argument graph built from the
//! case evidence, near-tied support/attack pairs are settled by a judge, and
//! the graph is scored with quadratic-energy gradual semantics. Scores map to
//! Supported / Refuted / Uncertain; uncertain sections can be escalated to a
//! verifier, and reviewers can contest any graph with a replayable log of
//! actions.
//!
//! The argumentation math ([`model`], [`semantics`], [`clash`]) is generic
//! over the scalar type; the aliases below fix it to `f64`, which is what the
//! pipeline, contestation and reports use.

pub mod canonical;
pub mod clash;
pub mod contestation;
pub mod fuzz;
pub mod model;
pub mod pipeline;
pub mod providers;
pub mod report;
pub mod scalar;
pub mod semantics;

pub use clash::{find_clashes, resolve_claim, ClashError, ClashRecord};
pub use contestation::{replay, ActionKind, ActionPayload, ContestAction, ContestError, ContestationSession, EditPayload};
pub use model::{
    build_micro_graph, validate_micro_graph, CasePackage, ClaimKind, Edge, EvidenceItem, GraphError, Polarity, Provenance, Relation,
    Stance, ValidationReport,
};
pub use pipeline::{run_pipeline, PipelineConfig, PipelineError, SectionResult, VerificationResult};
pub use providers::{ProviderError, ProviderSet, RemoteSettings};
pub use report::{build_report, render, OverallStatus, ReportFormat, UncertaintyBand, Verdict, VerificationReport};
pub use scalar::Scalar;
pub use semantics::{equilibrium_score, evaluate_graph, evaluate_graph_iterative, intrinsic_strength, quad_energy};

pub type Claim = model::Claim<f64>;
pub type Card = model::ArgumentCard<f64>;
pub type Graph = model::MicroGraph<f64>;
pub type Quality = model::QualityScores<f64>;
pub type Weights = semantics::StrengthWeights<f64>;
pub type Assignment = semantics::StrengthAssignment<f64>;
pub type ClashConfig = clash::ClashConfig<f64>;

pub type GraphF32 = model::MicroGraph<f32>;
pub type WeightsF32 = semantics::StrengthWeights<f32>;
pub type AssignmentF32 = semantics::StrengthAssignment<f32>;
