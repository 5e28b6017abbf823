//! Quadratic-energy gradual semantics over micro-graphs.
//!
//! A node's strength is its base score pushed up by positive incoming energy
//! (supporters outweigh attackers) and pulled down by negative energy:
//!
//! ```text
//! E(x)  = Σ σ(supporters) − Σ σ(attackers)
//! h(x)  = max(x,0)² / (1 + max(x,0)²)
//! σ(x)  = τ + (1 − τ)·h(E) − τ·h(−E)
//! ```
//!
//! Graphs are acyclic, so a single pass in topological order reaches the
//! fixed point. [`evaluate_graph_iterative`] computes the same fixed point by
//! Jacobi sweeps and serves as the reference evaluator.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MicroGraph, QualityScores, ValidationReport};
use crate::scalar::Scalar;

/// Absolute tolerance on the weight sum.
pub const WEIGHT_SUM_TOLERANCE: f64 = 1e-9;
/// Stopping threshold for the iterative evaluator.
pub const ITERATIVE_TOLERANCE: f64 = 1e-9;
pub const ITERATIVE_MAX_SWEEPS: usize = 10_000;

/// Mixing weights of the four quality criteria.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StrengthWeights<S> {
    pub lambda_src: S,
    pub lambda_corr: S,
    pub lambda_mod: S,
    pub lambda_rel: S,
}

impl<S: Scalar> Default for StrengthWeights<S> {
    fn default() -> Self {
        let q = S::lit(0.25);
        Self { lambda_src: q, lambda_corr: q, lambda_mod: q, lambda_rel: q }
    }
}

impl<S: Scalar> StrengthWeights<S> {
    pub fn new(lambda_src: S, lambda_corr: S, lambda_mod: S, lambda_rel: S) -> Result<Self, SemanticsError> {
        let w = Self { lambda_src, lambda_corr, lambda_mod, lambda_rel };
        w.check()?;
        Ok(w)
    }

    fn as_array(&self) -> [S; 4] {
        [self.lambda_src, self.lambda_corr, self.lambda_mod, self.lambda_rel]
    }

    pub fn check(&self) -> Result<(), SemanticsError> {
        let parts = self.as_array();
        if parts.iter().any(|l| !l.in_unit()) {
            return Err(SemanticsError::Weight(format!("each weight must lie in [0,1], got {parts:?}")));
        }
        let sum: S = parts.iter().copied().sum();
        // f32 cannot resolve 1e-9 around 1.0, so widen before comparing.
        if (sum.to_f64_lossy() - 1.0).abs() > WEIGHT_SUM_TOLERANCE.max(S::epsilon().to_f64_lossy() * 4.0) {
            return Err(SemanticsError::Weight(format!("weights must sum to 1, got {sum}")));
        }
        Ok(())
    }
}

/// Per-node equilibrium scores.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct StrengthAssignment<S> {
    pub sigma: BTreeMap<String, S>,
    pub converged: bool,
    pub iterations: usize,
}

impl<S: Scalar> StrengthAssignment<S> {
    pub fn get(&self, id: &str) -> Option<S> {
        self.sigma.get(id).copied()
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SemanticsError {
    #[error("weight error: {0}")]
    Weight(String),
    #[error("in-neighbour `{0}` has no score yet")]
    MissingScore(String),
    #[error("invalid graph: {0}")]
    InvalidGraph(ValidationReport),
}

/// Weighted sum of the quality criteria.
pub fn intrinsic_strength<S: Scalar>(q: &QualityScores<S>, w: &StrengthWeights<S>) -> Result<S, SemanticsError> {
    w.check()?;
    let tau = w.lambda_src * q.src + w.lambda_corr * q.corr + w.lambda_mod * q.r#mod + w.lambda_rel * q.rel;
    Ok(tau.clamp_unit())
}

/// Sum of supporter scores minus sum of attacker scores.
pub fn energy<S: Scalar>(node: &str, graph: &MicroGraph<S>, sigma: &BTreeMap<String, S>) -> Result<S, SemanticsError> {
    let lookup = |id: &str| sigma.get(id).copied().ok_or_else(|| SemanticsError::MissingScore(id.to_owned()));
    let mut e = S::zero();
    for s in graph.supporters_of(node) {
        e = e + lookup(s)?;
    }
    for a in graph.attackers_of(node) {
        e = e - lookup(a)?;
    }
    Ok(e)
}

/// Quadratic energy `max(x,0)² / (1 + max(x,0)²)`.
#[inline]
pub fn quad_energy<S: Scalar>(x: S) -> S {
    let p = x.max(S::zero());
    let sq = p * p;
    sq / (S::one() + sq)
}

/// Combines a base strength with incoming energy.
#[inline]
pub fn equilibrium_score<S: Scalar>(tau: S, e: S) -> S {
    let up = (S::one() - tau) * quad_energy(e);
    let down = tau * quad_energy(-e);
    // Each term stays within its side of tau, so the clamp only absorbs rounding.
    (tau + up - down).clamp_unit()
}

fn checked<S: Scalar>(graph: &MicroGraph<S>) -> Result<(), SemanticsError> {
    let report = graph.validate();
    if report.is_ok() {
        Ok(())
    } else {
        Err(SemanticsError::InvalidGraph(report))
    }
}

/// Evaluates every node once in topological order of the in-edge relation.
pub fn evaluate_graph<S: Scalar>(graph: &MicroGraph<S>, weights: &StrengthWeights<S>) -> Result<StrengthAssignment<S>, SemanticsError> {
    weights.check()?;
    checked(graph)?;
    let order = graph.topological_order().map_err(|_| SemanticsError::InvalidGraph(graph.validate()))?;
    let ids: Vec<&str> = graph.node_ids().collect();
    let mut sigma = BTreeMap::new();
    for i in order {
        let id = ids[i];
        let tau = graph.tau(id).expect("node id comes from the graph");
        let e = energy(id, graph, &sigma)?;
        sigma.insert(id.to_owned(), equilibrium_score(tau, e));
    }
    Ok(StrengthAssignment { sigma, converged: true, iterations: 1 })
}

/// Reference evaluator: Jacobi sweeps from σ⁰ = τ until the largest
/// per-node change drops below [`ITERATIVE_TOLERANCE`].
///
/// Unlike [`evaluate_graph`] this does not require acyclicity; on cyclic
/// input it may stop at the sweep cap with `converged = false`.
pub fn evaluate_graph_iterative<S: Scalar>(graph: &MicroGraph<S>) -> StrengthAssignment<S> {
    let ids: Vec<String> = graph.node_ids().map(str::to_owned).collect();
    let taus: Vec<S> = ids.iter().map(|id| graph.tau(id).unwrap_or_else(S::half)).collect();
    let mut sigma: BTreeMap<String, S> = ids.iter().cloned().zip(taus.iter().copied()).collect();
    let tol = S::lit(ITERATIVE_TOLERANCE);
    for sweep in 1..=ITERATIVE_MAX_SWEEPS {
        let mut next = BTreeMap::new();
        let mut delta = S::zero();
        for (id, &tau) in ids.iter().zip(&taus) {
            let e = energy(id, graph, &sigma).unwrap_or_else(|_| S::zero());
            let s = equilibrium_score(tau, e);
            delta = delta.max((s - sigma[id]).abs());
            next.insert(id.clone(), s);
        }
        sigma = next;
        if delta < tol {
            return StrengthAssignment { sigma, converged: true, iterations: sweep };
        }
    }
    StrengthAssignment { sigma, converged: false, iterations: ITERATIVE_MAX_SWEEPS }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::card;
    use crate::model::{build_micro_graph, Claim, ClaimKind, Stance};
    use approx::assert_abs_diff_eq;

    const TOL: f64 = 1e-9;

    #[test]
    fn intrinsic_strength_examples() {
        let eq = StrengthWeights::<f64>::default();
        assert_abs_diff_eq!(intrinsic_strength(&QualityScores::uniform(0.8), &eq).unwrap(), 0.8, epsilon = TOL);
        let w = StrengthWeights::new(0.4, 0.3, 0.2, 0.1).unwrap();
        assert_abs_diff_eq!(intrinsic_strength(&QualityScores::new(1.0, 0.5, 0.5, 0.0), &w).unwrap(), 0.65, epsilon = TOL);
        assert_eq!(intrinsic_strength(&QualityScores::uniform(0.0), &w).unwrap(), 0.0);
    }

    #[test]
    fn weights_must_sum_to_one() {
        assert!(matches!(StrengthWeights::new(0.5, 0.5, 0.5, 0.0), Err(SemanticsError::Weight(_))));
        assert!(matches!(StrengthWeights::new(1.2, -0.2, 0.0, 0.0), Err(SemanticsError::Weight(_))));
        let bad = StrengthWeights { lambda_src: 0.3, lambda_corr: 0.3, lambda_mod: 0.3, lambda_rel: 0.3 };
        assert!(intrinsic_strength(&QualityScores::uniform(0.5), &bad).is_err());
    }

    #[test]
    fn quad_energy_examples() {
        assert_eq!(quad_energy(0.0f64), 0.0);
        assert_eq!(quad_energy(-5.0f64), 0.0);
        assert_abs_diff_eq!(quad_energy(1.0f64), 0.5, epsilon = TOL);
        assert_abs_diff_eq!(quad_energy(0.8f64), 0.390_243_902_439_024_4, epsilon = TOL);
        assert!(quad_energy(1e6f64) < 1.0);
    }

    #[test]
    fn equilibrium_examples() {
        assert_eq!(equilibrium_score(0.5f64, 0.0), 0.5);
        assert_abs_diff_eq!(equilibrium_score(0.5f64, 0.8), 0.695_121_951_219_512_1, epsilon = TOL);
        assert_abs_diff_eq!(equilibrium_score(0.5f64, -1.32), 0.182_322_053_675_612_6, epsilon = TOL);
    }

    #[test]
    fn energy_examples() {
        let claim = Claim::new(ClaimKind::Who, "c");
        let g = build_micro_graph(
            claim,
            vec![card("s", Stance::Support, 0.6), card("t1", Stance::Attack, 0.95), card("t2", Stance::Attack, 0.97)],
            &[],
        )
        .unwrap();
        let mut sigma = BTreeMap::new();
        assert!(matches!(energy("claim-who", &g, &sigma), Err(SemanticsError::MissingScore(_))));
        assert_eq!(energy("s", &g, &sigma).unwrap(), 0.0);
        sigma.insert("s".to_owned(), 0.6);
        sigma.insert("t1".to_owned(), 0.95);
        sigma.insert("t2".to_owned(), 0.97);
        assert_abs_diff_eq!(energy("claim-who", &g, &sigma).unwrap(), -1.32, epsilon = TOL);
    }

    #[test]
    fn evaluate_examples() {
        let w = StrengthWeights::default();
        let empty = build_micro_graph(Claim::new(ClaimKind::What, "c"), vec![], &[]).unwrap();
        assert_eq!(evaluate_graph(&empty, &w).unwrap().get("claim-what"), Some(0.5));

        let one = build_micro_graph(Claim::new(ClaimKind::What, "c"), vec![card("a", Stance::Support, 0.8)], &[]).unwrap();
        let s = evaluate_graph(&one, &w).unwrap();
        assert_abs_diff_eq!(s.get("claim-what").unwrap(), 0.695_121_951_219_512_1, epsilon = TOL);
        assert_eq!(s.get("a"), Some(0.8));
        assert!(s.converged);
        assert_eq!(s.iterations, 1);

        let sym =
            build_micro_graph(Claim::new(ClaimKind::What, "c"), vec![card("a", Stance::Support, 0.9), card("b", Stance::Attack, 0.9)], &[])
                .unwrap();
        assert_eq!(evaluate_graph(&sym, &w).unwrap().get("claim-what"), Some(0.5));
    }

    #[test]
    fn f32_path_matches_within_single_precision() {
        let claim = Claim::<f32>::new(ClaimKind::Who, "c");
        let mut g = MicroGraph::new(claim);
        let mut c = card("a", Stance::Support, 0.8);
        c.base_strength = 0.8;
        let c32 = crate::model::ArgumentCard::<f32> {
            argument_id: c.argument_id,
            text: c.text,
            stance: c.stance,
            provenance: c.provenance,
            rationale: c.rationale,
            base_strength: 0.8,
            quality: QualityScores::uniform(0.8),
            origin: c.origin,
            accepted: false,
        };
        g.arguments.push(c32);
        g.supports.push(crate::model::Edge::new("a", "claim-who"));
        let s = evaluate_graph(&g, &StrengthWeights::default()).unwrap();
        assert!((s.get("claim-who").unwrap() - 0.695_122f32).abs() < 1e-6);
    }

    #[test]
    fn invalid_graph_is_rejected() {
        let mut g = build_micro_graph(Claim::new(ClaimKind::What, "c"), vec![card("a", Stance::Support, 0.8)], &[]).unwrap();
        g.supports.push(crate::model::Edge::new("claim-what", "a"));
        assert!(matches!(evaluate_graph(&g, &StrengthWeights::default()), Err(SemanticsError::InvalidGraph(_))));
    }

    #[test]
    fn iterative_agrees_on_chain() {
        let g = build_micro_graph(
            Claim::new(ClaimKind::When, "c"),
            vec![card("a", Stance::Support, 0.7), card("b", Stance::Attack, 0.4), card("c", Stance::Neutral, 0.9)],
            &[crate::model::Relation { source: "c".into(), target: "b".into(), polarity: crate::model::Polarity::Support, reason: None }],
        )
        .unwrap();
        let top = evaluate_graph(&g, &StrengthWeights::default()).unwrap();
        let it = evaluate_graph_iterative(&g);
        assert!(it.converged);
        for (id, s) in &top.sigma {
            assert_abs_diff_eq!(*s, it.sigma[id], epsilon = TOL);
        }
    }
}
