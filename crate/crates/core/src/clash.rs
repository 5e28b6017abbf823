//! Selective clash resolution.
//!
//! Support/attack pairs whose base strengths are within `delta` of each other
//! are sent to a judge once each. Every participating argument then moves by
//! `beta·(2w − 1)`, where `w` is its win rate over the clashes it took part
//! in (ties count half a win for both sides).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{MicroGraph, Stance};
use crate::providers::{JudgeProvider, ProviderError, Winner};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "S: Scalar")]
pub struct ClashConfig<S> {
    pub delta: S,
    pub beta: S,
    pub max_clashes_per_claim: usize,
}

impl<S: Scalar> Default for ClashConfig<S> {
    fn default() -> Self {
        Self { delta: S::lit(0.1), beta: S::lit(0.1), max_clashes_per_claim: 4 }
    }
}

impl<S: Scalar> ClashConfig<S> {
    pub fn check(&self) -> Result<(), ClashError> {
        let open = |v: S| v > S::zero() && v < S::one();
        if !open(self.delta) {
            return Err(ClashError::Config(format!("delta must lie in (0,1), got {}", self.delta)));
        }
        if !open(self.beta) {
            return Err(ClashError::Config(format!("beta must lie in (0,1), got {}", self.beta)));
        }
        Ok(())
    }
}

/// Outcome of one judged support/attack comparison.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClashRecord {
    pub support_id: String,
    pub attack_id: String,
    pub winner: Winner,
    pub judge_id: String,
    pub rationale: String,
}

#[derive(Debug, Error)]
pub enum ClashError {
    #[error("invalid clash config: {0}")]
    Config(String),
    #[error("clash record references unknown argument `{0}`")]
    UnknownArgument(String),
    #[error("clash record pairs `{0}` with itself")]
    SelfClash(String),
    #[error(transparent)]
    Judge(#[from] ProviderError),
}

/// Near-tied (support, attack) pairs, strongest first.
pub fn find_clashes<S: Scalar>(graph: &MicroGraph<S>, cfg: &ClashConfig<S>) -> Vec<(String, String)> {
    let claim = graph.claim.claim_id.as_str();
    let attached = |pol: Stance| {
        graph.arguments.iter().filter(move |c| c.stance == pol).filter(move |c| match pol {
            Stance::Support => graph.supporters_of(claim).any(|s| s == c.argument_id),
            _ => graph.attackers_of(claim).any(|s| s == c.argument_id),
        })
    };
    let mut pairs: Vec<(S, &str, &str)> = Vec::new();
    for s in attached(Stance::Support) {
        for t in attached(Stance::Attack) {
            if (s.base_strength - t.base_strength).abs() < cfg.delta {
                pairs.push((s.base_strength.min(t.base_strength), &s.argument_id, &t.argument_id));
            }
        }
    }
    pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap_or(std::cmp::Ordering::Equal).then_with(|| a.1.cmp(b.1)).then_with(|| a.2.cmp(b.2)));
    pairs.truncate(cfg.max_clashes_per_claim);
    pairs.into_iter().map(|(_, s, t)| (s.to_owned(), t.to_owned())).collect()
}

/// Win rate of every argument that took part in at least one clash.
pub fn win_rates<S: Scalar>(records: &[ClashRecord]) -> BTreeMap<String, S> {
    let mut tally: BTreeMap<String, (S, usize)> = BTreeMap::new();
    let half = S::half();
    for r in records {
        let (ws, wt) = match r.winner {
            Winner::Support => (S::one(), S::zero()),
            Winner::Attack => (S::zero(), S::one()),
            Winner::Tie => (half, half),
        };
        for (id, w) in [(&r.support_id, ws), (&r.attack_id, wt)] {
            let e = tally.entry(id.clone()).or_insert((S::zero(), 0));
            e.0 = e.0 + w;
            e.1 += 1;
        }
    }
    tally.into_iter().map(|(id, (wins, n))| (id, wins / S::from_usize(n).expect("clash count fits scalar"))).collect()
}

/// Applies the bounded strength update in batch: all win rates are taken
/// over the full record set before any strength changes.
pub fn apply_clash_updates<S: Scalar>(
    graph: &MicroGraph<S>,
    records: &[ClashRecord],
    cfg: &ClashConfig<S>,
) -> Result<MicroGraph<S>, ClashError> {
    cfg.check()?;
    for r in records {
        for id in [&r.support_id, &r.attack_id] {
            if graph.card(id).is_none() {
                return Err(ClashError::UnknownArgument(id.clone()));
            }
        }
        if r.support_id == r.attack_id {
            return Err(ClashError::SelfClash(r.support_id.clone()));
        }
    }
    let mut out = graph.clone();
    let two = S::lit(2.0);
    for (id, w) in win_rates::<S>(records) {
        let card = out.card_mut(&id).expect("checked above");
        let delta = cfg.beta * (two * w - S::one());
        card.base_strength = (card.base_strength + delta).clamp_unit();
    }
    Ok(out)
}

/// Finds near-ties, asks the judge once per pair and applies the update.
/// Any judge failure discards the whole claim's clash step.
pub fn resolve_claim<S: Scalar>(
    graph: &MicroGraph<S>,
    cfg: &ClashConfig<S>,
    judge: &dyn JudgeProvider<S>,
) -> Result<(MicroGraph<S>, Vec<ClashRecord>), ClashError> {
    cfg.check()?;
    let pairs = find_clashes(graph, cfg);
    if pairs.is_empty() {
        return Ok((graph.clone(), Vec::new()));
    }
    let mut records = Vec::with_capacity(pairs.len());
    for (s, t) in pairs {
        let support = graph.card(&s).expect("pair drawn from graph");
        let attack = graph.card(&t).expect("pair drawn from graph");
        let verdict = judge.judge(&graph.claim, support, attack)?;
        records.push(ClashRecord {
            support_id: s,
            attack_id: t,
            winner: verdict.winner,
            judge_id: judge.id().to_owned(),
            rationale: verdict.rationale,
        });
    }
    let updated = apply_clash_updates(graph, &records, cfg)?;
    Ok((updated, records))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::tests::card;
    use crate::model::{build_micro_graph, ArgumentCard, Claim, ClaimKind};
    use crate::providers::{JudgeVerdict, MockJudge};
    use approx::assert_abs_diff_eq;

    fn graph(cards: Vec<ArgumentCard<f64>>) -> MicroGraph<f64> {
        build_micro_graph(Claim::new(ClaimKind::When, "c"), cards, &[]).unwrap()
    }

    fn record(s: &str, t: &str, winner: Winner) -> ClashRecord {
        ClashRecord { support_id: s.into(), attack_id: t.into(), winner, judge_id: "test".into(), rationale: String::new() }
    }

    #[test]
    fn tie_threshold() {
        let cfg = ClashConfig::default();
        let g = graph(vec![card("s", Stance::Support, 0.80), card("t", Stance::Attack, 0.78)]);
        assert_eq!(find_clashes(&g, &cfg), vec![("s".to_owned(), "t".to_owned())]);
        let g = graph(vec![card("s", Stance::Support, 0.9), card("t", Stance::Attack, 0.5)]);
        assert!(find_clashes(&g, &cfg).is_empty());
        let g = graph(vec![card("s", Stance::Support, 0.9), card("u", Stance::Support, 0.9)]);
        assert!(find_clashes(&g, &cfg).is_empty());
    }

    #[test]
    fn clash_order_and_truncation() {
        let cfg = ClashConfig { max_clashes_per_claim: 2, ..ClashConfig::default() };
        let g = graph(vec![
            card("s1", Stance::Support, 0.50),
            card("s2", Stance::Support, 0.90),
            card("t1", Stance::Attack, 0.52),
            card("t2", Stance::Attack, 0.88),
        ]);
        // Candidates: (s1,t1) min .50, (s2,t2) min .88; s1/t2 and s2/t1 are too far.
        let all = find_clashes(&g, &ClashConfig::default());
        assert_eq!(all, vec![("s2".into(), "t2".into()), ("s1".into(), "t1".into())]);
        assert_eq!(find_clashes(&g, &cfg).len(), 2);
        let one = ClashConfig { max_clashes_per_claim: 1, ..cfg };
        assert_eq!(find_clashes(&g, &one), vec![("s2".to_owned(), "t2".to_owned())]);
    }

    #[test]
    fn update_examples() {
        let cfg = ClashConfig::default();
        let g = graph(vec![card("s", Stance::Support, 0.5), card("t", Stance::Attack, 0.5), card("t2", Stance::Attack, 0.5)]);
        // s: one win, one loss -> w = 0.5
        let out = apply_clash_updates(&g, &[record("s", "t", Winner::Support), record("s", "t2", Winner::Attack)], &cfg).unwrap();
        assert_eq!(out.card("s").unwrap().base_strength, 0.5);

        // two wins of two -> +beta
        let out = apply_clash_updates(&g, &[record("s", "t", Winner::Support), record("s", "t2", Winner::Support)], &cfg).unwrap();
        assert_abs_diff_eq!(out.card("s").unwrap().base_strength, 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(out.card("t").unwrap().base_strength, 0.4, epsilon = 1e-12);

        let low = graph(vec![card("s", Stance::Support, 0.05), card("t", Stance::Attack, 0.06)]);
        let out = apply_clash_updates(&low, &[record("s", "t", Winner::Attack)], &cfg).unwrap();
        assert_eq!(out.card("s").unwrap().base_strength, 0.0);
    }

    #[test]
    fn unknown_argument_rejected() {
        let g = graph(vec![card("s", Stance::Support, 0.5)]);
        let err = apply_clash_updates(&g, &[record("s", "nope", Winner::Tie)], &ClashConfig::default()).unwrap_err();
        assert!(matches!(err, ClashError::UnknownArgument(id) if id == "nope"));
    }

    #[test]
    fn resolve_with_mock_judge() {
        let cfg = ClashConfig::default();
        let mut s = card("s", Stance::Support, 0.8);
        s.quality.rel = 0.9;
        let mut t = card("t", Stance::Attack, 0.78);
        t.quality.rel = 0.4;
        let g = graph(vec![s, t]);
        let (out, recs) = resolve_claim(&g, &cfg, &MockJudge::default()).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].winner, Winner::Support);
        assert_abs_diff_eq!(out.card("s").unwrap().base_strength, 0.9, epsilon = 1e-12);
        assert_abs_diff_eq!(out.card("t").unwrap().base_strength, 0.68, epsilon = 1e-12);
    }

    #[test]
    fn resolve_tie_and_empty() {
        let cfg = ClashConfig::default();
        let mut s = card("s", Stance::Support, 0.8);
        let mut t = card("t", Stance::Attack, 0.75);
        s.quality.rel = 0.7;
        t.quality.rel = 0.7;
        let g = graph(vec![s, t]);
        let (out, recs) = resolve_claim(&g, &cfg, &MockJudge::default()).unwrap();
        assert_eq!(recs[0].winner, Winner::Tie);
        assert_eq!(out, g);

        let far = graph(vec![card("s", Stance::Support, 0.9), card("t", Stance::Attack, 0.2)]);
        let (out, recs) = resolve_claim(&far, &cfg, &MockJudge::default()).unwrap();
        assert!(recs.is_empty());
        assert_eq!(out, far);
    }

    struct Down;
    impl JudgeProvider<f64> for Down {
        fn id(&self) -> &str {
            "down"
        }
        fn judge(&self, _: &Claim<f64>, _: &ArgumentCard<f64>, _: &ArgumentCard<f64>) -> Result<JudgeVerdict, ProviderError> {
            Err(ProviderError::Unavailable { provider: "down".into(), message: "offline".into() })
        }
    }

    #[test]
    fn judge_failure_propagates() {
        let g = graph(vec![card("s", Stance::Support, 0.8), card("t", Stance::Attack, 0.75)]);
        assert!(matches!(resolve_claim(&g, &ClashConfig::default(), &Down), Err(ClashError::Judge(_))));
    }

    #[test]
    fn config_bounds() {
        assert!(ClashConfig { delta: 0.0, ..ClashConfig::<f64>::default() }.check().is_err());
        assert!(ClashConfig { beta: 1.0, ..ClashConfig::<f64>::default() }.check().is_err());
    }
}
