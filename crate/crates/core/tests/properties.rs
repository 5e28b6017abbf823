use argverify_core::clash::{apply_clash_updates, win_rates, ClashRecord};
use argverify_core::contestation::{apply_to_result, replay, ActionKind};
use argverify_core::fuzz::{random_action, random_case, random_graph};
use argverify_core::model::{Claim as GenericClaim, MicroGraph, QualityScores};
use argverify_core::providers::Winner;
use argverify_core::report::verdict_of;
use argverify_core::semantics::StrengthWeights;
use argverify_core::{
    build_micro_graph, canonical, evaluate_graph, evaluate_graph_iterative, intrinsic_strength, run_pipeline, ClaimKind, ClashConfig,
    ContestationSession, PipelineConfig, ProviderSet, Stance, UncertaintyBand, Verdict, Weights,
};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn graph(seed: u64) -> argverify_core::Graph {
    random_graph(&mut ChaCha8Rng::seed_from_u64(seed), 12)
}

fn cfg() -> ProptestConfig {
    ProptestConfig { cases: 512, ..ProptestConfig::default() }
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn strengths_stay_in_unit_interval(seed in any::<u64>()) {
        let g = graph(seed);
        let a = evaluate_graph(&g, &Weights::default()).unwrap();
        prop_assert!(a.sigma.values().all(|s| (0.0..=1.0).contains(s)));
    }

    #[test]
    fn unattacked_unsupported_nodes_keep_their_base(seed in any::<u64>()) {
        let g = graph(seed);
        let a = evaluate_graph(&g, &Weights::default()).unwrap();
        for id in g.node_ids() {
            if g.supporters_of(id).next().is_none() && g.attackers_of(id).next().is_none() {
                prop_assert_eq!(a.get(id).unwrap(), g.tau(id).unwrap());
            }
        }
    }

    #[test]
    fn swapping_claim_relations_mirrors_the_score(seed in any::<u64>()) {
        let mut g = graph(seed);
        g.claim.base_strength = 0.5;
        let id = g.claim.claim_id.clone();
        let s = evaluate_graph(&g, &Weights::default()).unwrap().get(&id).unwrap();
        let r = evaluate_graph(&g.reflected(), &Weights::default()).unwrap().get(&id).unwrap();
        prop_assert!((s + r - 1.0).abs() < 1e-9, "{} vs {}", s, r);
    }

    #[test]
    fn leaf_support_raises_and_leaf_attack_lowers(seed in any::<u64>(), tau in 0.01f64..=1.0) {
        let mut g = graph(seed);
        g.claim.base_strength = 0.5;
        let id = g.claim.claim_id.clone();
        let before = evaluate_graph(&g, &Weights::default()).unwrap().get(&id).unwrap();
        for (stance, up) in [(Stance::Support, true), (Stance::Attack, false)] {
            let mut cards = g.arguments.clone();
            let leaf = argverify_core::Card {
                argument_id: "added".into(),
                text: "added".into(),
                stance,
                provenance: argverify_core::Provenance::for_evidence("ev-added"),
                rationale: "added".into(),
                base_strength: tau,
                quality: QualityScores::uniform(tau),
                origin: argverify_core::model::CardOrigin::HumanAdded,
                accepted: false,
            };
            cards.push(leaf);
            let h = build_micro_graph(g.claim.clone(), cards, &g.argument_relations()).unwrap();
            let after = evaluate_graph(&h, &Weights::default()).unwrap().get(&id).unwrap();
            prop_assert!(if up { after > before } else { after < before }, "{:?}: {} -> {}", stance, before, after);
        }
    }

    #[test]
    fn topological_matches_iterative(seed in any::<u64>()) {
        let g = graph(seed);
        let a = evaluate_graph(&g, &Weights::default()).unwrap();
        let b = evaluate_graph_iterative(&g);
        prop_assert!(b.converged);
        for id in g.node_ids() {
            prop_assert!((a.get(id).unwrap() - b.get(id).unwrap()).abs() < 1e-9);
        }
    }

    #[test]
    fn f32_evaluation_is_bounded_and_close(seed in any::<u64>()) {
        let g = graph(seed);
        let g32: MicroGraph<f32> = serde_json::from_value(serde_json::to_value(&g).unwrap()).unwrap();
        let a = evaluate_graph(&g, &Weights::default()).unwrap();
        let b = evaluate_graph(&g32, &StrengthWeights::<f32>::default()).unwrap();
        for id in g.node_ids() {
            let s = b.get(id).unwrap();
            prop_assert!((0.0..=1.0).contains(&s));
            prop_assert!((f64::from(s) - a.get(id).unwrap()).abs() < 1e-4);
        }
    }

    #[test]
    fn intrinsic_strength_is_affine_and_permutation_consistent(
        q in proptest::array::uniform4(0.0f64..=1.0),
        raw in proptest::array::uniform4(0.01f64..1.0),
        i in 0usize..4,
        t in 0.0f64..=1.0,
    ) {
        let total: f64 = raw.iter().sum();
        let l = raw.map(|x| x / total);
        let w = StrengthWeights { lambda_src: l[0], lambda_corr: l[1], lambda_mod: l[2], lambda_rel: l[3] };
        let at = |q: [f64; 4]| intrinsic_strength(&QualityScores::new(q[0], q[1], q[2], q[3]), &w).unwrap();
        // affine along component i
        let mut lo = q; lo[i] = 0.0;
        let mut hi = q; hi[i] = 1.0;
        let mut mid = q; mid[i] = t;
        prop_assert!((at(mid) - ((1.0 - t) * at(lo) + t * at(hi))).abs() < 1e-12);
        // rotating scores and weights together leaves τ unchanged
        let rq = [q[1], q[2], q[3], q[0]];
        let rw = StrengthWeights { lambda_src: l[1], lambda_corr: l[2], lambda_mod: l[3], lambda_rel: l[0] };
        let rotated = intrinsic_strength(&QualityScores::new(rq[0], rq[1], rq[2], rq[3]), &rw).unwrap();
        prop_assert!((rotated - at(q)).abs() < 1e-12);
    }

    #[test]
    fn verdicts_are_monotone_in_sigma(a in 0.0f64..=1.0, b in 0.0f64..=1.0) {
        let band = UncertaintyBand::default();
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        prop_assert!(verdict_of(lo, &band).0 <= verdict_of(hi, &band).0);
        let (v, u) = verdict_of(a, &band);
        prop_assert_eq!(u, v == Verdict::Uncertain);
    }
}

fn clash_graph(taus: &[(Stance, f64, f64)]) -> argverify_core::Graph {
    let cards = taus
        .iter()
        .enumerate()
        .map(|(i, (stance, tau, rel))| argverify_core::Card {
            argument_id: format!("c{i}"),
            text: format!("card {i}"),
            stance: *stance,
            provenance: argverify_core::Provenance::for_evidence(format!("ev-{i}")),
            rationale: "r".into(),
            base_strength: *tau,
            quality: QualityScores::new(*tau, *tau, *tau, *rel),
            origin: argverify_core::model::CardOrigin::Generated,
            accepted: false,
        })
        .collect();
    build_micro_graph(GenericClaim::new(ClaimKind::When, "c"), cards, &[]).unwrap()
}

fn records_strategy() -> impl Strategy<Value = (Vec<(Stance, f64, f64)>, Vec<(usize, usize, u8)>)> {
    (2usize..8).prop_flat_map(|n| {
        let cards = proptest::collection::vec((prop_oneof![Just(Stance::Support), Just(Stance::Attack)], 0.0f64..=1.0, 0.0f64..=1.0), n);
        let recs = proptest::collection::vec((0..n, 0..n, 0u8..3), 0..10);
        (cards, recs)
    })
}

fn to_records(recs: &[(usize, usize, u8)]) -> Vec<ClashRecord> {
    recs.iter()
        .filter(|(s, t, _)| s != t)
        .map(|(s, t, w)| ClashRecord {
            support_id: format!("c{s}"),
            attack_id: format!("c{t}"),
            winner: [Winner::Support, Winner::Attack, Winner::Tie][*w as usize],
            judge_id: "j".into(),
            rationale: String::new(),
        })
        .collect()
}

proptest! {
    #![proptest_config(cfg())]

    #[test]
    fn clash_updates_are_bounded_and_order_free(
        (cards, recs) in records_strategy(),
        beta in 0.01f64..0.99,
        shuffle_seed in any::<u64>(),
    ) {
        let g = clash_graph(&cards);
        let records = to_records(&recs);
        let cfg = ClashConfig { delta: 0.1, beta, max_clashes_per_claim: 4 };
        let out = apply_clash_updates(&g, &records, &cfg).unwrap();
        let rates = win_rates::<f64>(&records);
        for (before, after) in g.arguments.iter().zip(&out.arguments) {
            let d = after.base_strength - before.base_strength;
            prop_assert!(d.abs() <= beta + 1e-15);
            prop_assert!((0.0..=1.0).contains(&after.base_strength));
            if rates.get(&before.argument_id) == Some(&0.5) || !rates.contains_key(&before.argument_id) {
                prop_assert_eq!(d, 0.0);
            }
        }
        let mut shuffled = records.clone();
        use rand::seq::SliceRandom;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle_seed));
        let again = apply_clash_updates(&g, &shuffled, &cfg).unwrap();
        prop_assert_eq!(out, again);
    }
}

fn session_run(seed: u64) -> (ContestationSession, Vec<(usize, argverify_core::VerificationResult)>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let case = random_case(&mut rng, 8);
    let base = run_pipeline(&case, &PipelineConfig::default(), &ProviderSet::mock()).unwrap();
    let mut session = ContestationSession::new(format!("s-{seed}"), base);
    let mut snapshots = Vec::new();
    use rand::Rng;
    let steps = rng.random_range(0..8);
    for i in 0..steps {
        let Some(action) = random_action(&mut rng, &session.current, i) else { break };
        snapshots.push((session.log.len(), session.current.clone()));
        session = session.apply_action(action).unwrap();
    }
    (session, snapshots)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 128, ..ProptestConfig::default() })]

    #[test]
    fn persisted_sessions_replay_to_their_current(seed in any::<u64>()) {
        let (session, _) = session_run(seed);
        let reloaded = ContestationSession::from_json(&session.to_json()).unwrap();
        prop_assert_eq!(reloaded.check_replay().unwrap(), Ok(()));
        let replayed = replay(&session.baseline, &session.log).unwrap();
        prop_assert_eq!(canonical::digest(&replayed).unwrap(), session.current_digest);
    }

    #[test]
    fn actions_only_touch_their_own_section(seed in any::<u64>()) {
        let (session, snapshots) = session_run(seed);
        for (idx, before) in snapshots {
            let action = &session.log[idx];
            let after = apply_to_result(&before, action).unwrap();
            for kind in ClaimKind::ALL.into_iter().filter(|k| *k != action.claim_kind) {
                prop_assert_eq!(&before.sections[&kind], &after.sections[&kind]);
            }
            if action.kind == ActionKind::Accept {
                let (a, b) = (before.resolved(action.claim_kind).unwrap(), after.resolved(action.claim_kind).unwrap());
                prop_assert_eq!(&a.assignment, &b.assignment);
            }
        }
    }
}
