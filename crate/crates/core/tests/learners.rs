use pohp::deviations::{deviation_set, DeviationKind};
use pohp::games::bundled::{chain_mdp3, kuhn, matching_pennies};
use pohp::games::PohpFormGame;
use pohp::learners::{run_self_play, LearnerConfig, RegretLedger, TieBreak};
use pohp::values::{immediate_regret, verify_lemma2};
use pohp::TreeConfig;

fn kuhn_form() -> PohpFormGame {
    PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap()
}

#[test]
fn ledger_updates_match_generic_immediate_regret() {
    let form = kuhn_form();
    let tree = form.tree(0);
    let set = deviation_set(DeviationKind::Counterfactual, tree).unwrap();
    let mut tracked = RegretLedger::from_deviations(tree, &set).unwrap();
    let mut learner = RegretLedger::new(form.tree(1), DeviationKind::Counterfactual).unwrap();
    let mut own = RegretLedger::new(tree, DeviationKind::Counterfactual).unwrap();
    let mut expected = vec![vec![0.0; tree.num_active()]; set.len()];
    for _ in 0..25 {
        let profile = vec![own.current_strategy(tree, TieBreak::Uniform), learner.current_strategy(form.tree(1), TieBreak::Uniform)];
        let sigma = form.player_daimon(0, &profile).unwrap();
        for (d, phi) in set.iter().enumerate() {
            for s in tree.active_states() {
                expected[d][s.0] += immediate_regret(tree, &profile[0], &sigma, phi, s).unwrap();
            }
        }
        tracked.observe_round(tree, &profile[0], &sigma).unwrap();
        own.observe_round(tree, &profile[0], &sigma).unwrap();
        let sigma1 = form.player_daimon(1, &profile).unwrap();
        learner.observe_round(form.tree(1), &profile[1], &sigma1).unwrap();
    }
    for (d, phi) in set.iter().enumerate() {
        for s in tree.active_states() {
            let got = tracked.regret_of(tree, phi, s).unwrap();
            assert!((got - expected[d][s.0]).abs() < 1e-9, "deviation {d} at {s:?}: {got} vs {}", expected[d][s.0]);
        }
    }
}

#[test]
fn telescoping_holds_on_learner_rounds() {
    let form = kuhn_form();
    let mut ledgers: Vec<RegretLedger> =
        (0..2).map(|i| RegretLedger::new(form.tree(i), DeviationKind::Counterfactual).unwrap()).collect();
    for _ in 0..20 {
        let profile: Vec<_> = (0..2).map(|i| ledgers[i].current_strategy(form.tree(i), TieBreak::Uniform)).collect();
        for i in 0..2 {
            let tree = form.tree(i);
            let sigma = form.player_daimon(i, &profile).unwrap();
            for phi in deviation_set(DeviationKind::Counterfactual, tree).unwrap() {
                assert!(verify_lemma2(tree, &profile[i], &sigma, &phi).unwrap() <= 1e-9);
            }
            ledgers[i].observe_round(tree, &profile[i], &sigma).unwrap();
        }
    }
}

#[test]
fn runs_are_reproducible() {
    let form = kuhn_form();
    let config = LearnerConfig { seed: 11, ..LearnerConfig::default() };
    let a = run_self_play(&form, &config, 300, 50).unwrap();
    let b = run_self_play(&form, &config, 300, 50).unwrap();
    assert_eq!(a.rows, b.rows);
    assert_eq!(a.averages, b.averages);
}

#[test]
fn pennies_average_is_near_uniform() {
    let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
    for kind in [DeviationKind::Counterfactual, DeviationKind::External, DeviationKind::Swap] {
        let result = run_self_play(&form, &LearnerConfig { kind, ..LearnerConfig::default() }, 10_000, 10_000).unwrap();
        for avg in &result.averages {
            for p in avg.rows().iter().flatten() {
                assert!((p - 0.5).abs() <= 0.05, "{kind:?}: {p}");
            }
        }
    }
}

/// `2·R·D·√(|tracked|·T)` per state, with `D` the seat's decision horizon.
#[test]
fn immediate_regret_grows_like_root_t() {
    let kuhn = kuhn_form();
    let chain = chain_mdp3().unwrap().with_perfect_recall_players(&TreeConfig::default()).unwrap();
    let pennies = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
    let rounds = 2_000;
    for form in [&kuhn, &chain, &pennies] {
        for kind in [DeviationKind::Counterfactual, DeviationKind::Swap] {
            let config = LearnerConfig { kind, track_full_regret: false, ..LearnerConfig::default() };
            let result = run_self_play(form, &config, rounds, rounds).unwrap();
            for (i, ledger) in result.ledgers.iter().enumerate() {
                let tree = form.tree(i);
                let scale = 2.0 * form.game().reward_bound() * tree.horizon().max(1) as f64;
                for s in tree.active_states() {
                    let k = tree.state(s).actions.len();
                    let tracked = if kind == DeviationKind::Swap { k * k } else { k };
                    let bound = scale * ((tracked * rounds) as f64).sqrt();
                    assert!(ledger.max_cum_immediate(s) <= bound, "{kind:?} player {i} {s:?}");
                }
            }
        }
    }
}

#[test]
fn full_regret_bound_holds_for_every_family() {
    let form = kuhn_form();
    for kind in [DeviationKind::Counterfactual, DeviationKind::External, DeviationKind::Swap] {
        let result = run_self_play(&form, &LearnerConfig { kind, ..LearnerConfig::default() }, 300, 100).unwrap();
        assert!(result.max_bound_gap <= 1e-6, "{kind:?}: {}", result.max_bound_gap);
    }
}
