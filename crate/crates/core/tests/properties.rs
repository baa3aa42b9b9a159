use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pohp::deviations::{pushforward, random_deviation, DeviationKind};
use pohp::learners::{RegretLedger, TieBreak};
use pohp::oracle::{dfs_state_values, verification_games, NamedTree};
use pohp::reach::state_realization_prob;
use pohp::values::{state_values, verify_lemma1, verify_lemma2};
use pohp::{BehavioralStrategy, DaimonStrategy, MixedStrategy, StateId, TreeConfig};

fn games() -> &'static [NamedTree] {
    static GAMES: std::sync::OnceLock<Vec<NamedTree>> = std::sync::OnceLock::new();
    GAMES.get_or_init(|| verification_games(&TreeConfig::default()).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn value_decomposition(seed in any::<u64>(), g in 0usize..6) {
        let tree = &games()[g].tree;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = BehavioralStrategy::random(tree, &mut rng);
        let sigma = DaimonStrategy::random(tree, &mut rng);
        prop_assert!(verify_lemma1(tree, &pi, &sigma).unwrap() <= 1e-9);
    }

    #[test]
    fn regret_telescoping(seed in any::<u64>(), g in 0usize..6, k in 0usize..3) {
        let tree = &games()[g].tree;
        let kind = [DeviationKind::External, DeviationKind::Counterfactual, DeviationKind::Swap][k];
        prop_assume!(kind != DeviationKind::Swap || tree.num_active() <= 3);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = BehavioralStrategy::random(tree, &mut rng);
        let sigma = DaimonStrategy::random(tree, &mut rng);
        let phi = random_deviation(kind, tree, &mut rng).unwrap();
        prop_assert!(verify_lemma2(tree, &pi, &sigma, &phi).unwrap() <= 1e-9);
    }

    #[test]
    fn pushforward_preserves_mass(seed in any::<u64>(), g in 0usize..6, k in 0usize..2) {
        let tree = &games()[g].tree;
        let kind = [DeviationKind::External, DeviationKind::Counterfactual][k];
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = MixedStrategy::Behavioral(BehavioralStrategy::random(tree, &mut rng));
        let phi = random_deviation(kind, tree, &mut rng).unwrap();
        let pushed = pushforward(&phi, &pi, tree).unwrap();
        prop_assert!((pushed.total_mass(tree) - 1.0).abs() <= 1e-9);
    }

    #[test]
    fn independent_walks_agree(seed in any::<u64>(), g in 0usize..6) {
        let tree = &games()[g].tree;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = BehavioralStrategy::random(tree, &mut rng);
        let sigma = DaimonStrategy::random(tree, &mut rng);
        let a = state_values(tree, &MixedStrategy::Behavioral(pi.clone()), &sigma).unwrap();
        let b = dfs_state_values(tree, &pi, &sigma);
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-9);
        }
    }

    #[test]
    fn realization_factors_under_recall(seed in any::<u64>(), g in 0usize..6) {
        let tree = &games()[g].tree;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let pi = BehavioralStrategy::random(tree, &mut rng);
        let sigma = DaimonStrategy::random(tree, &mut rng);
        for s in tree.active_states() {
            let r = state_realization_prob(tree, &pi, &sigma, s).unwrap();
            let (own, daimon) = r.factored.unwrap();
            prop_assert!((r.total - own * daimon).abs() <= 1e-12);
            prop_assert!((0.0..=1.0 + 1e-12).contains(&r.total));
        }
    }

    #[test]
    fn matching_yields_distributions(regrets in prop::collection::vec(-10.0f64..10.0, 2)) {
        let tree = &games()[0].tree;
        let mut ledger = RegretLedger::new(tree, DeviationKind::Counterfactual).unwrap();
        ledger.set_action_regrets(StateId(0), &regrets).unwrap();
        let row = ledger.current_strategy(tree, TieBreak::Uniform).probs(StateId(0)).to_vec();
        prop_assert!((row.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
        for (p, r) in row.iter().zip(&regrets) {
            prop_assert!(*p >= 0.0);
            if *r <= 0.0 && regrets.iter().any(|x| *x > 0.0) {
                prop_assert_eq!(*p, 0.0);
            }
        }
    }
}
