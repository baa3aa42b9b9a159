use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use pohp::deviations::{enumerate_pure_strategies, DEFAULT_PURE_BUDGET};
use pohp::games::bundled::kuhn;
use pohp::games::PohpFormGame;
use pohp::oracle::{best_response_value, brute_force_profile_values, game_values, root_value, run_verification_suite};
use pohp::{BehavioralStrategy, PureStrategy, TreeConfig};

#[test]
fn default_suite_passes() {
    let reports = run_verification_suite(1e-9, 0).unwrap();
    assert!(reports.len() >= 12);
    for r in &reports {
        assert!(r.pass, "{}", r.to_json_line());
    }
}

#[test]
fn suite_is_reproducible() {
    assert_eq!(run_verification_suite(1e-9, 5).unwrap(), run_verification_suite(1e-9, 5).unwrap());
}

#[test]
fn zero_tolerance_reports_rounding() {
    let reports = run_verification_suite(0.0, 0).unwrap();
    assert!(reports.iter().any(|r| !r.pass));
    assert!(reports.iter().all(|r| r.pass == (r.max_discrepancy <= r.tolerance)));
}

#[test]
fn best_response_dominates() {
    let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for _ in 0..10 {
        let mut profile: Vec<BehavioralStrategy> =
            (0..2).map(|i| BehavioralStrategy::random(form.tree(i), &mut rng)).collect();
        for i in 0..2 {
            let (br, x) = best_response_value(&form, i, &profile).unwrap();
            let sigma = form.player_daimon(i, &profile).unwrap();
            let realized = root_value(form.tree(i), &BehavioralStrategy::from_pure(form.tree(i), &x), &sigma);
            assert!((br - realized).abs() < 1e-12);
            assert!(game_values(&form, &profile)[i] <= br + 1e-12);
            let saved = profile[i].clone();
            for _ in 0..5 {
                profile[i] = BehavioralStrategy::random(form.tree(i), &mut rng);
                assert!(game_values(&form, &profile)[i] <= br + 1e-12);
            }
            profile[i] = saved;
        }
    }
}

#[test]
fn point_mass_profiles_match_single_plays() {
    let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
    let xs = enumerate_pure_strategies(form.tree(0), DEFAULT_PURE_BUDGET).unwrap();
    let y = PureStrategy::constant(form.tree(1), 1);
    for x in xs.iter().step_by(7) {
        let profile = vec![BehavioralStrategy::from_pure(form.tree(0), x), BehavioralStrategy::from_pure(form.tree(1), &y)];
        let per_state = brute_force_profile_values(&form, &profile).unwrap();
        let first: f64 = form.tree(0).active_states().filter(|s| form.tree(0).state(*s).agent_steps == 0).map(|s| per_state[0][s.0]).sum();
        assert!((first - game_values(&form, &profile)[0]).abs() < 1e-12);
    }
}
