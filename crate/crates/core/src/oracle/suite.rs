//! The batch of checks behind `pohp verify`.

use std::collections::HashMap;
use std::sync::Arc;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;
use crate::agents::PerfectRecall;
use crate::deviations::{enumerate_pure_strategies, random_deviation, DeviationKind};
use crate::games::bundled::{chain_mdp3, chain_mdp3_model, kuhn, matching_pennies};
use crate::games::form::{GameObs, Seat, SeatData, SeatView};
use crate::games::gadget::{gadget_perfect_recall, gadget_theorem1};
use crate::games::markov::{check_full_observability, check_markov_constraint};
use crate::learners::{gadget_pure_policy_regrets, run_self_play, theorem1_experiment, LearnerConfig, RegretLedger};
use crate::reach::{belief_at, state_realization_prob};
use crate::tree::{build_tree_index, TreeConfig};
use crate::values::{
    evaluate, immediate_regret, immediate_regret_cf, rw_expected_return, state_values, verify_lemma1, verify_lemma2,
};

/// Trials per randomized check.
pub const SUITE_TRIALS: usize = 20;
/// Fixed tolerance for the regret-bound check, independent of the caller's.
pub const BOUND_SLACK: f64 = 1e-6;

/// A tree used by the decomposition checks, tagged with its game id.
#[derive(Debug, Clone)]
pub struct NamedTree {
    pub game: &'static str,
    pub tree: TreeIndex,
}

/// Perfect-recall trees for every bundled game: both Kuhn seats, both matching
/// pennies seats, the gadget with a remembering agent, and the chain MDP seen by
/// a remembering agent.
pub fn verification_games(config: &TreeConfig) -> Result<Vec<NamedTree>> {
    let mut out = Vec::new();
    for (game, desc) in [("kuhn", kuhn()), ("matching_pennies", matching_pennies())] {
        let form = PohpFormGame::new(desc, config)?;
        for i in 0..form.players() {
            out.push(NamedTree { game, tree: form.tree(i).clone() });
        }
    }
    let (env, agent) = gadget_perfect_recall();
    out.push(NamedTree { game: "theorem1_gadget", tree: build_tree_index(&env, &agent, config)? });
    let chain = Arc::new(chain_mdp3_model().to_game()?);
    let view = SeatView::new(chain, Seat::Player(0));
    let data = SeatData::build(view, &PerfectRecall::<GameObs>::carrying(), config)?;
    out.push(NamedTree { game: "chain_mdp3", tree: data.tree });
    Ok(out)
}

/// Stage policy `(t, s) ↦ π` read off the chain MDP's own view.
pub fn chain_stage_policy(form: &PohpFormGame, pi: &BehavioralStrategy) -> HashMap<(usize, usize), Vec<f64>> {
    let data = form.player(0);
    let mut out = HashMap::new();
    for s in data.tree.active_states() {
        let node = data.game_node(data.tree.state(s).live[0]);
        if let GameNodeKind::Decision { label, .. } = &form.game().node(node).kind {
            if let Some((t, st)) = label.strip_prefix('t').and_then(|r| r.split_once(":s")) {
                if let (Ok(t), Ok(st)) = (t.parse(), st.parse()) {
                    out.insert((t, st), pi.probs(s).to_vec());
                }
            }
        }
    }
    out
}

fn max_abs(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn grouped<F>(games: &[NamedTree], mut check: F) -> Result<Vec<(&'static str, usize, f64)>>
where
    F: FnMut(&TreeIndex) -> Result<(usize, f64)>,
{
    let mut out: Vec<(&'static str, usize, f64)> = Vec::new();
    for g in games {
        let (n, d) = check(&g.tree)?;
        match out.iter_mut().find(|(id, _, _)| *id == g.game) {
            Some(e) => {
                e.1 += n;
                e.2 = e.2.max(d);
            }
            None => out.push((g.game, n, d)),
        }
    }
    Ok(out)
}

/// Every assertable identity across the bundled games. Exact identities use
/// `tolerance`; the regret-bound check uses [`BOUND_SLACK`].
pub fn run_verification_suite(tolerance: f64, seed: u64) -> Result<Vec<OracleReport>> {
    let config = TreeConfig::default();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut reports = Vec::new();
    let games = verification_games(&config)?;

    for (game, n, d) in grouped(&games, |tree| {
        let mut worst: f64 = 0.0;
        for _ in 0..SUITE_TRIALS {
            let pi = BehavioralStrategy::random(tree, &mut rng);
            let sigma = DaimonStrategy::random(tree, &mut rng);
            worst = worst.max(verify_lemma1(tree, &pi, &sigma)?);
        }
        Ok((SUITE_TRIALS, worst))
    })? {
        reports.push(OracleReport::new("value-decomposition", game, n, d, tolerance));
    }

    for (game, n, d) in grouped(&games, |tree| {
        let mut worst: f64 = 0.0;
        for _ in 0..SUITE_TRIALS {
            let pi = BehavioralStrategy::random(tree, &mut rng);
            let sigma = DaimonStrategy::random(tree, &mut rng);
            for kind in [DeviationKind::External, DeviationKind::Counterfactual] {
                let phi = random_deviation(kind, tree, &mut rng)?;
                worst = worst.max(verify_lemma2(tree, &pi, &sigma, &phi)?);
            }
        }
        Ok((2 * SUITE_TRIALS, worst))
    })? {
        reports.push(OracleReport::new("regret-telescoping", game, n, d, tolerance));
    }

    let gadget_pr = &games.iter().find(|g| g.game == "theorem1_gadget").expect("gadget is bundled").tree;
    let mut worst: f64 = 0.0;
    for _ in 0..SUITE_TRIALS {
        let pi = BehavioralStrategy::random(gadget_pr, &mut rng);
        let sigma = DaimonStrategy::random(gadget_pr, &mut rng);
        let phi = random_deviation(DeviationKind::Swap, gadget_pr, &mut rng)?;
        worst = worst.max(verify_lemma2(gadget_pr, &pi, &sigma, &phi)?);
    }
    reports.push(OracleReport::new("regret-telescoping-swap", "theorem1_gadget", SUITE_TRIALS, worst, tolerance));

    let kuhn_form = PohpFormGame::new(kuhn(), &config)?;
    let mp_form = PohpFormGame::new(matching_pennies(), &config)?;
    let chain_form = chain_mdp3()?;
    let (genv, gagent) = gadget_theorem1();
    let gadget_tree = build_tree_index(&genv, &gagent, &config)?;

    let timed: [(&str, &TreeIndex); 5] = [
        ("kuhn", kuhn_form.tree(0)),
        ("kuhn", kuhn_form.tree(1)),
        ("matching_pennies", mp_form.tree(1)),
        ("theorem1_gadget", &gadget_tree),
        ("chain_mdp3", chain_form.tree(0)),
    ];
    let mut by_game: Vec<(&str, usize, f64)> = Vec::new();
    for (game, tree) in timed {
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let pi = BehavioralStrategy::random(tree, &mut rng);
            let sigma = DaimonStrategy::random(tree, &mut rng);
            let walk = state_values(tree, &MixedStrategy::Behavioral(pi.clone()), &sigma)?;
            worst = worst.max(max_abs(&walk, &dfs_state_values(tree, &pi, &sigma)));
            for s in tree.active_states() {
                let direct = rw_expected_return(tree, &MixedStrategy::Behavioral(pi.clone()), &sigma, s)?;
                worst = worst.max((direct - brute_force_value(tree, &pi, &sigma, s)?).abs());
            }
        }
        match by_game.iter_mut().find(|e| e.0 == game) {
            Some(e) => {
                e.1 += 10;
                e.2 = e.2.max(worst);
            }
            None => by_game.push((game, 10, worst)),
        }
    }
    for (game, n, d) in by_game {
        reports.push(OracleReport::new("oracle-equivalence", game, n, d, tolerance));
    }

    for (game, form) in [("kuhn", &kuhn_form), ("matching_pennies", &mp_form)] {
        let mut worst: f64 = 0.0;
        for _ in 0..10 {
            let profile: Vec<BehavioralStrategy> =
                (0..form.players()).map(|i| BehavioralStrategy::random(form.tree(i), &mut rng)).collect();
            let brute = brute_force_profile_values(form, &profile)?;
            for (i, b) in brute.iter().enumerate() {
                let sigma = form.player_daimon(i, &profile)?;
                let walk = state_values(form.tree(i), &MixedStrategy::Behavioral(profile[i].clone()), &sigma)?;
                worst = worst.max(max_abs(&walk, b));
            }
        }
        reports.push(OracleReport::new("profile-enumeration", game, 10, worst, tolerance));

        let sets: Vec<Vec<PureStrategy>> = (0..form.players())
            .map(|i| enumerate_pure_strategies(form.tree(i), DEFAULT_PURE_BUDGET))
            .collect::<Result<_>>()?;
        let mut worst: f64 = 0.0;
        let mut count = 0;
        for x in &sets[0] {
            for y in &sets[1] {
                let profile =
                    vec![BehavioralStrategy::from_pure(form.tree(0), x), BehavioralStrategy::from_pure(form.tree(1), y)];
                let walk = game_values(form, &profile);
                for (i, w) in walk.iter().enumerate() {
                    worst = worst.max((form.view_value(i, &profile)? - w).abs());
                }
                count += 1;
            }
        }
        reports.push(OracleReport::new("payoff-tensor", game, count, worst, tolerance));
    }

    let tree = kuhn_form.tree(0);
    let mut worst: f64 = 0.0;
    for _ in 0..SUITE_TRIALS {
        let pi = BehavioralStrategy::random(tree, &mut rng);
        let sigma = DaimonStrategy::random(tree, &mut rng);
        let phi = random_deviation(DeviationKind::Counterfactual, tree, &mut rng)?;
        let mut ledger = RegretLedger::from_deviations(tree, std::slice::from_ref(&phi))?;
        ledger.observe_round(tree, &pi, &sigma)?;
        for s in tree.active_states() {
            let generic = immediate_regret(tree, &pi, &sigma, &phi, s)?;
            worst = worst.max((generic - immediate_regret_cf(tree, &pi, &sigma, &phi, s)?).abs());
            let tracked = ledger.regret_of(tree, &phi, s).unwrap_or(f64::INFINITY);
            worst = worst.max((generic - tracked).abs());
        }
    }
    reports.push(OracleReport::new("immediate-regret-dual-path", "kuhn", SUITE_TRIALS, worst, tolerance));

    let (mut fact, mut belief, mut cf): (f64, f64, f64) = (0.0, 0.0, 0.0);
    for _ in 0..SUITE_TRIALS {
        let pi = BehavioralStrategy::random(tree, &mut rng);
        let other = BehavioralStrategy::random(tree, &mut rng);
        let sigma = DaimonStrategy::random(tree, &mut rng);
        let base = evaluate(tree, &pi, &sigma);
        for s in tree.active_states() {
            let r = state_realization_prob(tree, &pi, &sigma, s)?;
            let (own, daimon) = r.factored.expect("kuhn seats have perfect recall");
            fact = fact.max((r.total - own * daimon).abs());
            // Beliefs are undefined where either strategy never reaches s.
            if let (Ok(b1), Ok(b2)) = (belief_at(tree, &pi, &sigma, s), belief_at(tree, &other, &sigma, s)) {
                for &(m, p) in &b1.support {
                    belief = belief.max((p - b2.prob(m)).abs());
                }
            }
            // Same play at and below s, different play elsewhere.
            let mut mixed = other.clone();
            for t in tree.subtree(s) {
                mixed.set(t, pi.probs(t).to_vec());
            }
            cf = cf.max((base.cf_value(tree, s) - evaluate(tree, &mixed, &sigma).cf_value(tree, s)).abs());
        }
    }
    reports.push(OracleReport::new("reach-factorization", "kuhn", SUITE_TRIALS, fact, tolerance));
    reports.push(OracleReport::new("belief-invariance", "kuhn", SUITE_TRIALS, belief, tolerance));
    reports.push(OracleReport::new("counterfactual-invariance", "kuhn", SUITE_TRIALS, cf, tolerance));

    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let profile = vec![
            BehavioralStrategy::random(kuhn_form.tree(0), &mut rng),
            BehavioralStrategy::random(kuhn_form.tree(1), &mut rng),
        ];
        let values = game_values(&kuhn_form, &profile);
        for i in 0..2 {
            let (br, _) = best_response_value(&kuhn_form, i, &profile)?;
            let sigma = kuhn_form.player_daimon(i, &profile)?;
            let mut best = f64::NEG_INFINITY;
            for x in enumerate_pure_strategies(kuhn_form.tree(i), DEFAULT_PURE_BUDGET)? {
                best = best.max(root_value(kuhn_form.tree(i), &BehavioralStrategy::from_pure(kuhn_form.tree(i), &x), &sigma));
            }
            worst = worst.max((br - best).abs()).max(values[i] - br);
        }
    }
    reports.push(OracleReport::new("best-response", "kuhn", 10, worst, tolerance));

    let model = chain_mdp3_model();
    let tree = chain_form.tree(0);
    let mut worst: f64 = 0.0;
    for _ in 0..10 {
        let pi = BehavioralStrategy::random(tree, &mut rng);
        let stage = chain_stage_policy(&chain_form, &pi);
        let k = model.actions[0].len();
        let dp = markov_policy_value(&model, &|t, s| stage.get(&(t, s)).cloned().unwrap_or(vec![1.0 / k as f64; k]))?;
        let sigma = chain_form.player_daimon(0, std::slice::from_ref(&pi))?;
        let v = state_values(tree, &MixedStrategy::Behavioral(pi.clone()), &sigma)?;
        let first: f64 = tree.active_states().filter(|s| tree.state(*s).agent_steps == 0).map(|s| v[s.0]).sum();
        worst = worst.max((first - dp).abs()).max((chain_form.view_value(0, std::slice::from_ref(&pi))? - dp).abs());
    }
    reports.push(OracleReport::new("markov-dynamic-programming", "chain_mdp3", 10, worst, tolerance));

    let structural = [check_markov_constraint(&chain_form), check_full_observability(&chain_form, 0)];
    let broken = structural.iter().filter(|r| r.is_err()).count();
    reports.push(OracleReport::new("markov-structure", "chain_mdp3", 2, broken as f64, tolerance));

    let t1 = theorem1_experiment(100, 100)?;
    reports.push(OracleReport::new("forgetful-linear-regret", "theorem1_gadget", 100, (t1.cumulative - 100.0).abs(), tolerance));
    let pure = gadget_pure_policy_regrets()?;
    let shortfall = pure.iter().map(|(_, r)| (1.0 - r).max(0.0)).fold(0.0, f64::max);
    reports.push(OracleReport::new("forgetful-pure-policies", "theorem1_gadget", pure.len(), shortfall, tolerance));

    let pi = BehavioralStrategy::uniform(&gadget_tree);
    let sigma = DaimonStrategy::uniform(&gadget_tree);
    let external: Vec<Deviation> =
        (0..2).map(|k| Deviation::external(&PureStrategy::constant(&gadget_tree, k))).collect();
    let second = gadget_tree.active_states().max_by_key(|s| gadget_tree.state(*s).agent_steps).expect("two decisions");
    let audit = audit_hindsight_rationality(&gadget_tree, &vec![(pi, sigma); 10], &external, second, 0.5)?;
    let avg = audit.averages.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    reports.push(OracleReport::new("hindsight-audit", "theorem1_gadget", 10, (avg - 1.0).abs(), tolerance));

    let play = run_self_play(&kuhn_form, &LearnerConfig::default(), 200, 200)?;
    reports.push(OracleReport::new("full-regret-bound", "kuhn", 200, play.max_bound_gap.max(0.0), BOUND_SLACK));

    Ok(reports)
}
