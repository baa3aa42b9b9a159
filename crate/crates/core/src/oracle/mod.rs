//! Brute-force oracles. Nothing here calls into the `values` module: every value
//! is recomputed by its own recursion so that the two paths cross-check each other.

mod suite;

pub use suite::{chain_stage_policy, verification_games, run_verification_suite, NamedTree, BOUND_SLACK, SUITE_TRIALS};

use serde::Serialize;

use crate::deviations::{enumerate_pure_strategies, pushforward, truncate, Deviation, TruncMode, DEFAULT_PURE_BUDGET};
use crate::error::{PohpError, Result};
use crate::games::efg::{GameNodeId, GameNodeKind};
use crate::games::form::PohpFormGame;
use crate::games::markov::MarkovModel;
use crate::strategy::{BehavioralStrategy, DaimonStrategy, MixedStrategy, PureStrategy};
use crate::tree::{NodeId, NodeKind, StateId, TreeIndex};

/// `v_s` for every active state by a top-down walk that credits each reward to
/// every active state open on the path above it.
pub fn dfs_state_values(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy) -> Vec<f64> {
    let mut out = vec![0.0; tree.num_active()];
    let mut open = Vec::new();
    for &r in tree.roots() {
        credit(tree, pi, sigma, r, tree.node(r).initial_weight, &mut open, &mut out);
    }
    out
}

fn credit(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    n: NodeId,
    p: f64,
    open: &mut Vec<StateId>,
    out: &mut [f64],
) {
    let node = tree.node(n);
    if p == 0.0 || node.children.is_empty() {
        return;
    }
    match node.kind {
        NodeKind::Active => {
            open.push(node.state);
            for (k, &c) in node.children.iter().enumerate() {
                credit(tree, pi, sigma, c, p * node.cont * pi.prob(node.state, k), open, out);
            }
            open.pop();
        }
        NodeKind::Passive => {
            for (k, &c) in node.children.iter().enumerate() {
                let pc = p * sigma.prob(n, k);
                let r = tree.node(c).reward;
                for s in open.iter() {
                    out[s.0] += pc * r;
                }
                credit(tree, pi, sigma, c, pc, open, out);
            }
        }
    }
}

/// [`dfs_state_values`] under a mixed strategy.
pub fn dfs_mixed_values(tree: &TreeIndex, pi: &MixedStrategy, sigma: &DaimonStrategy) -> Result<Vec<f64>> {
    match pi {
        MixedStrategy::Behavioral(b) => Ok(dfs_state_values(tree, b, sigma)),
        MixedStrategy::Enumerated(mu) => {
            let xs = enumerate_pure_strategies(tree, DEFAULT_PURE_BUDGET)?;
            let mut out = vec![0.0; tree.num_active()];
            for (x, &w) in xs.iter().zip(mu) {
                if w != 0.0 {
                    let v = dfs_state_values(tree, &BehavioralStrategy::from_pure(tree, x), sigma);
                    out.iter_mut().zip(v).for_each(|(o, v)| *o += w * v);
                }
            }
            Ok(out)
        }
    }
}

/// Realization-weighted return by enumerating the agent's pure strategies: `Σ_x π(x) v_s(x)`.
pub fn brute_force_value(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, s: StateId) -> Result<f64> {
    let mut total = 0.0;
    for x in enumerate_pure_strategies(tree, DEFAULT_PURE_BUDGET)? {
        let w = pi.pure_prob(&x);
        if w != 0.0 {
            total += w * dfs_state_values(tree, &BehavioralStrategy::from_pure(tree, &x), sigma)[s.0];
        }
    }
    Ok(total)
}

/// Per-player expected return by walking the game tree directly.
pub fn game_values(form: &PohpFormGame, profile: &[BehavioralStrategy]) -> Vec<f64> {
    let mut out = vec![0.0; form.players()];
    walk_game(form, &|n, k| form.move_prob(profile, n, k), form.game().root(), 1.0, &mut out);
    out
}

fn walk_game(form: &PohpFormGame, prob: &dyn Fn(GameNodeId, usize) -> f64, n: GameNodeId, p: f64, out: &mut [f64]) {
    let node = form.game().node(n);
    if let GameNodeKind::Terminal { utilities } = &node.kind {
        for (o, u) in out.iter_mut().zip(utilities) {
            *o += p * u;
        }
        return;
    }
    for (k, &c) in node.children.iter().enumerate() {
        let pc = p * prob(n, k);
        if pc == 0.0 {
            continue;
        }
        let child = form.game().node(c);
        for (o, r) in out.iter_mut().zip(&child.rewards) {
            *o += pc * r;
        }
        walk_game(form, prob, c, pc * if child.is_terminal() { 1.0 } else { child.cont }, out);
    }
}

/// Per-player, per-state realization-weighted returns by enumerating every joint
/// pure profile and walking the game tree for each one.
pub fn brute_force_profile_values(form: &PohpFormGame, profile: &[BehavioralStrategy]) -> Result<Vec<Vec<f64>>> {
    let sets: Vec<Vec<PureStrategy>> = (0..form.players())
        .map(|i| enumerate_pure_strategies(form.tree(i), DEFAULT_PURE_BUDGET))
        .collect::<Result<_>>()?;
    let total: usize = sets.iter().map(Vec::len).product();
    if total > DEFAULT_PURE_BUDGET {
        return Err(PohpError::Resource(format!("{total} joint pure profiles exceed the budget")));
    }
    let mut out: Vec<Vec<f64>> = (0..form.players()).map(|i| vec![0.0; form.tree(i).num_active()]).collect();
    let mut idx = vec![0usize; sets.len()];
    for _ in 0..total {
        let joint: Vec<&PureStrategy> = idx.iter().zip(&sets).map(|(&k, set)| &set[k]).collect();
        let w: f64 = joint.iter().zip(profile).map(|(x, pi)| pi.pure_prob(x)).product();
        if w != 0.0 {
            let mut open: Vec<Vec<StateId>> = vec![Vec::new(); form.players()];
            profile_walk(form, &joint, form.game().root(), w, &mut open, &mut out);
        }
        for i in (0..idx.len()).rev() {
            idx[i] += 1;
            if idx[i] < sets[i].len() {
                break;
            }
            idx[i] = 0;
        }
    }
    Ok(out)
}

fn profile_walk(
    form: &PohpFormGame,
    joint: &[&PureStrategy],
    n: GameNodeId,
    p: f64,
    open: &mut Vec<Vec<StateId>>,
    out: &mut [Vec<f64>],
) {
    let node = form.game().node(n);
    let mut pushed = None;
    let choices: Vec<(usize, f64)> = match &node.kind {
        GameNodeKind::Terminal { utilities } => {
            for (i, u) in utilities.iter().enumerate() {
                for s in &open[i] {
                    out[i][s.0] += p * u;
                }
            }
            return;
        }
        GameNodeKind::Chance { outcomes, .. } => outcomes.iter().map(|(_, q)| *q).enumerate().collect(),
        GameNodeKind::Decision { player, .. } => {
            let s = form.owner(n).expect("reachable decision nodes have an owner");
            open[*player].push(s);
            pushed = Some(*player);
            vec![(joint[*player].choice(s), 1.0)]
        }
    };
    for (k, q) in choices {
        let c = node.children[k];
        let pc = p * q;
        if pc == 0.0 {
            continue;
        }
        let child = form.game().node(c);
        for (i, r) in child.rewards.iter().enumerate() {
            for s in &open[i] {
                out[i][s.0] += pc * r;
            }
        }
        let cont = if child.is_terminal() { 1.0 } else { child.cont };
        profile_walk(form, joint, c, pc * cont, open, out);
    }
    if let Some(i) = pushed {
        open[i].pop();
    }
}

/// Daimon reach `ℙ_σ[h]` per node, recomputed here.
fn daimon_reach(tree: &TreeIndex, sigma: &DaimonStrategy) -> Vec<f64> {
    let mut d = vec![0.0; tree.nodes().len()];
    for (i, node) in tree.nodes().iter().enumerate() {
        if node.parent.is_none() {
            d[i] = node.initial_weight;
        }
        for (k, c) in node.children.iter().enumerate() {
            d[c.0] = d[i] * if node.kind == NodeKind::Active { node.cont } else { sigma.prob(NodeId(i), k) };
        }
    }
    d
}

/// Best-response value against a fixed daimon, with a maximizing pure strategy.
///
/// Perfect recall uses a bottom-up pass over information states; otherwise every
/// pure strategy is evaluated.
pub fn best_response(tree: &TreeIndex, sigma: &DaimonStrategy) -> Result<(f64, PureStrategy)> {
    if !tree.has_perfect_recall() {
        let mut best: Option<(f64, PureStrategy)> = None;
        for x in enumerate_pure_strategies(tree, DEFAULT_PURE_BUDGET)? {
            let v = root_value(tree, &BehavioralStrategy::from_pure(tree, &x), sigma);
            if best.as_ref().is_none_or(|(b, _)| v > *b) {
                best = Some((v, x));
            }
        }
        return best.ok_or_else(|| PohpError::Validation("no pure strategies".into()));
    }
    let d = daimon_reach(tree, sigma);
    let mut choice = vec![usize::MAX; tree.num_active()];
    let mut memo: Vec<Option<f64>> = vec![None; tree.nodes().len()];
    let mut order: Vec<StateId> = tree.active_states().collect();
    order.sort_by_key(|s| std::cmp::Reverse(tree.state(*s).agent_steps));
    for s in order {
        let k = tree.state(s).actions.len();
        let mut cf = vec![0.0; k];
        for &m in &tree.state(s).live {
            let node = tree.node(m);
            for (a, &pa) in node.children.iter().enumerate() {
                cf[a] += d[m.0] * node.cont * br_value(tree, sigma, &choice, &mut memo, pa);
            }
        }
        let mut best = 0;
        for a in 1..k {
            if cf[a] > cf[best] {
                best = a;
            }
        }
        choice[s.0] = best;
    }
    let x = PureStrategy::new(tree, choice)?;
    let v = tree.roots().iter().map(|r| d[r.0] * br_value(tree, sigma, x.choices(), &mut memo, *r)).sum();
    Ok((v, x))
}

fn br_value(tree: &TreeIndex, sigma: &DaimonStrategy, choice: &[usize], memo: &mut [Option<f64>], n: NodeId) -> f64 {
    if let Some(v) = memo[n.0] {
        return v;
    }
    let node = tree.node(n);
    let v = if node.children.is_empty() {
        0.0
    } else {
        match node.kind {
            NodeKind::Active => {
                let a = choice[node.state.0];
                debug_assert!(a != usize::MAX, "deeper states are decided first");
                node.cont * br_value(tree, sigma, choice, memo, node.children[a])
            }
            NodeKind::Passive => node
                .children
                .iter()
                .enumerate()
                .map(|(k, &c)| sigma.prob(n, k) * (tree.node(c).reward + br_value(tree, sigma, choice, memo, c)))
                .sum(),
        }
    };
    memo[n.0] = Some(v);
    v
}

/// Expected return of the whole process, by the top-down walk.
pub fn root_value(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy) -> f64 {
    let mut total = 0.0;
    for &r in tree.roots() {
        total += path_return(tree, pi, sigma, r, tree.node(r).initial_weight);
    }
    total
}

fn path_return(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, n: NodeId, p: f64) -> f64 {
    let node = tree.node(n);
    if p == 0.0 || node.children.is_empty() {
        return 0.0;
    }
    let mut total = 0.0;
    for (k, &c) in node.children.iter().enumerate() {
        let pc = match node.kind {
            NodeKind::Active => p * node.cont * pi.prob(node.state, k),
            NodeKind::Passive => p * sigma.prob(n, k),
        };
        if node.kind == NodeKind::Passive {
            total += pc * tree.node(c).reward;
        }
        total += path_return(tree, pi, sigma, c, pc);
    }
    total
}

/// Player `i`'s best-response value against the rest of the profile.
pub fn best_response_value(form: &PohpFormGame, i: usize, profile: &[BehavioralStrategy]) -> Result<(f64, PureStrategy)> {
    let sigma = form.player_daimon(i, profile)?;
    best_response(form.tree(i), &sigma)
}

/// `Σ_i (BR_i − value_i)`.
pub fn exploitability(form: &PohpFormGame, profile: &[BehavioralStrategy]) -> Result<f64> {
    let values = game_values(form, profile);
    let mut total = 0.0;
    for (i, v) in values.iter().enumerate() {
        total += best_response_value(form, i, profile)?.0 - v;
    }
    Ok(total)
}

/// `v_s(φπ) − v_s(φ_{≺s}π)` for every active state, by the top-down walk.
pub fn full_regrets(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, phi: &Deviation) -> Result<Vec<f64>> {
    let base = MixedStrategy::Behavioral(pi.clone());
    let deviated = dfs_mixed_values(tree, &pushforward(phi, &base, tree)?, sigma)?;
    let mut out = vec![0.0; tree.num_active()];
    for s in tree.active_states() {
        let before = truncate(phi, s, TruncMode::Before, tree)?;
        let anchor = dfs_mixed_values(tree, &pushforward(&before, &base, tree)?, sigma)?;
        out[s.0] = deviated[s.0] - anchor[s.0];
    }
    Ok(out)
}

/// Time-averaged full regret per deviation at one state.
#[derive(Debug, Clone, PartialEq)]
pub struct HindsightAudit {
    pub state: StateId,
    pub averages: Vec<f64>,
    /// Indices of deviations whose average exceeds the tolerance.
    pub flagged: Vec<usize>,
}

pub fn audit_hindsight_rationality(
    tree: &TreeIndex,
    rounds: &[(BehavioralStrategy, DaimonStrategy)],
    deviations: &[Deviation],
    s: StateId,
    tolerance: f64,
) -> Result<HindsightAudit> {
    let mut sums = vec![0.0; deviations.len()];
    for (pi, sigma) in rounds {
        for (k, phi) in deviations.iter().enumerate() {
            sums[k] += full_regrets(tree, pi, sigma, phi)?[s.0];
        }
    }
    let t = rounds.len().max(1) as f64;
    let averages: Vec<f64> = sums.iter().map(|x| x / t).collect();
    let flagged = averages.iter().enumerate().filter(|(_, a)| **a > tolerance).map(|(k, _)| k).collect();
    Ok(HindsightAudit { state: s, averages, flagged })
}

/// One verification record.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleReport {
    pub name: String,
    pub game: String,
    pub trials: usize,
    pub max_discrepancy: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl OracleReport {
    pub fn new(name: &str, game: &str, trials: usize, max_discrepancy: f64, tolerance: f64) -> Self {
        OracleReport {
            name: name.to_string(),
            game: game.to_string(),
            trials,
            max_discrepancy,
            tolerance,
            pass: max_discrepancy <= tolerance,
        }
    }

    pub fn to_json_line(&self) -> String {
        serde_json::to_string(self).expect("reports serialize")
    }
}

/// Finite-horizon dynamic programming for a one-player Markov model under a
/// stage policy `policy(t, s)`.
pub fn markov_policy_value(model: &MarkovModel, policy: &dyn Fn(usize, usize) -> Vec<f64>) -> Result<f64> {
    model.validate()?;
    if model.players() != 1 {
        return Err(PohpError::Validation("dynamic programming needs a one-player model".into()));
    }
    let horizon = model.effective_horizon()?;
    let mut next = vec![0.0; model.states];
    for t in (0..horizon).rev() {
        let mut cur = vec![0.0; model.states];
        for (s, v) in cur.iter_mut().enumerate() {
            for (a, p) in policy(t, s).into_iter().enumerate() {
                let future: f64 = model.transitions[s][a].iter().zip(&next).map(|(q, w)| q * w).sum();
                *v += p * (model.rewards[s][a][0] + model.discount * future);
            }
        }
        next = cur;
    }
    Ok(model.initial.iter().zip(&next).map(|(p, v)| p * v).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::bundled::{kuhn, matching_pennies};
    use crate::tree::TreeConfig;

    #[test]
    fn pennies_best_responses() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let mut profile = form.uniform_profile();
        assert_eq!(best_response_value(&form, 1, &profile).unwrap().0, 0.0);
        assert_eq!(game_values(&form, &profile), vec![0.0, 0.0]);
        profile[0].force(StateId(0), 0);
        let (v, x) = best_response_value(&form, 1, &profile).unwrap();
        assert_eq!(v, 1.0);
        assert_eq!(x.choices(), &[1]);
    }

    #[test]
    fn kuhn_uniform_walk() {
        let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
        let v = game_values(&form, &form.uniform_profile());
        assert!((v[0] - 0.125).abs() < 1e-15 && (v[1] + 0.125).abs() < 1e-15);
        assert!(exploitability(&form, &form.uniform_profile()).unwrap() > 0.0);
    }

    #[test]
    fn report_pass_flag_follows_tolerance() {
        assert!(OracleReport::new("x", "g", 1, 1e-12, 1e-9).pass);
        assert!(!OracleReport::new("x", "g", 1, 1e-12, 0.0).pass);
        let line = OracleReport::new("x", "g", 3, 0.0, 0.0).to_json_line();
        assert_eq!(line, r#"{"name":"x","game":"g","trials":3,"max_discrepancy":0.0,"tolerance":0.0,"pass":true}"#);
    }

    #[test]
    fn best_reply_play_has_no_hindsight_regret() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let mut profile = form.uniform_profile();
        profile[1].force(StateId(0), 0);
        profile[0].force(StateId(0), 0);
        let tree = form.tree(0);
        let sigma = form.player_daimon(0, &profile).unwrap();
        let set = crate::deviations::deviation_set(crate::deviations::DeviationKind::External, tree).unwrap();
        let audit =
            audit_hindsight_rationality(tree, &vec![(profile[0].clone(), sigma); 5], &set, StateId(0), 0.0).unwrap();
        assert!(audit.averages.iter().all(|a| *a <= 0.0));
        assert!(audit.flagged.is_empty());
    }
}
