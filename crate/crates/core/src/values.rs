//! Realization-weighted returns, counterfactual values, regrets, and the
//! value/regret decomposition checks.

use crate::deviations::{self, Deviation, TruncMode, DEFAULT_PURE_BUDGET};
use crate::error::{PohpError, Result};
use crate::reach::own_reach;
use crate::strategy::{BehavioralStrategy, DaimonStrategy, MixedStrategy};
use crate::tree::{NodeId, NodeKind, StateId, TreeIndex};

/// One forward (reach) and one backward (return) pass over a tree.
#[derive(Debug, Clone)]
pub struct Evaluation {
    /// `ℙ_π[h]` per node.
    pub agent: Vec<f64>,
    /// `ℙ_σ[h]` per node, including ξ and γ.
    pub daimon: Vec<f64>,
    /// `𝔼[G_h(π;σ)]` per node.
    pub ret: Vec<f64>,
}

pub fn evaluate(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy) -> Evaluation {
    let nodes = tree.nodes();
    let n = nodes.len();
    let mut agent = vec![0.0; n];
    let mut daimon = vec![0.0; n];
    let mut ret = vec![0.0; n];
    for (i, node) in nodes.iter().enumerate() {
        if node.parent.is_none() {
            agent[i] = 1.0;
            daimon[i] = node.initial_weight;
        }
        if node.children.is_empty() {
            continue;
        }
        match node.kind {
            NodeKind::Active => {
                let row = pi.probs(node.state);
                for (k, c) in node.children.iter().enumerate() {
                    agent[c.0] = agent[i] * row[k];
                    daimon[c.0] = daimon[i] * node.cont;
                }
            }
            NodeKind::Passive => {
                let row = sigma.probs(NodeId(i));
                for (k, c) in node.children.iter().enumerate() {
                    agent[c.0] = agent[i];
                    daimon[c.0] = daimon[i] * row[k];
                }
            }
        }
    }
    for (i, node) in nodes.iter().enumerate().rev() {
        if node.children.is_empty() {
            continue;
        }
        ret[i] = match node.kind {
            NodeKind::Active => {
                let row = pi.probs(node.state);
                node.cont * node.children.iter().zip(row).map(|(c, p)| p * ret[c.0]).sum::<f64>()
            }
            NodeKind::Passive => {
                let row = sigma.probs(NodeId(i));
                node.children.iter().zip(row).map(|(c, p)| p * (nodes[c.0].reward + ret[c.0])).sum()
            }
        };
    }
    Evaluation { agent, daimon, ret }
}

impl Evaluation {
    /// `v_s = Σ_{h∈I(s)} ℙ[h] 𝔼[G_h]`.
    pub fn rw_value(&self, tree: &TreeIndex, s: StateId) -> f64 {
        tree.state(s).live.iter().map(|m| self.agent[m.0] * self.daimon[m.0] * self.ret[m.0]).sum()
    }

    /// `v^CF_s = Σ_{h∈I(s)} ℙ_σ[h] 𝔼[G_h]`.
    pub fn cf_value(&self, tree: &TreeIndex, s: StateId) -> f64 {
        tree.state(s).live.iter().map(|m| self.daimon[m.0] * self.ret[m.0]).sum()
    }

    pub fn rw_values(&self, tree: &TreeIndex) -> Vec<f64> {
        tree.active_states().map(|s| self.rw_value(tree, s)).collect()
    }

    /// `q_s(a)`: counterfactual value of taking `a` at `s` and following π afterwards.
    pub fn action_values(&self, tree: &TreeIndex, sigma: &DaimonStrategy, s: StateId) -> Vec<f64> {
        let nodes = tree.nodes();
        let mut q = vec![0.0; tree.state(s).actions.len()];
        for &m in &tree.state(s).live {
            let h = &nodes[m.0];
            let w = self.daimon[m.0] * h.cont;
            for (a, passive) in h.children.iter().enumerate() {
                let row = sigma.probs(*passive);
                let inner: f64 = nodes[passive.0]
                    .children
                    .iter()
                    .zip(row)
                    .map(|(c, p)| p * (nodes[c.0].reward + self.ret[c.0]))
                    .sum();
                q[a] += w * inner;
            }
        }
        q
    }

    /// `r_s = Σ_{h∈I(s)} ℙ_σ[h] γ(h) Σ_a π(a|s) Σ_b σ(b|ha) r(ω(hab))`.
    pub fn local_reward(&self, tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, s: StateId) -> f64 {
        let nodes = tree.nodes();
        let row = pi.probs(s);
        let mut total = 0.0;
        for &m in &tree.state(s).live {
            let h = &nodes[m.0];
            for (a, passive) in h.children.iter().enumerate() {
                let srow = sigma.probs(*passive);
                let r: f64 = nodes[passive.0].children.iter().zip(srow).map(|(c, p)| p * nodes[c.0].reward).sum();
                total += self.daimon[m.0] * h.cont * row[a] * r;
            }
        }
        total
    }
}

/// `v_s` for every active state under a mixed strategy.
pub fn state_values(tree: &TreeIndex, pi: &MixedStrategy, sigma: &DaimonStrategy) -> Result<Vec<f64>> {
    match pi {
        MixedStrategy::Behavioral(b) => Ok(evaluate(tree, b, sigma).rw_values(tree)),
        MixedStrategy::Enumerated(mu) => {
            let xs = deviations::enumerate_pure_strategies(tree, DEFAULT_PURE_BUDGET)?;
            if xs.len() != mu.len() {
                return Err(PohpError::Validation(format!(
                    "mixed strategy has {} entries for {} pure strategies",
                    mu.len(),
                    xs.len()
                )));
            }
            let mut out = vec![0.0; tree.num_active()];
            for (x, &w) in xs.iter().zip(mu) {
                if w == 0.0 {
                    continue;
                }
                let vals = evaluate(tree, &BehavioralStrategy::from_pure(tree, x), sigma).rw_values(tree);
                for (o, v) in out.iter_mut().zip(vals) {
                    *o += w * v;
                }
            }
            Ok(out)
        }
    }
}

/// Realization-weighted expected return; zero at unrealizable states.
pub fn rw_expected_return(tree: &TreeIndex, pi: &MixedStrategy, sigma: &DaimonStrategy, s: StateId) -> Result<f64> {
    tree.require_timed()?;
    check_state(tree, s)?;
    Ok(state_values(tree, pi, sigma)?[s.0])
}

pub fn counterfactual_value(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, s: StateId) -> Result<f64> {
    tree.require_perfect_recall()?;
    check_state(tree, s)?;
    Ok(evaluate(tree, pi, sigma).cf_value(tree, s))
}

pub fn local_reward(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, s: StateId) -> Result<f64> {
    tree.require_perfect_recall()?;
    check_state(tree, s)?;
    Ok(evaluate(tree, pi, sigma).local_reward(tree, pi, sigma, s))
}

fn check_state(tree: &TreeIndex, s: StateId) -> Result<()> {
    if tree.is_active_state(s) {
        Ok(())
    } else {
        Err(PohpError::Validation(format!("state {} is not an active state", s.0)))
    }
}

fn deviated_values(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    phi: &Deviation,
) -> Result<Vec<f64>> {
    let pushed = deviations::pushforward(phi, &MixedStrategy::Behavioral(pi.clone()), tree)?;
    state_values(tree, &pushed, sigma)
}

fn truncated_value(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    phi: &Deviation,
    s: StateId,
    mode: TruncMode,
) -> Result<f64> {
    let t = deviations::truncate(phi, s, mode, tree)?;
    Ok(deviated_values(tree, pi, sigma, &t)?[s.0])
}

/// `v_s(φ_{≼s}π) − v_s(φ_{≺s}π)`.
pub fn immediate_regret(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    phi: &Deviation,
    s: StateId,
) -> Result<f64> {
    tree.require_timed()?;
    check_state(tree, s)?;
    Ok(truncated_value(tree, pi, sigma, phi, s, TruncMode::Through)?
        - truncated_value(tree, pi, sigma, phi, s, TruncMode::Before)?)
}

/// The perfect-recall form `ℙ_{φ_{≺s}π}[s] (v^CF_s(φ_{≼s}π) − v^CF_s(π))`.
pub fn immediate_regret_cf(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    phi: &Deviation,
    s: StateId,
) -> Result<f64> {
    tree.require_perfect_recall()?;
    check_state(tree, s)?;
    let before = deviations::truncate(phi, s, TruncMode::Before, tree)?;
    let through = deviations::truncate(phi, s, TruncMode::Through, tree)?;
    let (Some(pb), Some(pt)) = (
        deviations::pushforward_behavioral(&before, pi),
        deviations::pushforward_behavioral(&through, pi),
    ) else {
        return Err(PohpError::Contract("counterfactual form needs a behavioral pushforward".into()));
    };
    let weight = own_reach(tree, &pb, s);
    let deviated = evaluate(tree, &pt, sigma).cf_value(tree, s);
    let base = evaluate(tree, pi, sigma).cf_value(tree, s);
    Ok(weight * (deviated - base))
}

/// Full regret from `s`, anchored at the play that reaches `s`:
/// `v_s(φπ) − v_s(φ_{≺s}π)`. At the initial state this is `v(φπ) − v(π)`.
pub fn full_regret(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    phi: &Deviation,
    s: StateId,
) -> Result<f64> {
    tree.require_timed()?;
    check_state(tree, s)?;
    Ok(deviated_values(tree, pi, sigma, phi)?[s.0] - truncated_value(tree, pi, sigma, phi, s, TruncMode::Before)?)
}

/// Distinct child active states `∪_a 𝒮_𝒜(s, a)`.
pub fn child_states(tree: &TreeIndex, s: StateId) -> Vec<StateId> {
    let mut out: Vec<StateId> = tree.state(s).children.iter().flatten().copied().collect();
    out.sort();
    out.dedup();
    out
}

/// Max over active states of `|v_s − (ℙ_π[s] r_s + Σ_{s′} v_{s′})|`.
pub fn verify_lemma1(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy) -> Result<f64> {
    tree.require_perfect_recall()?;
    let ev = evaluate(tree, pi, sigma);
    let values = ev.rw_values(tree);
    let mut worst: f64 = 0.0;
    for s in tree.active_states() {
        let rhs = own_reach(tree, pi, s) * ev.local_reward(tree, pi, sigma, s)
            + child_states(tree, s).iter().map(|c| values[c.0]).sum::<f64>();
        worst = worst.max((values[s.0] - rhs).abs());
    }
    Ok(worst)
}

/// Max over active states of `|ρ_s(φ) − (ρ_s(φ_{≼s}) + Σ_{s′} ρ_{s′}(φ))|`.
pub fn verify_lemma2(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, phi: &Deviation) -> Result<f64> {
    tree.require_perfect_recall()?;
    let full_values = deviated_values(tree, pi, sigma, phi)?;
    let mut before = vec![0.0; tree.num_active()];
    let mut through = vec![0.0; tree.num_active()];
    for s in tree.active_states() {
        before[s.0] = truncated_value(tree, pi, sigma, phi, s, TruncMode::Before)?;
        through[s.0] = truncated_value(tree, pi, sigma, phi, s, TruncMode::Through)?;
    }
    let full = |s: StateId| full_values[s.0] - before[s.0];
    let mut worst: f64 = 0.0;
    for s in tree.active_states() {
        let rhs = (through[s.0] - before[s.0]) + child_states(tree, s).iter().map(|&c| full(c)).sum::<f64>();
        worst = worst.max((full(s) - rhs).abs());
    }
    Ok(worst)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateValueReport {
    pub state: StateId,
    pub realizable: bool,
    pub rw_return: f64,
    /// Present only under perfect recall.
    pub cf_value: Option<f64>,
    pub local_reward: Option<f64>,
}

pub fn state_report(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, s: StateId) -> Result<StateValueReport> {
    tree.require_timed()?;
    check_state(tree, s)?;
    let ev = evaluate(tree, pi, sigma);
    let realizable = tree.state(s).members.iter().any(|m| ev.agent[m.0] * ev.daimon[m.0] > 0.0);
    let pr = tree.has_perfect_recall();
    Ok(StateValueReport {
        state: s,
        realizable,
        rw_return: ev.rw_value(tree, s),
        cf_value: pr.then(|| ev.cf_value(tree, s)),
        local_reward: pr.then(|| ev.local_reward(tree, pi, sigma, s)),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RegretReport {
    pub state: StateId,
    pub full: f64,
    pub immediate: f64,
}

pub fn regret_report(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    phi: &Deviation,
    s: StateId,
) -> Result<RegretReport> {
    Ok(RegretReport {
        state: s,
        full: full_regret(tree, pi, sigma, phi, s)?,
        immediate: immediate_regret(tree, pi, sigma, phi, s)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::bundled::{chain_mdp3, kuhn};
    use crate::games::gadget::gadget_perfect_recall;
    use crate::games::PohpFormGame;
    use crate::strategy::PureStrategy;
    use crate::tree::{build_tree_index, TreeConfig};

    #[test]
    fn chain_always_advance_is_point_eight_one() {
        let form = chain_mdp3().unwrap();
        let tree = form.tree(0);
        let pi = BehavioralStrategy::from_pure(tree, &PureStrategy::constant(tree, 0));
        let sigma = form.player_daimon(0, std::slice::from_ref(&pi)).unwrap();
        let v = state_values(tree, &MixedStrategy::Behavioral(pi.clone()), &sigma).unwrap();
        let first: f64 = tree.active_states().filter(|s| tree.state(*s).agent_steps == 0).map(|s| v[s.0]).sum();
        assert!((first - 0.81).abs() < 1e-12);
        assert!((form.view_value(0, &[pi]).unwrap() - 0.81).abs() < 1e-12);
    }

    #[test]
    fn kuhn_uniform_value() {
        let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
        let profile = form.uniform_profile();
        assert!((form.view_value(0, &profile).unwrap() - 0.125).abs() < 1e-12);
        assert!((form.view_value(1, &profile).unwrap() + 0.125).abs() < 1e-12);
    }

    #[test]
    fn decompositions_hold_on_the_remembering_gadget() {
        let (env, agent) = gadget_perfect_recall();
        let tree = build_tree_index(&env, &agent, &TreeConfig::default()).unwrap();
        let pi = BehavioralStrategy::uniform(&tree);
        let sigma = DaimonStrategy::uniform(&tree);
        assert!(verify_lemma1(&tree, &pi, &sigma).unwrap() < 1e-12);
        let phi = Deviation::external(&PureStrategy::constant(&tree, 1));
        assert!(verify_lemma2(&tree, &pi, &sigma, &phi).unwrap() < 1e-12);
    }

    #[test]
    fn both_immediate_regret_forms_agree() {
        let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
        let profile = form.uniform_profile();
        let tree = form.tree(0);
        let sigma = form.player_daimon(0, &profile).unwrap();
        let phi = Deviation::external(&PureStrategy::constant(tree, 0));
        for s in tree.active_states() {
            let a = immediate_regret(tree, &profile[0], &sigma, &phi, s).unwrap();
            let b = immediate_regret_cf(tree, &profile[0], &sigma, &phi, s).unwrap();
            assert!((a - b).abs() < 1e-12, "{s:?}: {a} vs {b}");
        }
    }

    #[test]
    fn counterfactual_value_needs_perfect_recall() {
        let form = chain_mdp3().unwrap();
        let tree = form.tree(0);
        let pi = BehavioralStrategy::uniform(tree);
        let sigma = form.player_daimon(0, std::slice::from_ref(&pi)).unwrap();
        assert!(matches!(counterfactual_value(tree, &pi, &sigma, StateId(0)), Err(PohpError::Contract(_))));
    }
}
