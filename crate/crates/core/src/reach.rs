//! Reach probabilities, their agent/daimon factorization, and beliefs.

use crate::error::{PohpError, Result};
use crate::history::History;
use crate::process::{self, Agent, AgentPolicy, DaimonPolicy, Environment};
use crate::strategy::{BehavioralStrategy, DaimonStrategy};
use crate::tree::{NodeId, NodeKind, StateId, TreeIndex};

/// `ℙ[h] = ℙ_π[h] · ℙ_σ[h]`; the daimon part carries ξ and every γ factor.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReachDecomposition {
    pub total: f64,
    pub agent_part: f64,
    pub daimon_part: f64,
}

/// Reach of a history by the chain rule over the environment directly.
pub fn reach_probability<E, A, P, D>(
    env: &E,
    agent: &A,
    policy: &P,
    daimon: &D,
    history: &History,
) -> Result<ReachDecomposition>
where
    E: Environment,
    A: Agent<E::Obs>,
    P: AgentPolicy<A::State>,
    D: DaimonPolicy,
{
    let xi = env.initial_distribution();
    let mut daimon_part = *xi
        .get(history.origin)
        .ok_or_else(|| PohpError::Validation(format!("{history} has no initial history")))?;
    let mut agent_part = 1.0;
    let turn = env.first_turn();
    let mut state = agent.initial_state();
    let mut current = History::initial(history.origin);
    for action in &history.actions {
        let legal = process::canonical_actions(env, &current)?;
        let Ok(i) = legal.binary_search(action) else {
            return Err(PohpError::Validation(format!("illegal action {action} at {current}")));
        };
        let next = current.child(action.clone());
        if current.is_active(turn) {
            let p = policy.distribution(&state, &legal);
            process::check_distribution(&p, legal.len(), &|| format!("agent policy at {current}"))?;
            daimon_part *= process::continuation(env, &current)?;
            agent_part *= p[i];
            state = agent.act_update(&state, action);
        } else {
            let p = daimon.distribution(&current, &legal);
            process::check_distribution(&p, legal.len(), &|| format!("daimon policy at {current}"))?;
            daimon_part *= p[i];
            state = agent.obs_update(&state, &env.observe(&next)?);
        }
        current = next;
    }
    Ok(ReachDecomposition { total: agent_part * daimon_part, agent_part, daimon_part })
}

/// Reach of a tree node by walking its parent chain.
pub fn node_reach(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, node: NodeId) -> ReachDecomposition {
    let mut agent_part = 1.0;
    let mut daimon_part = 1.0;
    let mut child = node;
    while let Some(parent) = tree.node(child).parent {
        let p = tree.node(parent);
        let i = p.children.iter().position(|&c| c == child).expect("child is listed by its parent");
        match p.kind {
            NodeKind::Active => {
                agent_part *= pi.prob(p.state, i);
                daimon_part *= p.cont;
            }
            NodeKind::Passive => daimon_part *= sigma.prob(parent, i),
        }
        child = parent;
    }
    daimon_part *= tree.node(child).initial_weight;
    ReachDecomposition { total: agent_part * daimon_part, agent_part, daimon_part }
}

fn lookup(tree: &TreeIndex, h: &History) -> Result<NodeId> {
    tree.node_of(h)
        .ok_or_else(|| PohpError::Validation(format!("{h} is not a legal reachable history of this process")))
}

/// Reach of a history in a materialized tree.
pub fn tree_reach(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, h: &History) -> Result<ReachDecomposition> {
    Ok(node_reach(tree, pi, sigma, lookup(tree, h)?))
}

/// `ℙ[h′ ⊑ H | h ⊑ H]`.
pub fn conditional_reach(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    h: &History,
    h_prime: &History,
) -> Result<f64> {
    let given = tree_reach(tree, pi, sigma, h)?.total;
    if given <= 0.0 {
        return Err(PohpError::Domain(format!("cannot condition on {h}, which has zero probability")));
    }
    if h_prime.is_prefix_of(h) {
        return Ok(1.0);
    }
    if h.is_prefix_of(h_prime) {
        return Ok(tree_reach(tree, pi, sigma, h_prime)?.total / given);
    }
    Ok(0.0)
}

/// `ℙ[s] = Σ_{h∈I(s)} ℙ[h]`, with the perfect-recall factored form when it applies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Realization {
    pub total: f64,
    /// `(ℙ_π[s], Σ_{h∈I(s)} ℙ_σ[h])` under perfect recall.
    pub factored: Option<(f64, f64)>,
}

pub fn state_realization_prob(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    s: StateId,
) -> Result<Realization> {
    tree.require_timed()?;
    let mut total = 0.0;
    let mut daimon_sum = 0.0;
    for &m in &tree.state(s).members {
        let r = node_reach(tree, pi, sigma, m);
        total += r.total;
        daimon_sum += r.daimon_part;
    }
    let factored = (tree.has_perfect_recall() && tree.is_active_state(s))
        .then(|| (own_reach(tree, pi, s), daimon_sum));
    Ok(Realization { total, factored })
}

/// `ℙ_π[s]` from a representative history (exact under perfect recall).
pub fn own_reach(tree: &TreeIndex, pi: &BehavioralStrategy, s: StateId) -> f64 {
    tree.state_path(s).iter().map(|&(t, a)| pi.prob(t, a)).product()
}

/// The agent's posterior over `I(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    pub state: StateId,
    pub support: Vec<(NodeId, f64)>,
}

impl Belief {
    pub fn prob(&self, node: NodeId) -> f64 {
        self.support.iter().find(|(n, _)| *n == node).map_or(0.0, |(_, p)| *p)
    }
}

pub fn belief_at(tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy, s: StateId) -> Result<Belief> {
    tree.require_timed()?;
    let reaches: Vec<(NodeId, f64)> =
        tree.state(s).members.iter().map(|&m| (m, node_reach(tree, pi, sigma, m).total)).collect();
    let total: f64 = reaches.iter().map(|(_, p)| p).sum();
    if total <= 0.0 {
        return Err(PohpError::Domain(format!("belief at unrealizable state {} is undefined", tree.state(s).label)));
    }
    Ok(Belief { state: s, support: reaches.into_iter().map(|(m, p)| (m, p / total)).collect() })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::bundled::{kuhn, matching_pennies};
    use crate::games::PohpFormGame;
    use crate::history::History;
    use crate::tree::TreeConfig;

    #[test]
    fn pennies_reach_factors() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let profile = form.uniform_profile();
        let sigma = form.player_daimon(0, &profile).unwrap();
        let tree = form.tree(0);
        let r = tree_reach(tree, &profile[0], &sigma, &History::from_tokens(0, ["H", "H"])).unwrap();
        assert_eq!((r.total, r.agent_part, r.daimon_part), (0.25, 0.5, 0.5));
    }

    #[test]
    fn kuhn_deal_is_the_daimon_part() {
        let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
        let profile = form.uniform_profile();
        let sigma = form.player_daimon(0, &profile).unwrap();
        let r = tree_reach(form.tree(0), &profile[0], &sigma, &History::from_tokens(0, ["J.Q"])).unwrap();
        assert!((r.daimon_part - 1.0 / 6.0).abs() < 1e-15);
        assert_eq!(r.agent_part, 1.0);
    }

    #[test]
    fn pennies_belief_follows_the_opponent() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let mut profile = form.uniform_profile();
        profile[0].set(StateId(0), vec![0.7, 0.3]);
        let tree = form.tree(1);
        let sigma = form.player_daimon(1, &profile).unwrap();
        let belief = belief_at(tree, &profile[1], &sigma, StateId(0)).unwrap();
        let heads = tree.node_of(&History::from_tokens(0, ["H"])).unwrap();
        let tails = tree.node_of(&History::from_tokens(0, ["T"])).unwrap();
        assert!((belief.prob(heads) - 0.7).abs() < 1e-15);
        assert!((belief.prob(tails) - 0.3).abs() < 1e-15);
    }

    #[test]
    fn conditioning_on_an_unreachable_history_fails() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let mut profile = form.uniform_profile();
        profile[0].force(StateId(0), 0);
        let sigma = form.player_daimon(0, &profile).unwrap();
        let from = History::from_tokens(0, ["T"]);
        let to = History::from_tokens(0, ["T", "H"]);
        assert!(matches!(conditional_reach(form.tree(0), &profile[0], &sigma, &from, &to), Err(PohpError::Domain(_))));
    }
}
