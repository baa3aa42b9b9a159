//! Markov games, POMGs and MDPs unrolled into games with a chance player that
//! carries the environment state.

use std::collections::{HashMap, HashSet};
use std::sync::Arc;

use crate::error::{PohpError, Result};
use crate::games::efg::{GameDescription, GameNodeId, GameNodeKind, NodeSpec, SpecKind};
use crate::games::form::{EfgState, GameObs, PohpFormGame, Signal};
use crate::history::Action;
use crate::process::{Agent, PROB_TOLERANCE};
use crate::tree::{NodeKind, StateId, StateKind, TreeConfig};

/// Weight below which discounted tails are dropped when no horizon is given.
pub const TRUNCATION_EPS: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Observability {
    /// The player observes the environment state.
    Full,
    /// The player observes only this label of each state.
    Partial(Vec<String>),
}

/// A finite Markov game. Joint actions are indexed in mixed radix with player 0
/// most significant.
#[derive(Debug, Clone, PartialEq)]
pub struct MarkovModel {
    pub states: usize,
    /// Action tokens per player.
    pub actions: Vec<Vec<String>>,
    /// `transitions[s][joint][s′]`.
    pub transitions: Vec<Vec<Vec<f64>>>,
    /// `rewards[s][joint][player]`, received on the transition out of `s`.
    pub rewards: Vec<Vec<Vec<f64>>>,
    pub initial: Vec<f64>,
    pub discount: f64,
    /// Number of stages; derived from the discount when absent.
    pub horizon: Option<usize>,
    pub observability: Vec<Observability>,
}

fn invalid(msg: impl Into<String>) -> PohpError {
    PohpError::Validation(msg.into())
}

fn check_row(row: &[f64], n: usize, what: &str) -> Result<()> {
    if row.len() != n || row.iter().any(|p| !(*p >= 0.0) || !p.is_finite()) {
        return Err(invalid(format!("{what}: expected {n} nonnegative probabilities")));
    }
    let total: f64 = row.iter().sum();
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(invalid(format!("{what}: probabilities sum to {total}")));
    }
    Ok(())
}

impl MarkovModel {
    pub fn players(&self) -> usize {
        self.actions.len()
    }

    pub fn joint_count(&self) -> usize {
        self.actions.iter().map(Vec::len).product()
    }

    pub fn joint_index(&self, choice: &[usize]) -> usize {
        choice.iter().zip(&self.actions).fold(0, |j, (&a, acts)| j * acts.len() + a)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.states;
        let joints = self.joint_count();
        if n == 0 || self.players() == 0 || self.actions.iter().any(Vec::is_empty) {
            return Err(invalid("a Markov model needs states, players, and actions"));
        }
        if self.observability.len() != self.players() {
            return Err(invalid("one observability entry per player is required"));
        }
        for o in &self.observability {
            if let Observability::Partial(labels) = o {
                if labels.len() != n {
                    return Err(invalid("partial observability needs one label per state"));
                }
            }
        }
        check_row(&self.initial, n, "initial distribution")?;
        if !(0.0..=1.0).contains(&self.discount) {
            return Err(invalid(format!("discount {} outside [0, 1]", self.discount)));
        }
        if self.transitions.len() != n || self.rewards.len() != n {
            return Err(invalid("transitions and rewards need one entry per state"));
        }
        for s in 0..n {
            if self.transitions[s].len() != joints || self.rewards[s].len() != joints {
                return Err(invalid(format!("state {s}: expected {joints} joint actions")));
            }
            for j in 0..joints {
                check_row(&self.transitions[s][j], n, &format!("transition row s{s} j{j}"))?;
                if self.rewards[s][j].len() != self.players() || self.rewards[s][j].iter().any(|r| !r.is_finite()) {
                    return Err(invalid(format!("reward s{s} j{j}: expected one finite reward per player")));
                }
            }
        }
        Ok(())
    }

    /// Explicit horizon, or the first depth at which `discount^d · R` drops below [`TRUNCATION_EPS`].
    pub fn effective_horizon(&self) -> Result<usize> {
        if let Some(h) = self.horizon {
            return Ok(h);
        }
        let bound = self.rewards.iter().flatten().flatten().fold(0.0f64, |m, r| m.max(r.abs()));
        if bound == 0.0 {
            return Ok(1);
        }
        if self.discount >= 1.0 {
            return Err(invalid("an undiscounted model needs an explicit horizon"));
        }
        let mut d = 1;
        while self.discount.powi(d as i32) * bound >= TRUNCATION_EPS {
            d += 1;
        }
        Ok(d)
    }

    fn label(&self, player: usize, t: usize, s: usize) -> String {
        match &self.observability[player] {
            Observability::Full => format!("t{t}:s{s}"),
            Observability::Partial(labels) => format!("t{t}:{}", labels[s]),
        }
    }

    /// The unrolled game description.
    pub fn to_game(&self) -> Result<GameDescription> {
        self.validate()?;
        let horizon = self.effective_horizon()?;
        let mut specs = Vec::new();
        let outcomes = |row: &[f64]| -> Vec<(String, f64)> {
            row.iter().enumerate().filter(|(_, p)| **p > 0.0).map(|(k, p)| (format!("s{k}"), *p)).collect()
        };
        specs.push(NodeSpec {
            path: Vec::new(),
            kind: SpecKind::Chance { label: Some("init".into()), outcomes: outcomes(&self.initial) },
            rewards: None,
            cont: None,
            line: 0,
        });
        let mut stack: Vec<(usize, usize, Vec<String>)> = self
            .initial
            .iter()
            .enumerate()
            .filter(|(_, p)| **p > 0.0)
            .map(|(k, _)| (0, k, vec![format!("s{k}")]))
            .collect();
        let zeros = vec![0.0; self.players()];
        // Stage starts after t = 0 are pushed together with their incoming rewards and continuation.
        while let Some((t, s, path)) = stack.pop() {
            self.push_stage(t, s, &path, 0, &mut Vec::new(), horizon, &mut specs, &mut stack, &zeros, &outcomes)?;
        }
        GameDescription::from_specs(self.players(), specs)
    }

    #[allow(clippy::too_many_arguments)]
    fn push_stage(
        &self,
        t: usize,
        s: usize,
        path: &[String],
        player: usize,
        choice: &mut Vec<usize>,
        horizon: usize,
        specs: &mut Vec<NodeSpec>,
        stack: &mut Vec<(usize, usize, Vec<String>)>,
        zeros: &[f64],
        outcomes: &dyn Fn(&[f64]) -> Vec<(String, f64)>,
    ) -> Result<()> {
        if player == 0 && t == 0 {
            specs.push(NodeSpec {
                path: path.to_vec(),
                kind: SpecKind::Decision { player: 0, label: Some(self.label(0, t, s)), actions: self.actions[0].clone() },
                rewards: None,
                cont: None,
                line: 0,
            });
        }
        if player == self.players() {
            let j = self.joint_index(choice);
            specs.push(NodeSpec {
                path: path.to_vec(),
                kind: SpecKind::Chance { label: Some(format!("t{t}:s{s}:j{j}")), outcomes: outcomes(&self.transitions[s][j]) },
                rewards: None,
                cont: None,
                line: 0,
            });
            for (k, p) in self.transitions[s][j].iter().enumerate() {
                if *p <= 0.0 {
                    continue;
                }
                let mut child = path.to_vec();
                child.push(format!("s{k}"));
                let rewards = Some(self.rewards[s][j].clone());
                if t + 1 == horizon {
                    specs.push(NodeSpec {
                        path: child,
                        kind: SpecKind::Terminal { utilities: zeros.to_vec() },
                        rewards,
                        cont: None,
                        line: 0,
                    });
                } else {
                    specs.push(NodeSpec {
                        path: child.clone(),
                        kind: SpecKind::Decision {
                            player: 0,
                            label: Some(self.label(0, t + 1, k)),
                            actions: self.actions[0].clone(),
                        },
                        rewards,
                        cont: Some(self.discount),
                        line: 0,
                    });
                    stack.push((t + 1, k, child));
                }
            }
            return Ok(());
        }
        for (a, token) in self.actions[player].iter().enumerate() {
            let mut child = path.to_vec();
            child.push(token.clone());
            if player + 1 < self.players() {
                specs.push(NodeSpec {
                    path: child.clone(),
                    kind: SpecKind::Decision {
                        player: player + 1,
                        label: Some(self.label(player + 1, t, s)),
                        actions: self.actions[player + 1].clone(),
                    },
                    rewards: None,
                    cont: None,
                    line: 0,
                });
            }
            choice.push(a);
            self.push_stage(t, s, &child, player + 1, choice, horizon, specs, stack, zeros, outcomes)?;
            choice.pop();
        }
        Ok(())
    }
}

/// Chance's agent for unrolled Markov models: after emitting a next state its
/// information state becomes that environment state at the next stage.
#[derive(Debug, Clone, Copy, Default)]
pub struct MarkovChanceAgent;

fn stage_of(label: &str) -> Option<usize> {
    label.strip_prefix('t')?.split(':').next()?.parse().ok()
}

impl Agent<GameObs> for MarkovChanceAgent {
    type State = EfgState;

    fn initial_state(&self) -> EfgState {
        EfgState::Observed(Arc::from("init"))
    }

    fn act_update(&self, state: &EfgState, action: &Action) -> EfgState {
        match state {
            EfgState::Observed(l) if &**l == "init" => EfgState::Observed(Arc::from(format!("t0:{action}").as_str())),
            EfgState::Observed(l) => match stage_of(l) {
                Some(t) => EfgState::Observed(Arc::from(format!("t{}:{action}", t + 1).as_str())),
                None => EfgState::Acted(Box::new(state.clone()), action.clone()),
            },
            _ => EfgState::Acted(Box::new(state.clone()), action.clone()),
        }
    }

    fn obs_update(&self, _state: &EfgState, obs: &GameObs) -> EfgState {
        match &obs.signal {
            Signal::InfoSet(l) => EfgState::Observed(l.clone()),
            Signal::Terminal(p) => EfgState::Observed(Arc::from(format!("end:{p}").as_str())),
        }
    }

    fn reward(&self, obs: &GameObs) -> f64 {
        obs.reward
    }
}

pub fn markov_to_pohp_form(model: &MarkovModel, config: &TreeConfig) -> Result<PohpFormGame> {
    let game = Arc::new(model.to_game()?);
    PohpFormGame::with_chance_agent(game, &MarkovChanceAgent, config)
}

/// Chance's successor states depend only on its current state and the joint action:
/// for all members of a passive chance state, the same joint action leads to the
/// same active state, and the same chance action then to the same passive state.
pub fn check_markov_constraint(form: &PohpFormGame) -> Result<()> {
    let data = form.chance();
    let tree = &data.tree;
    for info in tree.states().iter().filter(|i| i.kind == StateKind::Passive) {
        let mut after_joint: HashMap<&Action, StateId> = HashMap::new();
        let mut after_chance: HashMap<(&Action, &Action), StateId> = HashMap::new();
        for &m in &info.members {
            let node = tree.node(m);
            for (token, &c) in node.actions.iter().zip(&node.children) {
                let active = tree.node(c);
                if !active.is_live_active() {
                    continue;
                }
                if *after_joint.entry(token).or_insert(active.state) != active.state {
                    return Err(invalid(format!("Markov constraint fails at {} after {token}", info.label)));
                }
                for (b, &p) in active.actions.iter().zip(&active.children) {
                    let next = tree.node(p).state;
                    if *after_chance.entry((token, b)).or_insert(next) != next {
                        return Err(invalid(format!("Markov constraint fails at {} after {token}, {b}", info.label)));
                    }
                }
            }
        }
    }
    Ok(())
}

/// Chance's passive states biject with player `i`'s active states: each live passive
/// chance state leads to exactly one active state of player `i`, distinct passive
/// states lead to distinct ones, and every active state is hit.
pub fn check_full_observability(form: &PohpFormGame, player: usize) -> Result<()> {
    let data = form.chance();
    let tree = &data.tree;
    let mut hit: HashSet<StateId> = HashSet::new();
    for info in tree.states() {
        if info.kind != StateKind::Passive {
            continue;
        }
        let mut reached: HashSet<StateId> = HashSet::new();
        for &m in &info.members {
            debug_assert_eq!(tree.node(m).kind, NodeKind::Passive);
            collect_player_states(form, data.game_node(m), player, &mut reached);
        }
        if reached.is_empty() {
            continue;
        }
        if reached.len() != 1 {
            return Err(invalid(format!("chance state {} maps to {} player states", info.label, reached.len())));
        }
        let target = *reached.iter().next().expect("one element");
        if !hit.insert(target) {
            return Err(invalid(format!("player state {} is hit twice", form.tree(player).state(target).label)));
        }
    }
    let active = form.tree(player).num_active();
    if hit.len() != active {
        return Err(invalid(format!("{} of {active} player states are hit", hit.len())));
    }
    Ok(())
}

fn collect_player_states(form: &PohpFormGame, n: GameNodeId, player: usize, out: &mut HashSet<StateId>) {
    let node = form.game().node(n);
    let GameNodeKind::Decision { player: p, .. } = &node.kind else {
        return;
    };
    if n != form.game().root() && node.cont == 0.0 {
        return;
    }
    if *p == player {
        out.extend(form.owner(n));
        return;
    }
    for &c in &node.children {
        collect_player_states(form, c, player, out);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::bundled::{chain_mdp3, chain_mdp3_model};

    #[test]
    fn horizon_rules() {
        let mut m = chain_mdp3_model();
        assert_eq!(m.effective_horizon().unwrap(), 3);
        m.horizon = None;
        // 0.9^d < 1e-12 first holds at d = 263.
        assert_eq!(m.effective_horizon().unwrap(), 263);
        m.discount = 1.0;
        assert!(matches!(m.effective_horizon(), Err(PohpError::Validation(_))));
    }

    #[test]
    fn rejects_bad_rows() {
        let mut m = chain_mdp3_model();
        m.transitions[1][0] = vec![0.5, 0.0, 0.0];
        assert!(m.validate().is_err());
        let mut m = chain_mdp3_model();
        m.observability = vec![Observability::Partial(vec!["a".into()])];
        assert!(m.validate().is_err());
    }

    #[test]
    fn chain_is_markov_and_fully_observed() {
        let form = chain_mdp3().unwrap();
        check_markov_constraint(&form).unwrap();
        check_full_observability(&form, 0).unwrap();
        assert_eq!(form.tree(0).num_active(), 6);
    }

    #[test]
    fn aliased_states_are_not_fully_observed() {
        let mut m = chain_mdp3_model();
        m.observability = vec![Observability::Partial(vec!["x".into(), "x".into(), "y".into()])];
        let form = markov_to_pohp_form(&m, &TreeConfig::default()).unwrap();
        check_markov_constraint(&form).unwrap();
        assert!(check_full_observability(&form, 0).is_err());
    }
}
