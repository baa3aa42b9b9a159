//! The environment/agent interfaces and trajectory-level evaluation.
//!
//! An [`Environment`] supplies the first-turn indicator, legal actions, observations,
//! continuation probabilities and the initial-history distribution. An [`Agent`] turns
//! actions and observations into information states and observations into rewards.
//! Information states are opaque: the library only hashes and compares them.

use std::fmt::Debug;
use std::hash::Hash;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{PohpError, Result};
use crate::history::{Action, History, Turn};

/// Tolerance used when checking that probabilities sum to one.
pub const PROB_TOLERANCE: f64 = 1e-9;

/// Step cap for episode sampling when the environment declares no horizon.
pub const DEFAULT_STEP_CAP: usize = 100_000;

pub trait Environment {
    type Obs: Clone + Debug;

    fn first_turn(&self) -> Turn;

    /// The distribution over initial histories, indexed by origin.
    fn initial_distribution(&self) -> Vec<f64>;

    fn legal_actions(&self, history: &History) -> Result<Vec<Action>>;

    /// The observation generated at a history that immediately follows a daimon action.
    fn observe(&self, history: &History) -> Result<Self::Obs>;

    /// Probability that the process continues at an active history.
    fn continue_prob(&self, history: &History) -> Result<f64>;

    fn reward_bound(&self) -> f64;

    /// A length beyond which every history is terminal, if known.
    fn horizon(&self) -> Option<usize> {
        None
    }
}

pub trait Agent<O> {
    type State: Clone + Eq + Hash + Debug;

    fn initial_state(&self) -> Self::State;

    fn act_update(&self, state: &Self::State, action: &Action) -> Self::State;

    fn obs_update(&self, state: &Self::State, obs: &O) -> Self::State;

    fn reward(&self, obs: &O) -> f64;

    /// Legal actions as read off the information state, when the agent can tell.
    fn legal_actions_of_state(&self, _state: &Self::State) -> Option<Vec<Action>> {
        None
    }
}

/// An agent's behavioral strategy over its information states.
pub trait AgentPolicy<S> {
    fn distribution(&self, state: &S, actions: &[Action]) -> Vec<f64>;
}

impl<S, F> AgentPolicy<S> for F
where
    F: Fn(&S, &[Action]) -> Vec<f64>,
{
    fn distribution(&self, state: &S, actions: &[Action]) -> Vec<f64> {
        self(state, actions)
    }
}

/// The daimon's behavioral strategy over passive histories.
pub trait DaimonPolicy {
    fn distribution(&self, history: &History, actions: &[Action]) -> Vec<f64>;
}

impl<F> DaimonPolicy for F
where
    F: Fn(&History, &[Action]) -> Vec<f64>,
{
    fn distribution(&self, history: &History, actions: &[Action]) -> Vec<f64> {
        self(history, actions)
    }
}

/// Uniform play over whatever actions are legal.
#[derive(Debug, Clone, Copy, Default)]
pub struct Uniform;

impl<S> AgentPolicy<S> for Uniform {
    fn distribution(&self, _: &S, actions: &[Action]) -> Vec<f64> {
        vec![1.0 / actions.len() as f64; actions.len()]
    }
}

impl DaimonPolicy for Uniform {
    fn distribution(&self, _: &History, actions: &[Action]) -> Vec<f64> {
        vec![1.0 / actions.len() as f64; actions.len()]
    }
}

pub(crate) fn check_distribution(probs: &[f64], n: usize, what: &dyn Fn() -> String) -> Result<()> {
    if probs.len() != n {
        return Err(PohpError::Validation(format!(
            "{}: expected {n} probabilities, got {}",
            what(),
            probs.len()
        )));
    }
    let mut total = 0.0;
    for &p in probs {
        if !(p >= 0.0) || !p.is_finite() {
            return Err(PohpError::Validation(format!("{}: invalid probability {p}", what())));
        }
        total += p;
    }
    if (total - 1.0).abs() > PROB_TOLERANCE {
        return Err(PohpError::Validation(format!("{}: probabilities sum to {total}", what())));
    }
    Ok(())
}

fn check_probability(p: f64, what: &dyn Fn() -> String) -> Result<f64> {
    if (0.0..=1.0).contains(&p) {
        Ok(p)
    } else {
        Err(PohpError::Validation(format!("{}: continuation probability {p} outside [0, 1]", what())))
    }
}

/// Legal actions in canonical (lexicographic) order; empty or duplicated sets are rejected.
pub fn canonical_actions<E: Environment>(env: &E, history: &History) -> Result<Vec<Action>> {
    let mut actions = env.legal_actions(history)?;
    actions.sort();
    let n = actions.len();
    actions.dedup();
    if actions.is_empty() {
        return Err(PohpError::Validation(format!("no legal actions at {history}")));
    }
    if actions.len() != n {
        return Err(PohpError::Validation(format!("duplicate legal actions at {history}")));
    }
    Ok(actions)
}

pub(crate) fn initial_distribution<E: Environment>(env: &E) -> Result<Vec<f64>> {
    let xi = env.initial_distribution();
    check_distribution(&xi, xi.len(), &|| "initial-history distribution".to_string())?;
    Ok(xi)
}

pub(crate) fn continuation<E: Environment>(env: &E, history: &History) -> Result<f64> {
    check_probability(env.continue_prob(history)?, &|| history.to_string())
}

/// The unified information-state update `u(h)`, computed along the prefixes of `history`.
pub fn unified_update<E, A>(env: &E, agent: &A, history: &History) -> Result<A::State>
where
    E: Environment,
    A: Agent<E::Obs>,
{
    let xi = initial_distribution(env)?;
    match xi.get(history.origin) {
        Some(&p) if p > 0.0 => {}
        _ => {
            return Err(PohpError::Structure(format!(
                "{history} does not extend a reachable initial history"
            )))
        }
    }
    let turn = env.first_turn();
    let mut state = agent.initial_state();
    let mut current = History::initial(history.origin);
    for action in &history.actions {
        if current.is_active(turn) && continuation(env, &current)? == 0.0 {
            return Err(PohpError::Structure(format!("{history} continues past terminal {current}")));
        }
        let legal = canonical_actions(env, &current)?;
        if legal.binary_search(action).is_err() {
            return Err(PohpError::Structure(format!("illegal action {action} at {current}")));
        }
        let next = current.child(action.clone());
        state = if current.is_active(turn) {
            agent.act_update(&state, action)
        } else {
            agent.obs_update(&state, &env.observe(&next)?)
        };
        current = next;
    }
    Ok(state)
}

/// One sampled trajectory.
#[derive(Debug, Clone)]
pub struct Episode<O> {
    pub history: History,
    pub observations: Vec<O>,
    pub rewards: Vec<f64>,
    /// Sum of rewards received; continuation indicators are already applied.
    pub ret: f64,
}

fn sample_index<R: Rng>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|&p| p > 0.0).unwrap_or(probs.len() - 1)
}

/// Sample one episode with a seeded ChaCha stream.
pub fn sample_episode<E, A, P, D>(
    env: &E,
    agent: &A,
    policy: &P,
    daimon: &D,
    seed: u64,
) -> Result<Episode<E::Obs>>
where
    E: Environment,
    A: Agent<E::Obs>,
    P: AgentPolicy<A::State>,
    D: DaimonPolicy,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    sample_episode_with(env, agent, policy, daimon, &mut rng)
}

/// Sample one episode from a caller-owned random stream.
pub fn sample_episode_with<E, A, P, D, R>(
    env: &E,
    agent: &A,
    policy: &P,
    daimon: &D,
    rng: &mut R,
) -> Result<Episode<E::Obs>>
where
    E: Environment,
    A: Agent<E::Obs>,
    P: AgentPolicy<A::State>,
    D: DaimonPolicy,
    R: Rng,
{
    let xi = initial_distribution(env)?;
    let turn = env.first_turn();
    let cap = env.horizon().map_or(DEFAULT_STEP_CAP, |d| d + 1);
    let mut history = History::initial(sample_index(&xi, rng));
    let mut state = agent.initial_state();
    let mut episode = Episode { history: history.clone(), observations: Vec::new(), rewards: Vec::new(), ret: 0.0 };
    loop {
        if history.len() > cap {
            return Err(PohpError::Runtime(format!("episode exceeded {cap} steps without terminating")));
        }
        let actions = canonical_actions(env, &history);
        if history.is_active(turn) {
            let gamma = continuation(env, &history)?;
            if gamma == 0.0 || rng.gen::<f64>() >= gamma {
                break;
            }
            let actions = actions?;
            let probs = policy.distribution(&state, &actions);
            check_distribution(&probs, actions.len(), &|| format!("agent policy at {history}"))?;
            let a = actions[sample_index(&probs, rng)].clone();
            state = agent.act_update(&state, &a);
            history = history.child(a);
        } else {
            let actions = actions?;
            let probs = daimon.distribution(&history, &actions);
            check_distribution(&probs, actions.len(), &|| format!("daimon policy at {history}"))?;
            let b = actions[sample_index(&probs, rng)].clone();
            history = history.child(b);
            let obs = env.observe(&history)?;
            let r = agent.reward(&obs);
            state = agent.obs_update(&state, &obs);
            episode.ret += r;
            episode.rewards.push(r);
            episode.observations.push(obs);
        }
    }
    episode.history = history;
    Ok(episode)
}

/// Exact expected return from `from` by a full recursive walk of the process.
///
/// From an active history the first factor is that history's continuation
/// probability; from a passive history the daimon moves first.
pub fn expected_return<E, A, P, D>(env: &E, agent: &A, policy: &P, daimon: &D, from: &History) -> Result<f64>
where
    E: Environment,
    A: Agent<E::Obs>,
    P: AgentPolicy<A::State>,
    D: DaimonPolicy,
{
    let state = unified_update(env, agent, from)?;
    let limit = env.horizon().unwrap_or(DEFAULT_STEP_CAP.min(4096));
    walk(env, agent, policy, daimon, from, &state, limit)
}

/// Exact expected return of the whole process: the ξ-weighted value of its initial histories.
pub fn process_value<E, A, P, D>(env: &E, agent: &A, policy: &P, daimon: &D) -> Result<f64>
where
    E: Environment,
    A: Agent<E::Obs>,
    P: AgentPolicy<A::State>,
    D: DaimonPolicy,
{
    let xi = initial_distribution(env)?;
    let mut total = 0.0;
    for (origin, &w) in xi.iter().enumerate() {
        if w > 0.0 {
            total += w * expected_return(env, agent, policy, daimon, &History::initial(origin))?;
        }
    }
    Ok(total)
}

fn walk<E, A, P, D>(
    env: &E,
    agent: &A,
    policy: &P,
    daimon: &D,
    h: &History,
    state: &A::State,
    limit: usize,
) -> Result<f64>
where
    E: Environment,
    A: Agent<E::Obs>,
    P: AgentPolicy<A::State>,
    D: DaimonPolicy,
{
    let turn = env.first_turn();
    if h.is_active(turn) {
        let gamma = continuation(env, h)?;
        if gamma == 0.0 {
            return Ok(0.0);
        }
        if h.len() >= limit {
            return Err(PohpError::Resource(format!("subtree below {h} exceeds depth {limit}")));
        }
        let actions = canonical_actions(env, h)?;
        let probs = policy.distribution(state, &actions);
        check_distribution(&probs, actions.len(), &|| format!("agent policy at {h}"))?;
        let mut v = 0.0;
        for (a, p) in actions.iter().zip(&probs) {
            if *p > 0.0 {
                let next = agent.act_update(state, a);
                v += p * walk(env, agent, policy, daimon, &h.child(a.clone()), &next, limit)?;
            }
        }
        Ok(gamma * v)
    } else {
        let actions = canonical_actions(env, h)?;
        let probs = daimon.distribution(h, &actions);
        check_distribution(&probs, actions.len(), &|| format!("daimon policy at {h}"))?;
        let mut v = 0.0;
        for (b, p) in actions.iter().zip(&probs) {
            if *p > 0.0 {
                let hb = h.child(b.clone());
                let obs = env.observe(&hb)?;
                let next = agent.obs_update(state, &obs);
                v += p * (agent.reward(&obs) + walk(env, agent, policy, daimon, &hb, &next, limit)?);
            }
        }
        Ok(v)
    }
}
