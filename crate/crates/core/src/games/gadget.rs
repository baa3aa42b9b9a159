//! The two-decision forgetting gadget: the agent acts twice, forgets its first
//! action in between, and is paid +1 for repeating it and −1 otherwise.

use std::fmt;

use crate::agents::{CarriesReward, PerfectRecall};
use crate::error::{PohpError, Result};
use crate::history::{Action, History, Turn};
use crate::process::{Agent, Environment};

pub const GADGET_ACTIONS: [&str; 2] = ["1", "2"];
pub const GADGET_NOOP: &str = "noop";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GadgetObs {
    pub reward: i32,
}

impl CarriesReward for GadgetObs {
    fn reward(&self) -> f64 {
        self.reward as f64
    }
}

/// Histories alternate agent action, `noop`, agent action, `noop`; then the process ends.
#[derive(Debug, Clone, Copy, Default)]
pub struct GadgetEnv;

impl GadgetEnv {
    fn check(&self, h: &History) -> Result<()> {
        let bad = || PohpError::Structure(format!("{h} is not a gadget history"));
        if h.origin != 0 || h.len() > 4 {
            return Err(bad());
        }
        for (i, a) in h.actions.iter().enumerate() {
            let ok = if i % 2 == 0 { GADGET_ACTIONS.contains(&a.as_str()) } else { a.as_str() == GADGET_NOOP };
            if !ok {
                return Err(bad());
            }
        }
        Ok(())
    }
}

impl Environment for GadgetEnv {
    type Obs = GadgetObs;

    fn first_turn(&self) -> Turn {
        Turn::Agent
    }

    fn initial_distribution(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn legal_actions(&self, h: &History) -> Result<Vec<Action>> {
        self.check(h)?;
        match h.len() {
            0 | 2 => Ok(GADGET_ACTIONS.iter().map(|a| Action::new(a)).collect()),
            1 | 3 => Ok(vec![Action::new(GADGET_NOOP)]),
            _ => Err(PohpError::Structure(format!("{h} is terminal"))),
        }
    }

    fn observe(&self, h: &History) -> Result<GadgetObs> {
        self.check(h)?;
        match h.len() {
            2 => Ok(GadgetObs { reward: 0 }),
            4 => Ok(GadgetObs { reward: if h.actions[0] == h.actions[2] { 1 } else { -1 } }),
            _ => Err(PohpError::Structure(format!("{h} does not follow a daimon action"))),
        }
    }

    fn continue_prob(&self, h: &History) -> Result<f64> {
        self.check(h)?;
        Ok(if h.len() < 4 { 1.0 } else { 0.0 })
    }

    fn reward_bound(&self) -> f64 {
        1.0
    }

    fn horizon(&self) -> Option<usize> {
        Some(4)
    }
}

/// Timed agent states: decision `k`, waiting after decision `k`, or done.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub enum GadgetState {
    Decide(usize),
    Wait(usize),
    Done,
}

impl fmt::Debug for GadgetState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let name = |k: usize| if k == 0 { "s" } else { "s′" };
        match self {
            GadgetState::Decide(k) => f.write_str(name(*k)),
            GadgetState::Wait(k) => write!(f, "{}·wait", name(*k)),
            GadgetState::Done => f.write_str("end"),
        }
    }
}

/// Counts its decisions but never remembers which action it took.
#[derive(Debug, Clone, Copy, Default)]
pub struct TimedForgetful;

impl Agent<GadgetObs> for TimedForgetful {
    type State = GadgetState;

    fn initial_state(&self) -> GadgetState {
        GadgetState::Decide(0)
    }

    fn act_update(&self, state: &GadgetState, _action: &Action) -> GadgetState {
        match state {
            GadgetState::Decide(k) => GadgetState::Wait(*k),
            other => *other,
        }
    }

    fn obs_update(&self, state: &GadgetState, _obs: &GadgetObs) -> GadgetState {
        match state {
            GadgetState::Wait(0) => GadgetState::Decide(1),
            _ => GadgetState::Done,
        }
    }

    fn reward(&self, obs: &GadgetObs) -> f64 {
        obs.reward as f64
    }

    fn legal_actions_of_state(&self, state: &GadgetState) -> Option<Vec<Action>> {
        matches!(state, GadgetState::Decide(_)).then(|| GADGET_ACTIONS.iter().map(|a| Action::new(a)).collect())
    }
}

pub fn gadget_theorem1() -> (GadgetEnv, TimedForgetful) {
    (GadgetEnv, TimedForgetful)
}

/// The same environment played by an agent that remembers everything.
pub fn gadget_perfect_recall() -> (GadgetEnv, PerfectRecall<GadgetObs>) {
    (GadgetEnv, PerfectRecall::carrying())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::process::{process_value, sample_episode, Uniform};

    #[test]
    fn pays_for_repeating() {
        let env = GadgetEnv;
        let same = History::from_tokens(0, ["1", "noop", "1", "noop"]);
        let diff = History::from_tokens(0, ["1", "noop", "2", "noop"]);
        assert_eq!(env.observe(&same).unwrap().reward, 1);
        assert_eq!(env.observe(&diff).unwrap().reward, -1);
        assert!(env.legal_actions(&History::from_tokens(0, ["3"])).is_err());
    }

    #[test]
    fn forgetful_agent_merges_first_actions() {
        let agent = TimedForgetful;
        let s = agent.initial_state();
        let a = agent.obs_update(&agent.act_update(&s, &Action::new("1")), &GadgetObs { reward: 0 });
        let b = agent.obs_update(&agent.act_update(&s, &Action::new("2")), &GadgetObs { reward: 0 });
        assert_eq!(a, b);
        assert_eq!(format!("{a:?}"), "s′");
    }

    #[test]
    fn uniform_play_is_worth_nothing() {
        let (env, agent) = gadget_theorem1();
        assert_eq!(process_value(&env, &agent, &Uniform, &Uniform).unwrap(), 0.0);
        let first = |_: &GadgetState, acts: &[Action]| {
            let mut p = vec![0.0; acts.len()];
            p[0] = 1.0;
            p
        };
        assert_eq!(process_value(&env, &agent, &first, &Uniform).unwrap(), 1.0);
        let ep = sample_episode(&env, &agent, &Uniform, &Uniform, 9).unwrap();
        assert_eq!(ep.history.len(), 4);
        assert!(ep.ret == 1.0 || ep.ret == -1.0);
    }
}
