//! Reusable agent constructions.

use std::fmt::{self, Debug};
use std::hash::Hash;
use std::sync::Arc;

use crate::history::Action;
use crate::process::Agent;

/// Observations that carry their own reward signal.
pub trait CarriesReward {
    fn reward(&self) -> f64;
}

/// One entry of a perfect-recall information state.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum Event<O> {
    Act(Action),
    Obs(O),
}

impl<O: Debug> Debug for Event<O> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Event::Act(a) => write!(f, "{a}"),
            Event::Obs(o) => write!(f, "{o:?}"),
        }
    }
}

/// An agent whose information state is its full action–observation string.
#[derive(Clone)]
pub struct PerfectRecall<O> {
    reward: Arc<dyn Fn(&O) -> f64 + Send + Sync>,
}

impl<O> PerfectRecall<O> {
    pub fn new(reward: impl Fn(&O) -> f64 + Send + Sync + 'static) -> Self {
        PerfectRecall { reward: Arc::new(reward) }
    }
}

impl<O: CarriesReward> PerfectRecall<O> {
    /// Reward read straight off the observation.
    pub fn carrying() -> Self {
        PerfectRecall::new(|o: &O| o.reward())
    }
}

impl<O: Clone + Eq + Hash + Debug> Agent<O> for PerfectRecall<O> {
    type State = Vec<Event<O>>;

    fn initial_state(&self) -> Self::State {
        Vec::new()
    }

    fn act_update(&self, state: &Self::State, action: &Action) -> Self::State {
        let mut s = state.clone();
        s.push(Event::Act(action.clone()));
        s
    }

    fn obs_update(&self, state: &Self::State, obs: &O) -> Self::State {
        let mut s = state.clone();
        s.push(Event::Obs(obs.clone()));
        s
    }

    fn reward(&self, obs: &O) -> f64 {
        (self.reward)(obs)
    }
}
