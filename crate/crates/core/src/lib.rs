//! Partially observable history processes: exact evaluation, reach and belief
//! computations, deviations, immediate-regret learners, and brute-force oracles.

pub mod agents;
pub mod deviations;
pub mod error;
pub mod games;
pub mod history;
pub mod learners;
pub mod oracle;
pub mod process;
pub mod reach;
pub mod strategy;
pub mod tree;
pub mod values;

pub use error::{PohpError, Result};
pub use history::{Action, History, Turn};
pub use process::{Agent, AgentPolicy, DaimonPolicy, Environment, Uniform};
pub use strategy::{BehavioralStrategy, DaimonStrategy, MixedStrategy, PureStrategy};
pub use tree::{build_tree_index, index_states, NodeId, StateId, TreeConfig, TreeIndex};
