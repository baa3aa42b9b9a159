//! Strategies materialized over a [`TreeIndex`].

use rand::Rng;

use crate::error::{PohpError, Result};
use crate::history::{Action, History};
use crate::process::{check_distribution, AgentPolicy, DaimonPolicy};
use crate::tree::{NodeId, NodeKind, StateCatalog, StateId, TreeIndex};

/// An agent behavioral strategy: one distribution per active information state.
#[derive(Debug, Clone, PartialEq)]
pub struct BehavioralStrategy {
    probs: Vec<Vec<f64>>,
}

impl BehavioralStrategy {
    pub fn uniform(tree: &TreeIndex) -> Self {
        let probs = tree
            .active_states()
            .map(|s| {
                let n = tree.state(s).actions.len();
                vec![1.0 / n as f64; n]
            })
            .collect();
        BehavioralStrategy { probs }
    }

    pub fn from_probs(tree: &TreeIndex, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != tree.num_active() {
            return Err(PohpError::Validation(format!(
                "strategy covers {} states, tree has {} active states",
                probs.len(),
                tree.num_active()
            )));
        }
        for (s, p) in probs.iter().enumerate() {
            let info = tree.state(StateId(s));
            check_distribution(p, info.actions.len(), &|| format!("strategy at {}", info.label))?;
        }
        Ok(BehavioralStrategy { probs })
    }

    /// Dirichlet(1)-style random strategy, occasionally with zero entries so that
    /// unreachable branches get exercised.
    pub fn random<R: Rng>(tree: &TreeIndex, rng: &mut R) -> Self {
        let probs = tree
            .active_states()
            .map(|s| random_simplex(tree.state(s).actions.len(), rng))
            .collect();
        BehavioralStrategy { probs }
    }

    pub fn from_pure(tree: &TreeIndex, pure: &PureStrategy) -> Self {
        let probs = tree
            .active_states()
            .map(|s| {
                let mut p = vec![0.0; tree.state(s).actions.len()];
                p[pure.choice(s)] = 1.0;
                p
            })
            .collect();
        BehavioralStrategy { probs }
    }

    pub fn probs(&self, s: StateId) -> &[f64] {
        &self.probs[s.0]
    }

    pub fn prob(&self, s: StateId, action: usize) -> f64 {
        self.probs[s.0][action]
    }

    pub fn set(&mut self, s: StateId, probs: Vec<f64>) {
        self.probs[s.0] = probs;
    }

    /// Force a deterministic action at `s`.
    pub fn force(&mut self, s: StateId, action: usize) {
        let row = &mut self.probs[s.0];
        row.iter_mut().for_each(|p| *p = 0.0);
        row[action] = 1.0;
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.probs
    }

    /// Probability of a pure strategy: the product of its per-state action probabilities.
    pub fn pure_prob(&self, pure: &PureStrategy) -> f64 {
        pure.choices.iter().enumerate().map(|(s, &a)| self.probs[s][a]).product()
    }

    /// Own reach `ℙ_π[h]` of a node: the product of this strategy along the agent's path.
    pub fn path_reach(&self, tree: &TreeIndex, node: NodeId) -> f64 {
        tree.node(node).own_path.iter().map(|&(s, a)| self.probs[s.0][a]).product()
    }

    /// `max_{s,a} |self − other|`.
    pub fn max_abs_diff(&self, other: &BehavioralStrategy) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
            .fold(0.0, f64::max)
    }
}

pub(crate) fn random_simplex<R: Rng>(n: usize, rng: &mut R) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| -rng.gen::<f64>().max(1e-300).ln()).collect();
    if n > 1 && rng.gen_bool(0.1) {
        let i = rng.gen_range(0..n);
        w[i] = 0.0;
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|x| x / total).collect()
}

/// A daimon behavioral strategy: one distribution per passive history.
#[derive(Debug, Clone, PartialEq)]
pub struct DaimonStrategy {
    probs: Vec<Vec<f64>>,
}

impl DaimonStrategy {
    pub fn uniform(tree: &TreeIndex) -> Self {
        Self::build(tree, |_, n| vec![1.0 / n as f64; n])
    }

    pub fn random<R: Rng>(tree: &TreeIndex, rng: &mut R) -> Self {
        Self::build(tree, |_, n| random_simplex(n, rng))
    }

    /// Materialize an arbitrary policy over the tree's passive histories.
    pub fn from_policy<D: DaimonPolicy>(tree: &TreeIndex, policy: &D) -> Result<Self> {
        let mut out = Vec::with_capacity(tree.nodes().len());
        for n in tree.nodes() {
            if n.kind == NodeKind::Passive {
                let p = policy.distribution(&n.history, &n.actions);
                check_distribution(&p, n.actions.len(), &|| format!("daimon policy at {}", n.history))?;
                out.push(p);
            } else {
                out.push(Vec::new());
            }
        }
        Ok(DaimonStrategy { probs: out })
    }

    /// Build from per-node rows; rows at passive nodes are validated.
    pub fn from_rows(tree: &TreeIndex, probs: Vec<Vec<f64>>) -> Result<Self> {
        if probs.len() != tree.nodes().len() {
            return Err(PohpError::Validation("daimon strategy must have one row per node".into()));
        }
        for (n, p) in tree.nodes().iter().zip(&probs) {
            if n.kind == NodeKind::Passive {
                check_distribution(p, n.actions.len(), &|| format!("daimon strategy at {}", n.history))?;
            }
        }
        Ok(DaimonStrategy { probs })
    }

    fn build(tree: &TreeIndex, mut f: impl FnMut(NodeId, usize) -> Vec<f64>) -> Self {
        let probs = tree
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, n)| if n.kind == NodeKind::Passive { f(NodeId(i), n.actions.len()) } else { Vec::new() })
            .collect();
        DaimonStrategy { probs }
    }

    pub fn probs(&self, node: NodeId) -> &[f64] {
        &self.probs[node.0]
    }

    pub fn prob(&self, node: NodeId, action: usize) -> f64 {
        self.probs[node.0][action]
    }
}

/// A pure strategy: one action index per active information state.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PureStrategy {
    choices: Vec<usize>,
}

impl PureStrategy {
    pub fn new(tree: &TreeIndex, choices: Vec<usize>) -> Result<Self> {
        if choices.len() != tree.num_active() {
            return Err(PohpError::Validation("pure strategy must choose at every active state".into()));
        }
        for (s, &a) in choices.iter().enumerate() {
            if a >= tree.state(StateId(s)).actions.len() {
                return Err(PohpError::Validation(format!("action {a} is illegal at state {s}")));
            }
        }
        Ok(PureStrategy { choices })
    }

    pub(crate) fn from_choices_unchecked(choices: Vec<usize>) -> Self {
        PureStrategy { choices }
    }

    /// The same action index everywhere it is legal, falling back to the last action.
    pub fn constant(tree: &TreeIndex, action: usize) -> Self {
        let choices =
            tree.active_states().map(|s| action.min(tree.state(s).actions.len() - 1)).collect();
        PureStrategy { choices }
    }

    pub fn choice(&self, s: StateId) -> usize {
        self.choices[s.0]
    }

    pub fn choices(&self) -> &[usize] {
        &self.choices
    }

    pub fn action<'t>(&self, tree: &'t TreeIndex, s: StateId) -> &'t Action {
        &tree.state(s).actions[self.choices[s.0]]
    }
}

/// The agent's play viewed as a distribution over pure strategies.
#[derive(Debug, Clone, PartialEq)]
pub enum MixedStrategy {
    /// A behavioral strategy; pure-strategy probabilities are per-state products.
    Behavioral(BehavioralStrategy),
    /// An explicit distribution over the enumerated pure strategies of the tree.
    Enumerated(Vec<f64>),
}

impl MixedStrategy {
    pub fn total_mass(&self, tree: &TreeIndex) -> f64 {
        match self {
            MixedStrategy::Behavioral(b) => tree
                .active_states()
                .map(|s| b.probs(s).iter().sum::<f64>())
                .product(),
            MixedStrategy::Enumerated(p) => p.iter().sum(),
        }
    }
}

/// Adapter exposing a tree strategy through the generic [`AgentPolicy`] interface.
pub struct CatalogPolicy<'a, S> {
    pub catalog: &'a StateCatalog<S>,
    pub strategy: &'a BehavioralStrategy,
}

impl<S: Eq + std::hash::Hash> AgentPolicy<S> for CatalogPolicy<'_, S> {
    fn distribution(&self, state: &S, actions: &[Action]) -> Vec<f64> {
        match self.catalog.id(state) {
            Some(id) if id.0 < self.strategy.probs.len() => self.strategy.probs(id).to_vec(),
            _ => vec![f64::NAN; actions.len()],
        }
    }
}

/// Adapter exposing a tree daimon strategy through [`DaimonPolicy`].
pub struct TreeDaimon<'a> {
    pub tree: &'a TreeIndex,
    pub strategy: &'a DaimonStrategy,
}

impl DaimonPolicy for TreeDaimon<'_> {
    fn distribution(&self, history: &History, actions: &[Action]) -> Vec<f64> {
        match self.tree.node_of(history) {
            Some(id) => self.strategy.probs(id).to_vec(),
            None => vec![f64::NAN; actions.len()],
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::gadget::gadget_theorem1;
    use crate::tree::{build_tree_index, TreeConfig};
    use rand::SeedableRng;

    fn gadget() -> TreeIndex {
        let (env, agent) = gadget_theorem1();
        build_tree_index(&env, &agent, &TreeConfig::default()).unwrap()
    }

    #[test]
    fn rows_are_distributions() {
        let tree = gadget();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..50 {
            let pi = BehavioralStrategy::random(&tree, &mut rng);
            for row in pi.rows() {
                assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-12);
                assert!(row.iter().all(|p| *p >= 0.0));
            }
        }
        assert!(BehavioralStrategy::from_probs(&tree, vec![vec![0.5, 0.6], vec![0.5, 0.5]]).is_err());
        assert!(BehavioralStrategy::from_probs(&tree, vec![vec![1.0]]).is_err());
    }

    #[test]
    fn pure_probability_is_a_product() {
        let tree = gadget();
        let pi = BehavioralStrategy::from_probs(&tree, vec![vec![0.25, 0.75], vec![0.5, 0.5]]).unwrap();
        let x = PureStrategy::new(&tree, vec![1, 0]).unwrap();
        assert_eq!(pi.pure_prob(&x), 0.375);
        assert_eq!(BehavioralStrategy::from_pure(&tree, &x).pure_prob(&x), 1.0);
        assert!(PureStrategy::new(&tree, vec![2, 0]).is_err());
    }
}
