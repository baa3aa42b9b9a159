//! Materialized history trees: every reachable history, its information state,
//! the information sets, and the child-state maps.

use std::collections::{HashMap, VecDeque};

use crate::error::{PohpError, Result};
use crate::history::{Action, History, Turn};
use crate::process::{self, Agent, Environment};

/// Environment variable overriding the default node budget.
pub const NODE_BUDGET_VAR: &str = "POHP_NODE_BUDGET";
pub const DEFAULT_NODE_BUDGET: usize = 2_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct StateId(pub usize);

#[derive(Debug, Clone)]
pub struct TreeConfig {
    /// Histories of at least this length are treated as terminal.
    pub max_depth: Option<usize>,
    pub node_budget: usize,
}

impl Default for TreeConfig {
    fn default() -> Self {
        let node_budget = std::env::var(NODE_BUDGET_VAR)
            .ok()
            .and_then(|v| v.parse().ok())
            .unwrap_or(DEFAULT_NODE_BUDGET);
        TreeConfig { max_depth: None, node_budget }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NodeKind {
    /// The agent moves next (or the process has terminated here).
    Active,
    /// The daimon moves next.
    Passive,
}

#[derive(Debug, Clone)]
pub struct Node {
    pub history: History,
    pub parent: Option<NodeId>,
    pub kind: NodeKind,
    pub state: StateId,
    /// `r(ω(h))` for histories that follow a daimon action, zero otherwise.
    pub reward: f64,
    /// `γ(h)` for active histories; unused on passive ones.
    pub cont: f64,
    /// Legal actions at this history (empty at terminal histories).
    pub actions: Vec<Action>,
    pub children: Vec<NodeId>,
    /// Number of actions the agent has taken on the way here.
    pub agent_steps: usize,
    /// The agent's own (active state, action index) decisions on the way here.
    pub own_path: Vec<(StateId, usize)>,
    /// ξ(origin) for initial histories, zero elsewhere.
    pub initial_weight: f64,
}

impl Node {
    pub fn is_terminal(&self) -> bool {
        self.kind == NodeKind::Active && self.children.is_empty()
    }

    pub fn is_live_active(&self) -> bool {
        self.kind == NodeKind::Active && !self.children.is_empty()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StateKind {
    /// The agent acts here.
    Active,
    /// The agent awaits an observation.
    Passive,
    /// Reached only at terminal histories.
    Terminal,
}

#[derive(Debug, Clone)]
pub struct StateInfo {
    pub label: String,
    pub kind: StateKind,
    /// The information set `I(s)`: every history with `u(h) = s`.
    pub members: Vec<NodeId>,
    /// Non-terminal active members, the histories where the agent actually moves.
    pub live: Vec<NodeId>,
    pub actions: Vec<Action>,
    /// `𝒮_𝒜(s, a)` for each action: child active states reachable through `a`.
    pub children: Vec<Vec<StateId>>,
    /// Distinct active states that immediately precede this one.
    pub parents: Vec<StateId>,
    pub agent_steps: usize,
}

/// All reachable histories and information states of a finite-horizon process.
///
/// Active states carry the ids `0..num_active()`; node ids are in breadth-first
/// order so parents always precede children.
#[derive(Debug, Clone)]
pub struct TreeIndex {
    first_turn: Turn,
    reward_bound: f64,
    nodes: Vec<Node>,
    states: Vec<StateInfo>,
    num_active: usize,
    roots: Vec<NodeId>,
    by_history: HashMap<History, NodeId>,
    ancestors: Vec<Vec<StateId>>,
    precedes: Vec<Vec<bool>>,
    timed: bool,
    perfect_recall: bool,
}

/// Lookup from opaque information-state values to tree ids.
#[derive(Debug, Clone)]
pub struct StateCatalog<S> {
    ids: HashMap<S, StateId>,
}

impl<S: Eq + std::hash::Hash> StateCatalog<S> {
    pub fn id(&self, state: &S) -> Option<StateId> {
        self.ids.get(state).copied()
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }
}

pub fn build_tree_index<E, A>(env: &E, agent: &A, config: &TreeConfig) -> Result<TreeIndex>
where
    E: Environment,
    A: Agent<E::Obs>,
{
    index_states(env, agent, config).map(|(tree, _)| tree)
}

pub fn index_states<E, A>(env: &E, agent: &A, config: &TreeConfig) -> Result<(TreeIndex, StateCatalog<A::State>)>
where
    E: Environment,
    A: Agent<E::Obs>,
{
    let turn = env.first_turn();
    let xi = process::initial_distribution(env)?;
    let bound = env.reward_bound();
    let horizon = env.horizon();

    struct Raw<S> {
        node: Node,
        value: S,
    }
    let mut interned: HashMap<A::State, usize> = HashMap::new();
    let mut raw: Vec<Raw<A::State>> = Vec::new();
    let mut queue = VecDeque::new();

    let mut intern = |s: &A::State| -> usize {
        let n = interned.len();
        *interned.entry(s.clone()).or_insert(n)
    };

    let push = |raw: &mut Vec<Raw<A::State>>, node: Node, value: A::State| -> Result<NodeId> {
        if raw.len() >= config.node_budget {
            return Err(PohpError::Resource(format!("tree exceeds node budget {}", config.node_budget)));
        }
        raw.push(Raw { node, value });
        Ok(NodeId(raw.len() - 1))
    };

    for (origin, &w) in xi.iter().enumerate() {
        if w <= 0.0 {
            continue;
        }
        let history = History::initial(origin);
        let value = agent.initial_state();
        let sid = intern(&value);
        let kind = if history.is_active(turn) { NodeKind::Active } else { NodeKind::Passive };
        let node = Node {
            history,
            parent: None,
            kind,
            state: StateId(sid),
            reward: 0.0,
            cont: 1.0,
            actions: Vec::new(),
            children: Vec::new(),
            agent_steps: 0,
            own_path: Vec::new(),
            initial_weight: w,
        };
        queue.push_back(push(&mut raw, node, value)?);
    }
    let roots: Vec<NodeId> = (0..raw.len()).map(NodeId).collect();

    while let Some(id) = queue.pop_front() {
        let (history, kind) = {
            let n = &raw[id.0].node;
            (n.history.clone(), n.kind)
        };
        match kind {
            NodeKind::Active => {
                let mut gamma = process::continuation(env, &history)?;
                if let Some(d) = horizon {
                    if history.len() >= d && gamma > 0.0 {
                        return Err(PohpError::Validation(format!(
                            "{history} continues beyond the declared horizon {d}"
                        )));
                    }
                }
                if config.max_depth.is_some_and(|d| history.len() >= d) {
                    gamma = 0.0;
                }
                raw[id.0].node.cont = gamma;
                if gamma == 0.0 {
                    continue;
                }
                let actions = process::canonical_actions(env, &history)?;
                let value = raw[id.0].value.clone();
                if let Some(mut from_state) = agent.legal_actions_of_state(&value) {
                    from_state.sort();
                    if from_state != actions {
                        return Err(PohpError::Validation(format!(
                            "agent's legal actions at {value:?} disagree with the environment at {history}"
                        )));
                    }
                }
                let sid = raw[id.0].node.state;
                let steps = raw[id.0].node.agent_steps;
                let path = raw[id.0].node.own_path.clone();
                let mut children = Vec::with_capacity(actions.len());
                for (i, a) in actions.iter().enumerate() {
                    let next = agent.act_update(&value, a);
                    let s = intern(&next);
                    let mut own_path = path.clone();
                    own_path.push((sid, i));
                    let child = Node {
                        history: history.child(a.clone()),
                        parent: Some(id),
                        kind: NodeKind::Passive,
                        state: StateId(s),
                        reward: 0.0,
                        cont: 1.0,
                        actions: Vec::new(),
                        children: Vec::new(),
                        agent_steps: steps + 1,
                        own_path,
                        initial_weight: 0.0,
                    };
                    let cid = push(&mut raw, child, next)?;
                    children.push(cid);
                    queue.push_back(cid);
                }
                raw[id.0].node.actions = actions;
                raw[id.0].node.children = children;
            }
            NodeKind::Passive => {
                let actions = process::canonical_actions(env, &history)?;
                let value = raw[id.0].value.clone();
                let steps = raw[id.0].node.agent_steps;
                let path = raw[id.0].node.own_path.clone();
                let mut children = Vec::with_capacity(actions.len());
                for b in &actions {
                    let hb = history.child(b.clone());
                    let obs = env.observe(&hb)?;
                    let r = agent.reward(&obs);
                    if !r.is_finite() || r.abs() > bound + 1e-12 {
                        return Err(PohpError::Validation(format!(
                            "reward {r} at {hb} exceeds the bound {bound}"
                        )));
                    }
                    let next = agent.obs_update(&value, &obs);
                    let s = intern(&next);
                    let child = Node {
                        history: hb,
                        parent: Some(id),
                        kind: NodeKind::Active,
                        state: StateId(s),
                        reward: r,
                        cont: 1.0,
                        actions: Vec::new(),
                        children: Vec::new(),
                        agent_steps: steps,
                        own_path: path.clone(),
                        initial_weight: 0.0,
                    };
                    let cid = push(&mut raw, child, next)?;
                    children.push(cid);
                    queue.push_back(cid);
                }
                raw[id.0].node.actions = actions;
                raw[id.0].node.children = children;
            }
        }
    }

    // Classify interned states and renumber so active states come first.
    let n_states = interned.len();
    let mut has_live = vec![false; n_states];
    let mut has_passive = vec![false; n_states];
    let mut has_active = vec![false; n_states];
    for r in &raw {
        let s = r.node.state.0;
        match r.node.kind {
            NodeKind::Passive => has_passive[s] = true,
            NodeKind::Active => {
                has_active[s] = true;
                if r.node.is_live_active() {
                    has_live[s] = true;
                }
            }
        }
    }
    for s in 0..n_states {
        if has_passive[s] && has_active[s] {
            let value = interned.iter().find(|(_, &v)| v == s).map(|(k, _)| format!("{k:?}"));
            return Err(PohpError::Validation(format!(
                "information state {} appears at both active and passive histories",
                value.unwrap_or_default()
            )));
        }
    }
    let mut order: Vec<usize> = (0..n_states).filter(|&s| has_live[s]).collect();
    let num_active = order.len();
    order.extend((0..n_states).filter(|&s| !has_live[s]));
    let mut remap = vec![0usize; n_states];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }

    let mut labels = vec![String::new(); n_states];
    let mut values: Vec<Option<A::State>> = vec![None; n_states];
    for (value, &old) in &interned {
        labels[remap[old]] = format!("{value:?}");
        values[remap[old]] = Some(value.clone());
    }
    let nodes: Vec<Node> = raw
        .into_iter()
        .map(|r| {
            let mut n = r.node;
            n.state = StateId(remap[n.state.0]);
            for step in &mut n.own_path {
                step.0 = StateId(remap[step.0 .0]);
            }
            n
        })
        .collect();

    let mut states: Vec<StateInfo> = (0..n_states)
        .map(|s| StateInfo {
            label: std::mem::take(&mut labels[s]),
            kind: if s < num_active {
                StateKind::Active
            } else if has_passive[order[s]] {
                StateKind::Passive
            } else {
                StateKind::Terminal
            },
            members: Vec::new(),
            live: Vec::new(),
            actions: Vec::new(),
            children: Vec::new(),
            parents: Vec::new(),
            agent_steps: 0,
        })
        .collect();
    let mut timed = true;
    let mut seen_steps = vec![None; n_states];
    for (i, n) in nodes.iter().enumerate() {
        let s = n.state.0;
        states[s].members.push(NodeId(i));
        match seen_steps[s] {
            None => seen_steps[s] = Some(n.agent_steps),
            Some(k) if k != n.agent_steps => timed = false,
            _ => {}
        }
        if n.is_live_active() {
            let info = &mut states[s];
            if info.live.is_empty() {
                info.actions = n.actions.clone();
            } else if info.actions != n.actions {
                return Err(PohpError::Validation(format!(
                    "histories in information state {} have different legal actions",
                    info.label
                )));
            }
            info.live.push(NodeId(i));
        }
    }
    for (s, info) in states.iter_mut().enumerate() {
        info.agent_steps = seen_steps[s].unwrap_or(0);
    }

    let mut perfect_recall = timed;
    let mut ancestors = vec![Vec::new(); num_active];
    for s in 0..num_active {
        let live = &states[s].live;
        let first = &nodes[live[0].0].own_path;
        let mut anc: Vec<StateId> = Vec::new();
        let mut parents: Vec<StateId> = Vec::new();
        for m in live {
            let path = &nodes[m.0].own_path;
            if path != first {
                perfect_recall = false;
            }
            anc.extend(path.iter().map(|(st, _)| *st));
            if let Some((p, _)) = path.last() {
                parents.push(*p);
            }
        }
        anc.sort();
        anc.dedup();
        parents.sort();
        parents.dedup();
        ancestors[s] = anc;
        states[s].parents = parents;

        let mut children = vec![Vec::new(); states[s].actions.len()];
        for m in &states[s].live {
            for (ai, passive) in nodes[m.0].children.iter().enumerate() {
                for post in &nodes[passive.0].children {
                    let pn = &nodes[post.0];
                    if pn.is_live_active() {
                        children[ai].push(pn.state);
                    }
                }
            }
        }
        for c in &mut children {
            c.sort();
            c.dedup();
        }
        states[s].children = children;
    }
    let mut precedes = vec![vec![false; num_active]; num_active];
    for (s, anc) in ancestors.iter().enumerate() {
        for a in anc {
            precedes[a.0][s] = true;
        }
    }

    let by_history = nodes.iter().enumerate().map(|(i, n)| (n.history.clone(), NodeId(i))).collect();
    let ids = values
        .into_iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (v, StateId(i))))
        .collect();

    Ok((
        TreeIndex {
            first_turn: turn,
            reward_bound: bound,
            nodes,
            states,
            num_active,
            roots,
            by_history,
            ancestors,
            precedes,
            timed,
            perfect_recall,
        },
        StateCatalog { ids },
    ))
}

impl TreeIndex {
    pub fn first_turn(&self) -> Turn {
        self.first_turn
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn nodes(&self) -> &[Node] {
        &self.nodes
    }

    pub fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.0]
    }

    pub fn states(&self) -> &[StateInfo] {
        &self.states
    }

    pub fn state(&self, id: StateId) -> &StateInfo {
        &self.states[id.0]
    }

    pub fn num_active(&self) -> usize {
        self.num_active
    }

    pub fn active_states(&self) -> impl Iterator<Item = StateId> {
        (0..self.num_active).map(StateId)
    }

    pub fn is_active_state(&self, s: StateId) -> bool {
        s.0 < self.num_active
    }

    pub fn roots(&self) -> &[NodeId] {
        &self.roots
    }

    pub fn node_of(&self, history: &History) -> Option<NodeId> {
        self.by_history.get(history).copied()
    }

    /// Strict predecessors of an active state among the active states.
    pub fn ancestors(&self, s: StateId) -> &[StateId] {
        &self.ancestors[s.0]
    }

    /// `a ≺ b` on active states.
    pub fn precedes(&self, a: StateId, b: StateId) -> bool {
        self.precedes[a.0][b.0]
    }

    /// `a ⪯ b` on active states.
    pub fn precedes_eq(&self, a: StateId, b: StateId) -> bool {
        a == b || self.precedes(a, b)
    }

    /// `𝒮_{s,𝒜}`: the active states of the sub-process rooted at `s`, including `s`.
    pub fn subtree(&self, s: StateId) -> Vec<StateId> {
        self.active_states().filter(|&t| self.precedes_eq(s, t)).collect()
    }

    pub fn is_timed(&self) -> bool {
        self.timed
    }

    pub fn has_perfect_recall(&self) -> bool {
        self.perfect_recall
    }

    pub fn require_timed(&self) -> Result<()> {
        if self.timed {
            Ok(())
        } else {
            Err(PohpError::Contract("the agent's updates are not timed".into()))
        }
    }

    pub fn require_perfect_recall(&self) -> Result<()> {
        if self.perfect_recall {
            Ok(())
        } else {
            Err(PohpError::Contract("the agent does not have perfect recall".into()))
        }
    }

    /// The agent's own decisions leading into active state `s` (perfect recall only).
    pub fn state_path(&self, s: StateId) -> &[(StateId, usize)] {
        &self.nodes[self.states[s.0].live[0].0].own_path
    }

    /// Largest number of agent decisions along any trajectory.
    pub fn horizon(&self) -> usize {
        self.nodes.iter().map(|n| n.agent_steps).max().unwrap_or(0)
    }

    pub fn num_terminal(&self) -> usize {
        self.nodes.iter().filter(|n| n.is_terminal()).count()
    }

    /// Active states ordered so that descendants come before their predecessors.
    pub fn bottom_up(&self) -> Vec<StateId> {
        let mut order: Vec<StateId> = self.active_states().collect();
        order.sort_by_key(|s| std::cmp::Reverse(self.states[s.0].agent_steps));
        order
    }

    pub fn action_index(&self, s: StateId, action: &Action) -> Option<usize> {
        self.states[s.0].actions.binary_search(action).ok()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::gadget::{gadget_perfect_recall, gadget_theorem1};

    #[test]
    fn gadget_states_and_recall() {
        let (env, agent) = gadget_theorem1();
        let tree = build_tree_index(&env, &agent, &TreeConfig::default()).unwrap();
        assert_eq!(tree.num_active(), 2);
        assert_eq!(tree.num_terminal(), 4);
        assert!(tree.is_timed());
        assert!(!tree.has_perfect_recall());
        assert!(tree.precedes(StateId(0), StateId(1)));
        assert!(!tree.precedes(StateId(1), StateId(0)));
        assert_eq!(tree.horizon(), 2);

        let (env, agent) = gadget_perfect_recall();
        let tree = build_tree_index(&env, &agent, &TreeConfig::default()).unwrap();
        assert_eq!(tree.num_active(), 3);
        assert!(tree.has_perfect_recall());
        assert_eq!(tree.state_path(StateId(2)).len(), 1);
    }

    #[test]
    fn node_budget_is_enforced() {
        let (env, agent) = gadget_theorem1();
        let config = TreeConfig { max_depth: None, node_budget: 3 };
        assert!(matches!(build_tree_index(&env, &agent, &config), Err(PohpError::Resource(_))));
    }
}
