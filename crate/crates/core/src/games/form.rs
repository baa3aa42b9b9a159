//! POHP-form views of extensive-form games.
//!
//! Each seat (a player or chance) sees the game as a POHP: its own decisions are
//! agent actions, and everything between two of its decisions (other players'
//! and chance's moves, plus termination) is one daimon action. A daimon action
//! token joins the game actions with `.`; an empty sequence is `noop`, and a
//! `|stop` suffix marks termination by the continuation probability.

use std::collections::HashMap;
use std::fmt;
use std::hash::{Hash, Hasher};
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::agents::{CarriesReward, PerfectRecall};
use crate::error::{PohpError, Result};
use crate::games::efg::{GameDescription, GameNodeId, GameNodeKind};
use crate::history::{Action, History, Turn};
use crate::process::{Agent, Environment};
use crate::strategy::{BehavioralStrategy, DaimonStrategy};
use crate::tree::{index_states, NodeId, NodeKind, StateId, TreeConfig, TreeIndex};
use crate::values;

const NOOP: &str = "noop";
const STOP: &str = "|stop";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Seat {
    /// Zero-based player index.
    Player(usize),
    Chance,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Signal {
    /// The seat is to act in this information set.
    InfoSet(Arc<str>),
    /// The game ended at this node path.
    Terminal(Arc<str>),
}

/// An observation: the seat's signal and the reward accrued since its last observation.
#[derive(Debug, Clone)]
pub struct GameObs {
    pub signal: Signal,
    pub reward: f64,
}

impl PartialEq for GameObs {
    fn eq(&self, other: &Self) -> bool {
        self.signal == other.signal && self.reward.to_bits() == other.reward.to_bits()
    }
}

impl Eq for GameObs {}

impl Hash for GameObs {
    fn hash<H: Hasher>(&self, state: &mut H) {
        self.signal.hash(state);
        self.reward.to_bits().hash(state);
    }
}

impl CarriesReward for GameObs {
    fn reward(&self) -> f64 {
        self.reward
    }
}

/// The probability structure of one daimon action.
#[derive(Debug, Clone, PartialEq)]
pub struct MacroPlan {
    /// Game decisions taken by others: (node, action index).
    pub steps: Vec<(GameNodeId, usize)>,
    /// Product of continuation probabilities of the nodes passed through.
    pub pass: f64,
    /// Termination probability at the final node, for stopping plans.
    pub stop: Option<f64>,
}

#[derive(Debug, Clone, Copy)]
struct Position {
    node: GameNodeId,
    stopped: bool,
    obs_reward: f64,
}

/// One seat's POHP over a game.
#[derive(Debug, Clone)]
pub struct SeatView {
    game: Arc<GameDescription>,
    seat: Seat,
}

impl SeatView {
    pub fn new(game: Arc<GameDescription>, seat: Seat) -> Self {
        SeatView { game, seat }
    }

    pub fn seat(&self) -> Seat {
        self.seat
    }

    pub fn game(&self) -> &Arc<GameDescription> {
        &self.game
    }

    pub fn owns(&self, n: GameNodeId) -> bool {
        match (&self.game.node(n).kind, self.seat) {
            (GameNodeKind::Decision { player, .. }, Seat::Player(i)) => *player == i,
            (GameNodeKind::Chance { .. }, Seat::Chance) => true,
            _ => false,
        }
    }

    fn edge_reward(&self, n: GameNodeId) -> f64 {
        match self.seat {
            Seat::Player(i) => self.game.node(n).rewards[i],
            Seat::Chance => 0.0,
        }
    }

    fn utility(&self, n: GameNodeId) -> f64 {
        match (&self.game.node(n).kind, self.seat) {
            (GameNodeKind::Terminal { utilities }, Seat::Player(i)) => utilities[i],
            _ => 0.0,
        }
    }

    /// γ at a node; the root is never tested.
    fn cont(&self, n: GameNodeId) -> f64 {
        if n == self.game.root() {
            1.0
        } else {
            self.game.node(n).cont
        }
    }

    fn is_terminal(&self, n: GameNodeId) -> bool {
        self.game.node(n).is_terminal()
    }

    fn resolve(&self, h: &History) -> Result<Position> {
        let bad = |why: &str| PohpError::Structure(format!("{h}: {why}"));
        if h.origin != 0 {
            return Err(bad("game views have a single initial history"));
        }
        let turn = self.first_turn();
        let mut pos = Position { node: self.game.root(), stopped: false, obs_reward: 0.0 };
        let mut pending = 0.0;
        for (i, token) in h.actions.iter().enumerate() {
            if pos.stopped {
                return Err(bad("continues past termination"));
            }
            let active = i % 2 != turn.indicator();
            if active {
                if !self.owns(pos.node) || self.is_terminal(pos.node) {
                    return Err(bad("agent action where the seat does not move"));
                }
                let child = self.game.child(pos.node, token).ok_or_else(|| bad("illegal agent action"))?;
                pending += self.edge_reward(child);
                pos.node = child;
                continue;
            }
            let (body, stop) = match token.as_str().strip_suffix(STOP) {
                Some(b) => (b, true),
                None => (token.as_str(), false),
            };
            let mut cur = pos.node;
            if body != NOOP {
                for part in body.split('.') {
                    if self.owns(cur) || self.is_terminal(cur) || self.cont(cur) == 0.0 {
                        return Err(bad("daimon action passes a node it cannot"));
                    }
                    cur = self.game.child(cur, &Action::new(part)).ok_or_else(|| bad("illegal daimon action"))?;
                    pending += self.edge_reward(cur);
                }
            }
            if stop {
                if self.owns(cur) || self.is_terminal(cur) || self.cont(cur) >= 1.0 {
                    return Err(bad("invalid stop"));
                }
                pos.stopped = true;
            } else if !self.owns(cur) && !self.is_terminal(cur) {
                return Err(bad("daimon action ends before the seat's next turn"));
            }
            pos.node = cur;
            pos.obs_reward = pending;
            pending = 0.0;
        }
        Ok(pos)
    }

    /// Every daimon action available from game node `start`, sorted by token.
    fn macros_at(&self, start: GameNodeId) -> Vec<(Action, MacroPlan)> {
        let mut out = Vec::new();
        let mut path = Vec::new();
        self.collect_macros(start, &mut path, 1.0, &mut out);
        out.sort_by(|a, b| a.0.cmp(&b.0));
        out
    }

    fn collect_macros(
        &self,
        n: GameNodeId,
        path: &mut Vec<(GameNodeId, usize)>,
        pass: f64,
        out: &mut Vec<(Action, MacroPlan)>,
    ) {
        let token = |path: &[(GameNodeId, usize)], stop: bool| {
            let mut t = if path.is_empty() {
                NOOP.to_string()
            } else {
                let parts: Vec<String> =
                    path.iter().map(|&(m, k)| self.game.node(m).actions()[k].to_string()).collect();
                parts.join(".")
            };
            if stop {
                t.push_str(STOP);
            }
            Action::new(t)
        };
        if self.is_terminal(n) || self.owns(n) {
            out.push((token(path, false), MacroPlan { steps: path.clone(), pass, stop: None }));
            return;
        }
        let gamma = self.cont(n);
        if gamma < 1.0 {
            out.push((token(path, true), MacroPlan { steps: path.clone(), pass, stop: Some(1.0 - gamma) }));
        }
        if gamma > 0.0 {
            for (k, &c) in self.game.node(n).children.iter().enumerate() {
                path.push((n, k));
                self.collect_macros(c, path, pass * gamma, out);
                path.pop();
            }
        }
    }
}

impl Environment for SeatView {
    type Obs = GameObs;

    fn first_turn(&self) -> Turn {
        let root = self.game.root();
        if self.owns(root) || self.is_terminal(root) {
            Turn::Agent
        } else {
            Turn::Daimon
        }
    }

    fn initial_distribution(&self) -> Vec<f64> {
        vec![1.0]
    }

    fn legal_actions(&self, history: &History) -> Result<Vec<Action>> {
        let pos = self.resolve(history)?;
        if history.is_active(self.first_turn()) {
            if pos.stopped || self.is_terminal(pos.node) {
                return Err(PohpError::Structure(format!("{history} is terminal")));
            }
            Ok(self.game.node(pos.node).actions())
        } else {
            Ok(self.macros_at(pos.node).into_iter().map(|(a, _)| a).collect())
        }
    }

    fn observe(&self, history: &History) -> Result<GameObs> {
        let pos = self.resolve(history)?;
        let node = self.game.node(pos.node);
        if pos.stopped || node.is_terminal() {
            let mut path = node.path_string();
            if pos.stopped {
                path.push_str(STOP);
            }
            Ok(GameObs { signal: Signal::Terminal(Arc::from(path.as_str())), reward: pos.obs_reward + self.utility(pos.node) })
        } else {
            Ok(GameObs { signal: Signal::InfoSet(info_label(&node.kind)), reward: pos.obs_reward })
        }
    }

    fn continue_prob(&self, history: &History) -> Result<f64> {
        let pos = self.resolve(history)?;
        if pos.stopped || self.is_terminal(pos.node) {
            Ok(0.0)
        } else {
            Ok(self.cont(pos.node))
        }
    }

    fn reward_bound(&self) -> f64 {
        self.game.reward_bound()
    }

    fn horizon(&self) -> Option<usize> {
        Some(2 * self.game.depth() + 2)
    }
}

fn info_label(kind: &GameNodeKind) -> Arc<str> {
    match kind {
        GameNodeKind::Chance { label, .. } | GameNodeKind::Decision { label, .. } => label.clone(),
        GameNodeKind::Terminal { .. } => Arc::from(""),
    }
}

/// Information states of the standard game agent.
#[derive(Clone, PartialEq, Eq, Hash)]
pub enum EfgState {
    Initial,
    /// Replaced wholesale by every observation.
    Observed(Arc<str>),
    Acted(Box<EfgState>, Action),
}

impl fmt::Debug for EfgState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            EfgState::Initial => f.write_str("∅"),
            EfgState::Observed(l) => f.write_str(l),
            EfgState::Acted(s, a) => write!(f, "{s:?}→{a}"),
        }
    }
}

/// The agent that identifies its state with the last observed information set.
#[derive(Debug, Clone)]
pub struct EfgAgent {
    root_label: Option<Arc<str>>,
    actions: HashMap<Arc<str>, Vec<Action>>,
}

impl EfgAgent {
    pub fn new(game: &GameDescription, seat: Seat) -> Self {
        let view = SeatView { game: Arc::new(game.clone()), seat };
        let mut actions = HashMap::new();
        for (i, node) in game.nodes().iter().enumerate() {
            if view.owns(i) {
                actions.insert(info_label(&node.kind), node.actions());
            }
        }
        let root_label = view.owns(game.root()).then(|| info_label(&game.node(game.root()).kind));
        EfgAgent { root_label, actions }
    }
}

impl Agent<GameObs> for EfgAgent {
    type State = EfgState;

    fn initial_state(&self) -> EfgState {
        match &self.root_label {
            Some(l) => EfgState::Observed(l.clone()),
            None => EfgState::Initial,
        }
    }

    fn act_update(&self, state: &EfgState, action: &Action) -> EfgState {
        EfgState::Acted(Box::new(state.clone()), action.clone())
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

    fn legal_actions_of_state(&self, state: &EfgState) -> Option<Vec<Action>> {
        match state {
            EfgState::Observed(l) => self.actions.get(l).cloned(),
            _ => None,
        }
    }
}

/// A seat's view materialized as a tree, with the game node behind every view node.
#[derive(Debug, Clone)]
pub struct SeatData {
    pub view: SeatView,
    pub tree: TreeIndex,
    game_node: Vec<GameNodeId>,
    plans: Vec<Vec<MacroPlan>>,
}

impl SeatData {
    pub fn build<A: Agent<GameObs>>(view: SeatView, agent: &A, config: &TreeConfig) -> Result<Self> {
        let (tree, _) = index_states(&view, agent, config)?;
        let mut game_node = Vec::with_capacity(tree.nodes().len());
        let mut plans = Vec::with_capacity(tree.nodes().len());
        for node in tree.nodes() {
            let pos = view.resolve(&node.history)?;
            game_node.push(pos.node);
            if node.kind == NodeKind::Passive {
                let mut table: HashMap<Action, MacroPlan> = view.macros_at(pos.node).into_iter().collect();
                plans.push(
                    node.actions
                        .iter()
                        .map(|a| table.remove(a).expect("tree actions come from the view"))
                        .collect(),
                );
            } else {
                plans.push(Vec::new());
            }
        }
        Ok(SeatData { view, tree, game_node, plans })
    }

    pub fn seat(&self) -> Seat {
        self.view.seat
    }

    pub fn game_node(&self, n: NodeId) -> GameNodeId {
        self.game_node[n.0]
    }

    pub fn plans(&self, n: NodeId) -> &[MacroPlan] {
        &self.plans[n.0]
    }
}

/// A game together with one POHP view per player and one for chance.
#[derive(Debug, Clone)]
pub struct PohpFormGame {
    game: Arc<GameDescription>,
    seats: Vec<SeatData>,
    /// The active state owning each decision or chance node, in its seat's tree.
    owner: Vec<Option<StateId>>,
}

/// Result of playing one round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundOutcome {
    pub path: Vec<Action>,
    pub node: GameNodeId,
    /// Whether play stopped by the continuation probability at a non-terminal node.
    pub stopped: bool,
    pub returns: Vec<f64>,
    /// The last observation each player receives.
    pub final_observations: Vec<GameObs>,
}

pub fn efg_to_pohp_form(game: GameDescription) -> Result<PohpFormGame> {
    PohpFormGame::new(game, &TreeConfig::default())
}

impl PohpFormGame {
    pub fn new(game: GameDescription, config: &TreeConfig) -> Result<Self> {
        let game = Arc::new(game);
        let chance = EfgAgent::new(&game, Seat::Chance);
        Self::with_chance_agent(game, &chance, config)
    }

    /// Build with a custom agent for the chance seat; players use [`EfgAgent`].
    pub fn with_chance_agent<A: Agent<GameObs>>(game: Arc<GameDescription>, chance: &A, config: &TreeConfig) -> Result<Self> {
        let mut seats = Vec::with_capacity(game.players() + 1);
        for i in 0..game.players() {
            let agent = EfgAgent::new(&game, Seat::Player(i));
            seats.push(SeatData::build(SeatView::new(game.clone(), Seat::Player(i)), &agent, config)?);
        }
        seats.push(SeatData::build(SeatView::new(game.clone(), Seat::Chance), chance, config)?);
        Ok(Self::assemble(game, seats))
    }

    /// The same game with every player seat replaced by a perfect-recall agent;
    /// the chance seat keeps its view.
    pub fn with_perfect_recall_players(&self, config: &TreeConfig) -> Result<Self> {
        let mut seats = Vec::with_capacity(self.seats.len());
        for i in 0..self.players() {
            let view = SeatView::new(self.game.clone(), Seat::Player(i));
            seats.push(SeatData::build(view, &PerfectRecall::<GameObs>::carrying(), config)?);
        }
        seats.push(self.chance().clone());
        Ok(Self::assemble(self.game.clone(), seats))
    }

    fn assemble(game: Arc<GameDescription>, seats: Vec<SeatData>) -> Self {
        let mut owner = vec![None; game.nodes().len()];
        for data in &seats {
            for (i, node) in data.tree.nodes().iter().enumerate() {
                if node.is_live_active() {
                    owner[data.game_node[i]] = Some(node.state);
                }
            }
        }
        PohpFormGame { game, seats, owner }
    }

    pub fn game(&self) -> &Arc<GameDescription> {
        &self.game
    }

    pub fn players(&self) -> usize {
        self.game.players()
    }

    pub fn player(&self, i: usize) -> &SeatData {
        &self.seats[i]
    }

    pub fn chance(&self) -> &SeatData {
        &self.seats[self.game.players()]
    }

    pub fn tree(&self, i: usize) -> &TreeIndex {
        &self.seats[i].tree
    }

    /// The state that decides at a game node, in the owning seat's tree.
    pub fn owner(&self, n: GameNodeId) -> Option<StateId> {
        self.owner[n]
    }

    pub fn uniform_profile(&self) -> Vec<BehavioralStrategy> {
        (0..self.players()).map(|i| BehavioralStrategy::uniform(self.tree(i))).collect()
    }

    fn check_profile(&self, profile: &[BehavioralStrategy]) -> Result<()> {
        if profile.len() != self.players() {
            return Err(PohpError::Validation(format!(
                "profile has {} strategies for {} players",
                profile.len(),
                self.players()
            )));
        }
        for (i, pi) in profile.iter().enumerate() {
            BehavioralStrategy::from_probs(self.tree(i), pi.rows().to_vec())?;
        }
        Ok(())
    }

    /// Probability that the owner of game node `n` picks action `k`.
    pub fn move_prob(&self, profile: &[BehavioralStrategy], n: GameNodeId, k: usize) -> f64 {
        match &self.game.node(n).kind {
            GameNodeKind::Chance { outcomes, .. } => outcomes[k].1,
            GameNodeKind::Decision { player, .. } => {
                let s = self.owner[n].expect("reachable decision nodes have an owner");
                profile[*player].prob(s, k)
            }
            GameNodeKind::Terminal { .. } => 0.0,
        }
    }

    /// The daimon strategy a seat faces: `σ_i(h) = π_{p(h)}(u_{p(h)}(h))` along each daimon action.
    pub fn daimon_strategy(&self, data: &SeatData, profile: &[BehavioralStrategy]) -> Result<DaimonStrategy> {
        self.check_profile(profile)?;
        let rows = data
            .tree
            .nodes()
            .iter()
            .enumerate()
            .map(|(i, node)| {
                if node.kind != NodeKind::Passive {
                    return Vec::new();
                }
                data.plans[i]
                    .iter()
                    .map(|plan| {
                        let moves: f64 = plan.steps.iter().map(|&(n, k)| self.move_prob(profile, n, k)).product();
                        moves * plan.pass * plan.stop.unwrap_or(1.0)
                    })
                    .collect()
            })
            .collect();
        DaimonStrategy::from_rows(&data.tree, rows)
    }

    pub fn player_daimon(&self, i: usize, profile: &[BehavioralStrategy]) -> Result<DaimonStrategy> {
        self.daimon_strategy(&self.seats[i], profile)
    }

    /// Chance's fixed strategy over its own active states.
    pub fn chance_strategy(&self) -> BehavioralStrategy {
        let data = self.chance();
        let rows = data
            .tree
            .active_states()
            .map(|s| {
                let n = data.game_node(data.tree.state(s).live[0]);
                match &self.game.node(n).kind {
                    GameNodeKind::Chance { outcomes, .. } => outcomes.iter().map(|(_, p)| *p).collect(),
                    _ => unreachable!("chance states sit at chance nodes"),
                }
            })
            .collect();
        BehavioralStrategy::from_probs(&data.tree, rows).expect("chance outcomes were validated")
    }

    /// Player `i`'s expected return computed inside its own POHP view.
    pub fn view_value(&self, i: usize, profile: &[BehavioralStrategy]) -> Result<f64> {
        let data = &self.seats[i];
        let sigma = self.player_daimon(i, profile)?;
        let ev = values::evaluate(&data.tree, &profile[i], &sigma);
        Ok(data.tree.roots().iter().map(|r| ev.daimon[r.0] * ev.ret[r.0]).sum())
    }

    /// Sample one round of play.
    pub fn play_round(&self, profile: &[BehavioralStrategy], seed: u64) -> Result<RoundOutcome> {
        self.check_profile(profile)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let players = self.players();
        let mut returns = vec![0.0; players];
        let mut pending = vec![0.0; players];
        let mut node = self.game.root();
        let mut stopped = false;
        while !self.game.node(node).is_terminal() {
            let probs: Vec<f64> =
                (0..self.game.node(node).children.len()).map(|k| self.move_prob(profile, node, k)).collect();
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = probs.iter().rposition(|&p| p > 0.0).unwrap_or(0);
            for (k, p) in probs.iter().enumerate() {
                acc += p;
                if u < acc {
                    pick = k;
                    break;
                }
            }
            node = self.game.node(node).children[pick];
            let child = self.game.node(node);
            for i in 0..players {
                returns[i] += child.rewards[i];
                pending[i] += child.rewards[i];
            }
            if child.is_terminal() {
                break;
            }
            if let GameNodeKind::Decision { player, .. } = &child.kind {
                pending[*player] = 0.0;
            }
            if rng.gen::<f64>() >= child.cont {
                stopped = true;
                break;
            }
        }
        let end = self.game.node(node);
        let mut path = end.path_string();
        if stopped {
            path.push_str(STOP);
        }
        let signal = Signal::Terminal(Arc::from(path.as_str()));
        let utilities = match &end.kind {
            GameNodeKind::Terminal { utilities } => utilities.clone(),
            _ => vec![0.0; players],
        };
        let final_observations = (0..players)
            .map(|i| GameObs { signal: signal.clone(), reward: pending[i] + utilities[i] })
            .collect();
        for i in 0..players {
            returns[i] += utilities[i];
        }
        Ok(RoundOutcome { path: end.path.clone(), node, stopped, returns, final_observations })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::bundled::{kuhn, matching_pennies};
    use crate::strategy::PureStrategy;

    #[test]
    fn kuhn_views() {
        let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
        assert_eq!(form.tree(0).num_active(), 6);
        assert_eq!(form.tree(1).num_active(), 6);
        assert!(form.tree(0).has_perfect_recall() && form.tree(1).has_perfect_recall());
        assert_eq!(form.tree(0).first_turn(), Turn::Daimon);
    }

    #[test]
    fn pennies_second_mover_cannot_see() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        assert_eq!(form.tree(0).first_turn(), Turn::Agent);
        assert_eq!(form.tree(1).state(StateId(0)).members.len(), 2);
    }

    #[test]
    fn pure_rounds_are_deterministic() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let profile: Vec<BehavioralStrategy> = (0..2)
            .map(|i| BehavioralStrategy::from_pure(form.tree(i), &PureStrategy::constant(form.tree(i), 0)))
            .collect();
        let out = form.play_round(&profile, 1).unwrap();
        assert_eq!(out.returns, vec![1.0, -1.0]);
        assert!(!out.stopped);
        assert_eq!(out.final_observations[1].reward, -1.0);
        assert!(form.play_round(&profile[..1], 1).is_err());
    }

    #[test]
    fn remembering_players_agree_on_values() {
        let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
        let again = form.with_perfect_recall_players(&TreeConfig::default()).unwrap();
        assert_eq!(again.tree(0).num_active(), 6);
        let v = again.view_value(0, &again.uniform_profile()).unwrap();
        assert!((v - 0.125).abs() < 1e-12);
    }
}
