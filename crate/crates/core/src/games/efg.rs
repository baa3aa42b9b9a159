//! Extensive-form game descriptions and their text format.
//!
//! The text format is line oriented. After a `players N` header, each line
//! describes one node by its action path:
//!
//! ```text
//! # matching pennies, P1 wins on a match
//! players 2
//! /      player 1 @p1 H T
//! /H     player 2 @p2 H T
//! /T     player 2 @p2 H T
//! /H/H   terminal 1 -1
//! /H/T   terminal -1 1
//! /T/H   terminal -1 1
//! /T/T   terminal 1 -1
//! ```
//!
//! Chance nodes list `action=probability` pairs (`1/3` fractions are accepted) and
//! may carry an `@label`; decision nodes must name their information set with
//! `@label`. Optional annotations follow a `;`: `rewards=r1,r2` for per-player
//! rewards on the edge into the node and `continue=p` for its continuation
//! probability.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use crate::error::{PohpError, Result};
use crate::history::Action;
use crate::process::PROB_TOLERANCE;

pub type GameNodeId = usize;

#[derive(Debug, Clone, PartialEq)]
pub enum GameNodeKind {
    Chance { label: Arc<str>, outcomes: Vec<(Action, f64)> },
    Decision { player: usize, label: Arc<str>, actions: Vec<Action> },
    Terminal { utilities: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct GameNode {
    pub path: Vec<Action>,
    pub parent: Option<GameNodeId>,
    pub kind: GameNodeKind,
    /// Children aligned with the node's (sorted) actions.
    pub children: Vec<GameNodeId>,
    /// Per-player rewards emitted on the edge into this node.
    pub rewards: Vec<f64>,
    /// Continuation probability after reaching this node (zero at terminals).
    pub cont: f64,
}

impl GameNode {
    pub fn actions(&self) -> Vec<Action> {
        match &self.kind {
            GameNodeKind::Chance { outcomes, .. } => outcomes.iter().map(|(a, _)| a.clone()).collect(),
            GameNodeKind::Decision { actions, .. } => actions.clone(),
            GameNodeKind::Terminal { .. } => Vec::new(),
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self.kind, GameNodeKind::Terminal { .. })
    }

    pub fn path_string(&self) -> String {
        if self.path.is_empty() {
            "/".to_string()
        } else {
            self.path.iter().map(|a| format!("/{a}")).collect()
        }
    }
}

/// Node kinds as written by a user, before validation.
#[derive(Debug, Clone, PartialEq)]
pub enum SpecKind {
    Chance { label: Option<String>, outcomes: Vec<(String, f64)> },
    Decision { player: usize, label: Option<String>, actions: Vec<String> },
    Terminal { utilities: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NodeSpec {
    pub path: Vec<String>,
    pub kind: SpecKind,
    pub rewards: Option<Vec<f64>>,
    pub cont: Option<f64>,
    /// Source line, or 0 for programmatic specs.
    pub line: usize,
}

/// A finite extensive-form game: turn function, actions, partitions, and utilities.
#[derive(Debug, Clone, PartialEq)]
pub struct GameDescription {
    players: usize,
    nodes: Vec<GameNode>,
    reward_bound: f64,
}

fn fail(line: usize, message: impl Into<String>) -> PohpError {
    if line == 0 {
        PohpError::Validation(message.into())
    } else {
        PohpError::Parse { line, message: message.into() }
    }
}

pub(crate) fn check_token(token: &str, line: usize) -> Result<()> {
    if token.is_empty()
        || token == "noop"
        || token.chars().any(|c| c.is_whitespace() || "/.|;=@#".contains(c))
    {
        return Err(fail(line, format!("invalid action token {token:?}")));
    }
    Ok(())
}

impl GameDescription {
    pub fn from_specs(players: usize, specs: Vec<NodeSpec>) -> Result<Self> {
        if players == 0 {
            return Err(PohpError::Validation("a game needs at least one player".into()));
        }
        let mut by_path: BTreeMap<Vec<String>, usize> = BTreeMap::new();
        for (i, spec) in specs.iter().enumerate() {
            for t in &spec.path {
                check_token(t, spec.line)?;
            }
            if by_path.insert(spec.path.clone(), i).is_some() {
                return Err(fail(spec.line, format!("duplicate node /{}", spec.path.join("/"))));
            }
        }
        if !by_path.contains_key(&Vec::new()) {
            return Err(PohpError::Validation("missing root node '/'".into()));
        }

        // Breadth-first from the root so node ids follow depth.
        let mut nodes: Vec<GameNode> = Vec::with_capacity(specs.len());
        let mut queue = std::collections::VecDeque::from([(Vec::<String>::new(), None::<GameNodeId>)]);
        let mut chance_labels: HashMap<String, Vec<(Action, f64)>> = HashMap::new();
        let mut decision_labels: HashMap<(usize, String), Vec<Action>> = HashMap::new();
        while let Some((path, parent)) = queue.pop_front() {
            let spec = &specs[by_path[&path]];
            let line = spec.line;
            let id = nodes.len();
            let (kind, actions): (GameNodeKind, Vec<String>) = match &spec.kind {
                SpecKind::Chance { label, outcomes } => {
                    let mut outcomes = outcomes.clone();
                    outcomes.sort_by(|a, b| a.0.cmp(&b.0));
                    let mut total = 0.0;
                    for (a, p) in &outcomes {
                        check_token(a, line)?;
                        if !(*p >= 0.0) || !p.is_finite() {
                            return Err(fail(line, format!("invalid chance probability {p} for {a}")));
                        }
                        total += p;
                    }
                    if outcomes.is_empty() || (total - 1.0).abs() > PROB_TOLERANCE {
                        return Err(fail(line, format!("chance probabilities sum to {total}")));
                    }
                    let label = label.clone().unwrap_or_else(|| format!("/{}", path.join("/")));
                    let outs: Vec<(Action, f64)> = outcomes.iter().map(|(a, p)| (Action::new(a), *p)).collect();
                    match chance_labels.get(&label) {
                        Some(prev) if prev != &outs => {
                            return Err(fail(line, format!("chance information set @{label} has inconsistent outcomes")))
                        }
                        _ => {
                            chance_labels.insert(label.clone(), outs.clone());
                        }
                    }
                    let names = outcomes.iter().map(|(a, _)| a.clone()).collect();
                    (GameNodeKind::Chance { label: Arc::from(label.as_str()), outcomes: outs }, names)
                }
                SpecKind::Decision { player, label, actions } => {
                    if *player >= players {
                        return Err(fail(line, format!("player {} out of range 1..={players}", player + 1)));
                    }
                    let Some(label) = label.clone() else {
                        return Err(fail(
                            line,
                            format!("decision node /{} is not covered by an information set", path.join("/")),
                        ));
                    };
                    let mut actions = actions.clone();
                    actions.sort();
                    let n = actions.len();
                    actions.dedup();
                    if actions.is_empty() || actions.len() != n {
                        return Err(fail(line, "decision nodes need distinct, nonempty actions"));
                    }
                    for a in &actions {
                        check_token(a, line)?;
                    }
                    let acts: Vec<Action> = actions.iter().map(Action::new).collect();
                    match decision_labels.get(&(*player, label.clone())) {
                        Some(prev) if prev != &acts => {
                            return Err(fail(line, format!("information set @{label} has inconsistent actions")))
                        }
                        _ => {
                            decision_labels.insert((*player, label.clone()), acts.clone());
                        }
                    }
                    (GameNodeKind::Decision { player: *player, label: Arc::from(label.as_str()), actions: acts }, actions)
                }
                SpecKind::Terminal { utilities } => {
                    if utilities.len() != players {
                        return Err(fail(line, format!("expected {players} utilities, got {}", utilities.len())));
                    }
                    (GameNodeKind::Terminal { utilities: utilities.clone() }, Vec::new())
                }
            };
            let rewards = match &spec.rewards {
                Some(r) if r.len() != players => {
                    return Err(fail(line, format!("expected {players} edge rewards, got {}", r.len())))
                }
                Some(r) => r.clone(),
                None => vec![0.0; players],
            };
            let cont = match (&kind, spec.cont) {
                (GameNodeKind::Terminal { .. }, _) => 0.0,
                (_, Some(p)) if !(0.0..=1.0).contains(&p) => {
                    return Err(fail(line, format!("continuation probability {p} outside [0, 1]")))
                }
                (_, Some(p)) => p,
                (_, None) => 1.0,
            };
            nodes.push(GameNode {
                path: path.iter().map(Action::new).collect(),
                parent,
                kind,
                children: Vec::new(),
                rewards,
                cont,
            });
            for a in actions {
                let mut child = path.clone();
                child.push(a.clone());
                if !by_path.contains_key(&child) {
                    return Err(fail(line, format!("action {a} at /{} has no child node", path.join("/"))));
                }
                queue.push_back((child, Some(id)));
            }
        }
        if nodes.len() != specs.len() {
            let orphan = specs
                .iter()
                .find(|s| !nodes.iter().any(|n| n.path.iter().map(|a| a.as_str()).eq(s.path.iter().map(|p| p.as_str()))))
                .expect("some spec was not reached");
            return Err(fail(orphan.line, format!("node /{} is not reachable from its parent", orphan.path.join("/"))));
        }
        for i in 1..nodes.len() {
            let p = nodes[i].parent.expect("non-root nodes have parents");
            nodes[p].children.push(i);
        }
        let mut game = GameDescription { players, nodes, reward_bound: 0.0 };
        game.reward_bound = game.compute_reward_bound();
        Ok(game)
    }

    fn compute_reward_bound(&self) -> f64 {
        // Bound on any single observation's reward: the absolute edge rewards along a
        // path plus the terminal utility.
        fn go(g: &GameDescription, n: GameNodeId, acc: &[f64], best: &mut f64) {
            let node = &g.nodes[n];
            let acc: Vec<f64> = acc.iter().zip(&node.rewards).map(|(a, r)| a + r.abs()).collect();
            match &node.kind {
                GameNodeKind::Terminal { utilities } => {
                    for (a, u) in acc.iter().zip(utilities) {
                        *best = best.max(a + u.abs());
                    }
                }
                _ => {
                    for a in &acc {
                        *best = best.max(*a);
                    }
                    for &c in &node.children {
                        go(g, c, &acc, best);
                    }
                }
            }
        }
        let mut best = 0.0;
        go(self, 0, &vec![0.0; self.players], &mut best);
        best
    }

    pub fn players(&self) -> usize {
        self.players
    }

    pub fn nodes(&self) -> &[GameNode] {
        &self.nodes
    }

    pub fn node(&self, id: GameNodeId) -> &GameNode {
        &self.nodes[id]
    }

    pub fn root(&self) -> GameNodeId {
        0
    }

    pub fn reward_bound(&self) -> f64 {
        self.reward_bound
    }

    pub fn child(&self, id: GameNodeId, action: &Action) -> Option<GameNodeId> {
        let node = &self.nodes[id];
        node.actions().iter().position(|a| a == action).map(|i| node.children[i])
    }

    pub fn node_at(&self, path: &[Action]) -> Option<GameNodeId> {
        path.iter().try_fold(self.root(), |n, a| self.child(n, a))
    }

    /// Longest root-to-leaf action path.
    pub fn depth(&self) -> usize {
        self.nodes.iter().map(|n| n.path.len()).max().unwrap_or(0)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut players = None;
        let mut specs = Vec::new();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let (body, notes) = match content.split_once(';') {
                Some((b, n)) => (b.trim(), Some(n.trim())),
                None => (content, None),
            };
            let mut words = body.split_whitespace();
            let head = words.next().unwrap_or_default();
            if head == "players" {
                if players.is_some() {
                    return Err(fail(line, "duplicate players header"));
                }
                let n = words
                    .next()
                    .and_then(|w| w.parse::<usize>().ok())
                    .ok_or_else(|| fail(line, "expected `players <count>`"))?;
                players = Some(n);
                continue;
            }
            let Some(count) = players else {
                return Err(fail(line, "the `players` header must come first"));
            };
            if !head.starts_with('/') {
                return Err(fail(line, format!("expected a node path starting with '/', got {head:?}")));
            }
            let path: Vec<String> = head.split('/').filter(|s| !s.is_empty()).map(str::to_string).collect();
            let kind_word = words.next().ok_or_else(|| fail(line, "missing node kind"))?;
            let rest: Vec<&str> = words.collect();
            let kind = match kind_word {
                "chance" => {
                    let (label, outs) = split_label(&rest);
                    let mut outcomes = Vec::new();
                    for w in outs {
                        let (a, p) = w.split_once('=').ok_or_else(|| fail(line, format!("expected action=prob, got {w:?}")))?;
                        outcomes.push((a.to_string(), parse_number(p).ok_or_else(|| fail(line, format!("bad probability {p:?}")))?));
                    }
                    SpecKind::Chance { label, outcomes }
                }
                "player" => {
                    let (p, rest) = rest.split_first().ok_or_else(|| fail(line, "missing player number"))?;
                    let player = p
                        .parse::<usize>()
                        .ok()
                        .filter(|&p| p >= 1 && p <= count)
                        .ok_or_else(|| fail(line, format!("player {p:?} out of range 1..={count}")))?;
                    let (label, actions) = split_label(rest);
                    SpecKind::Decision { player: player - 1, label, actions: actions.iter().map(|s| s.to_string()).collect() }
                }
                "terminal" => {
                    let utilities = rest
                        .iter()
                        .map(|w| parse_number(w).ok_or_else(|| fail(line, format!("bad utility {w:?}"))))
                        .collect::<Result<Vec<_>>>()?;
                    SpecKind::Terminal { utilities }
                }
                other => return Err(fail(line, format!("unknown node kind {other:?}"))),
            };
            let mut rewards = None;
            let mut cont = None;
            for note in notes.into_iter().flat_map(str::split_whitespace) {
                match note.split_once('=') {
                    Some(("rewards", v)) => {
                        rewards = Some(
                            v.split(',')
                                .map(|x| parse_number(x).ok_or_else(|| fail(line, format!("bad reward {x:?}"))))
                                .collect::<Result<Vec<_>>>()?,
                        )
                    }
                    Some(("continue", v)) => {
                        cont = Some(parse_number(v).ok_or_else(|| fail(line, format!("bad continuation {v:?}")))?)
                    }
                    _ => return Err(fail(line, format!("unknown annotation {note:?}"))),
                }
            }
            specs.push(NodeSpec { path, kind, rewards, cont, line });
        }
        let players = players.ok_or_else(|| fail(1, "missing `players` header"))?;
        Self::from_specs(players, specs)
    }

    /// Serialize in the text format accepted by [`GameDescription::parse`].
    pub fn to_text(&self) -> String {
        let mut out = format!("players {}\n", self.players);
        for node in &self.nodes {
            let _ = write!(out, "{}", node.path_string());
            match &node.kind {
                GameNodeKind::Chance { label, outcomes } => {
                    let _ = write!(out, " chance @{label}");
                    for (a, p) in outcomes {
                        let _ = write!(out, " {a}={p:?}");
                    }
                }
                GameNodeKind::Decision { player, label, actions } => {
                    let _ = write!(out, " player {} @{label}", player + 1);
                    for a in actions {
                        let _ = write!(out, " {a}");
                    }
                }
                GameNodeKind::Terminal { utilities } => {
                    out.push_str(" terminal");
                    for u in utilities {
                        let _ = write!(out, " {u:?}");
                    }
                }
            }
            let mut notes = Vec::new();
            if node.rewards.iter().any(|&r| r != 0.0) {
                let r: Vec<String> = node.rewards.iter().map(|r| format!("{r:?}")).collect();
                notes.push(format!("rewards={}", r.join(",")));
            }
            if !node.is_terminal() && node.cont != 1.0 {
                notes.push(format!("continue={:?}", node.cont));
            }
            if !notes.is_empty() {
                let _ = write!(out, " ; {}", notes.join(" "));
            }
            out.push('\n');
        }
        out
    }
}

fn split_label<'a>(words: &[&'a str]) -> (Option<String>, Vec<&'a str>) {
    match words.split_first() {
        Some((w, rest)) if w.starts_with('@') => (Some(w[1..].to_string()), rest.to_vec()),
        _ => (None, words.to_vec()),
    }
}

fn parse_number(s: &str) -> Option<f64> {
    match s.split_once('/') {
        Some((n, d)) => {
            let (n, d) = (n.parse::<f64>().ok()?, d.parse::<f64>().ok()?);
            (d != 0.0).then_some(n / d)
        }
        None => s.parse().ok(),
    }
}

/// Incremental construction of a [`GameDescription`] from paths.
#[derive(Debug, Clone)]
pub struct GameBuilder {
    players: usize,
    specs: Vec<NodeSpec>,
}

fn to_path(path: &[&str]) -> Vec<String> {
    path.iter().map(|s| s.to_string()).collect()
}

impl GameBuilder {
    pub fn new(players: usize) -> Self {
        GameBuilder { players, specs: Vec::new() }
    }

    fn push(&mut self, path: Vec<String>, kind: SpecKind) -> &mut NodeSpec {
        self.specs.push(NodeSpec { path, kind, rewards: None, cont: None, line: 0 });
        self.specs.last_mut().expect("just pushed")
    }

    pub fn chance(&mut self, path: &[&str], label: Option<&str>, outcomes: &[(&str, f64)]) -> &mut NodeSpec {
        let outcomes = outcomes.iter().map(|(a, p)| (a.to_string(), *p)).collect();
        self.push(to_path(path), SpecKind::Chance { label: label.map(str::to_string), outcomes })
    }

    /// `player` is zero-based.
    pub fn decision(&mut self, path: &[&str], player: usize, label: &str, actions: &[&str]) -> &mut NodeSpec {
        let actions = actions.iter().map(|a| a.to_string()).collect();
        self.push(to_path(path), SpecKind::Decision { player, label: Some(label.to_string()), actions })
    }

    pub fn terminal(&mut self, path: &[&str], utilities: &[f64]) -> &mut NodeSpec {
        self.push(to_path(path), SpecKind::Terminal { utilities: utilities.to_vec() })
    }

    pub fn push_spec(&mut self, spec: NodeSpec) {
        self.specs.push(spec);
    }

    pub fn build(self) -> Result<GameDescription> {
        GameDescription::from_specs(self.players, self.specs)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENNIES: &str = "\
# matching pennies
players 2
/      player 1 @p1 H T
/H     player 2 @p2 H T
/T     player 2 @p2 H T
/H/H   terminal 1 -1
/H/T   terminal -1 1
/T/H   terminal -1 1
/T/T   terminal 1 -1
";

    #[test]
    fn parses_and_round_trips() {
        let g = GameDescription::parse(PENNIES).unwrap();
        assert_eq!(g.players(), 2);
        assert_eq!(g.nodes().len(), 7);
        assert_eq!(g.reward_bound(), 1.0);
        let again = GameDescription::parse(&g.to_text()).unwrap();
        assert_eq!(g, again);
    }

    #[test]
    fn fractions_and_annotations() {
        let text = "players 1\n/ chance @c a=1/3 b=2/3\n/a terminal 1 ; rewards=0.5\n/b player 1 @x l ; continue=0.5\n/b/l terminal 0\n";
        let g = GameDescription::parse(text).unwrap();
        match &g.node(0).kind {
            GameNodeKind::Chance { outcomes, .. } => assert!((outcomes[0].1 - 1.0 / 3.0).abs() < 1e-15),
            _ => panic!(),
        }
        let b = g.node_at(&[Action::new("b")]).unwrap();
        assert_eq!(g.node(b).cont, 0.5);
        assert_eq!(g.reward_bound(), 1.5);
    }

    #[test]
    fn reports_line_of_missing_partition() {
        let text = "players 1\n/ player 1 a\n/a terminal 0\n";
        match GameDescription::parse(text) {
            Err(PohpError::Parse { line, message }) => {
                assert_eq!(line, 2);
                assert!(message.contains("information set"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_inputs() {
        let cases = [
            ("/ player 1 @x a\n", 1),
            ("players 1\n/ chance a=0.5 b=0.4\n/a terminal 0\n/b terminal 0\n", 2),
            ("players 1\n/ player 1 @x a\n", 2),
            ("players 1\n/ player 1 @x a\n/a terminal 0 1\n", 3),
            ("players 1\n/ player 2 @x a\n/a terminal 0\n", 2),
            ("players 1\n/ terminal 0\n/zz terminal 0\n", 3),
        ];
        for (text, line) in cases {
            match GameDescription::parse(text) {
                Err(PohpError::Parse { line: l, .. }) => assert_eq!(l, line, "{text}"),
                other => panic!("{text}: unexpected {other:?}"),
            }
        }
    }
}
