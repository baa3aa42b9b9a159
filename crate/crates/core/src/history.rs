use std::fmt;
use std::sync::Arc;

/// An opaque action token.
///
/// Tokens compare lexicographically; that order is the canonical action order
/// used by every enumeration in this crate.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Action(Arc<str>);

impl Action {
    pub fn new(token: impl AsRef<str>) -> Self {
        Action(Arc::from(token.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Debug for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl fmt::Display for Action {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for Action {
    fn from(s: &str) -> Self {
        Action::new(s)
    }
}

/// Who moves first from an initial history.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Turn {
    Agent,
    Daimon,
}

impl Turn {
    /// The indicator ι: passive histories are exactly those with `|h| mod 2 = ι`,
    /// so ι = 1 when the agent acts first.
    pub fn indicator(self) -> usize {
        match self {
            Turn::Agent => 1,
            Turn::Daimon => 0,
        }
    }
}

/// A history: an initial history (by index) followed by a string of actions.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct History {
    pub origin: usize,
    pub actions: Vec<Action>,
}

impl History {
    pub fn initial(origin: usize) -> Self {
        History { origin, actions: Vec::new() }
    }

    pub fn from_tokens<I, T>(origin: usize, tokens: I) -> Self
    where
        I: IntoIterator<Item = T>,
        T: AsRef<str>,
    {
        History { origin, actions: tokens.into_iter().map(Action::new).collect() }
    }

    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn is_initial(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn child(&self, action: Action) -> Self {
        let mut actions = self.actions.clone();
        actions.push(action);
        History { origin: self.origin, actions }
    }

    /// The first `n` actions of this history.
    pub fn prefix(&self, n: usize) -> Self {
        History { origin: self.origin, actions: self.actions[..n.min(self.len())].to_vec() }
    }

    pub fn parent(&self) -> Option<Self> {
        (!self.is_empty()).then(|| self.prefix(self.len() - 1))
    }

    pub fn last(&self) -> Option<&Action> {
        self.actions.last()
    }

    /// `self ⊑ other`: same origin and `self.actions` is a prefix of `other.actions`.
    pub fn is_prefix_of(&self, other: &History) -> bool {
        self.origin == other.origin
            && self.len() <= other.len()
            && self.actions[..] == other.actions[..self.len()]
    }

    /// Whether the daimon moves next (a passive history) given the first-turn indicator.
    pub fn is_passive(&self, first_turn: Turn) -> bool {
        self.len() % 2 == first_turn.indicator()
    }

    pub fn is_active(&self, first_turn: Turn) -> bool {
        !self.is_passive(first_turn)
    }
}

impl fmt::Debug for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self)
    }
}

impl fmt::Display for History {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "#{}", self.origin)?;
        for a in &self.actions {
            write!(f, "/{a}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parity_follows_first_turn() {
        let h = History::from_tokens(0, ["a", "b", "c"]);
        assert!(h.is_passive(Turn::Agent));
        assert!(h.is_active(Turn::Daimon));
        assert!(History::initial(0).is_active(Turn::Agent));
        assert!(History::initial(0).is_passive(Turn::Daimon));
    }

    #[test]
    fn prefix_order() {
        let h = History::from_tokens(0, ["a", "b"]);
        let g = History::from_tokens(0, ["a", "b", "c"]);
        assert!(h.is_prefix_of(&g));
        assert!(h.is_prefix_of(&h));
        assert!(!g.is_prefix_of(&h));
        assert!(!History::from_tokens(1, ["a"]).is_prefix_of(&g));
        assert!(!History::from_tokens(0, ["b"]).is_prefix_of(&g));
        assert_eq!(g.parent().unwrap(), h);
    }
}
