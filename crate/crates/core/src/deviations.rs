//! Pure strategies, deviations, truncation, and the mixed-strategy pushforward.

use std::collections::HashMap;
use std::sync::Arc;

use rand::Rng;

use crate::error::{PohpError, Result};
use crate::strategy::{BehavioralStrategy, MixedStrategy, PureStrategy};
use crate::tree::{StateId, TreeIndex};

/// Default cap on the number of enumerated pure strategies.
pub const DEFAULT_PURE_BUDGET: usize = 1 << 20;

/// Largest strategy set for which the full swap set is built.
pub const MAX_SWAP_STRATEGIES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeviationKind {
    External,
    Counterfactual,
    Swap,
    /// Single-strategy swaps `x ↦ y`, built from the swap enumeration.
    Internal,
}

impl std::str::FromStr for DeviationKind {
    type Err = PohpError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "external" => Ok(DeviationKind::External),
            "counterfactual" => Ok(DeviationKind::Counterfactual),
            "swap" => Ok(DeviationKind::Swap),
            "internal" => Ok(DeviationKind::Internal),
            other => Err(PohpError::Validation(format!("unknown deviation kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncMode {
    /// `φ_{≺s}`: apply the deviation strictly before `s`.
    Before,
    /// `φ_{≼s}`: apply it through the action taken at `s`.
    Through,
}

/// A map on pure strategies.
#[derive(Debug, Clone, PartialEq)]
pub enum Deviation {
    Identity,
    /// Replace the action at every state with `Some(a)`; keep it elsewhere.
    Local { forced: Vec<Option<usize>> },
    /// An explicit table over an enumerated strategy set, applied only at `active` states.
    Swap { strategies: Arc<Vec<PureStrategy>>, table: Vec<usize>, active: Vec<bool> },
}

impl Deviation {
    /// The constant deviation to `x`.
    pub fn external(x: &PureStrategy) -> Self {
        Deviation::Local { forced: x.choices().iter().map(|&a| Some(a)).collect() }
    }

    /// Force play to `trigger`, then follow `continuation` at `trigger` and below.
    pub fn counterfactual(tree: &TreeIndex, trigger: StateId, continuation: &PureStrategy) -> Result<Self> {
        tree.require_perfect_recall()?;
        check_active(tree, trigger)?;
        let mut forced = vec![None; tree.num_active()];
        for &(s, a) in tree.state_path(trigger) {
            forced[s.0] = Some(a);
        }
        for t in tree.subtree(trigger) {
            forced[t.0] = Some(continuation.choice(t));
        }
        Ok(Deviation::Local { forced })
    }

    pub fn swap(strategies: Arc<Vec<PureStrategy>>, table: Vec<usize>) -> Result<Self> {
        if table.len() != strategies.len() || table.iter().any(|&y| y >= strategies.len()) {
            return Err(PohpError::Validation("swap table must map the strategy set into itself".into()));
        }
        let n = strategies.first().map_or(0, |x| x.choices().len());
        Ok(Deviation::Swap { strategies, table, active: vec![true; n] })
    }

    pub fn is_identity(&self) -> bool {
        match self {
            Deviation::Identity => true,
            Deviation::Local { forced } => forced.iter().all(Option::is_none),
            Deviation::Swap { table, active, .. } => {
                table.iter().enumerate().all(|(i, &j)| i == j) || active.iter().all(|a| !a)
            }
        }
    }

    /// The forced action at `s`, for local deviations.
    pub fn forced_at(&self, s: StateId) -> Option<usize> {
        match self {
            Deviation::Local { forced } => forced[s.0],
            _ => None,
        }
    }
}

fn check_active(tree: &TreeIndex, s: StateId) -> Result<()> {
    if tree.is_active_state(s) {
        Ok(())
    } else {
        Err(PohpError::Validation(format!("state {} is not an active state of this tree", s.0)))
    }
}

/// Every pure strategy, in lexicographic order of the choice vectors.
pub fn enumerate_pure_strategies(tree: &TreeIndex, budget: usize) -> Result<Vec<PureStrategy>> {
    let sizes: Vec<usize> = tree.active_states().map(|s| tree.state(s).actions.len()).collect();
    let mut count: usize = 1;
    for &k in &sizes {
        count = count
            .checked_mul(k)
            .filter(|&c| c <= budget)
            .ok_or_else(|| PohpError::Resource(format!("more than {budget} pure strategies")))?;
    }
    let mut out = Vec::with_capacity(count);
    let mut current = vec![0usize; sizes.len()];
    for _ in 0..count {
        out.push(PureStrategy::from_choices_unchecked(current.clone()));
        for i in (0..sizes.len()).rev() {
            current[i] += 1;
            if current[i] < sizes[i] {
                break;
            }
            current[i] = 0;
        }
    }
    Ok(out)
}

/// Pure strategies over a subset of states; other states take `base`'s choice.
fn enumerate_over(tree: &TreeIndex, states: &[StateId], base: &[usize], budget: usize) -> Result<Vec<PureStrategy>> {
    let sizes: Vec<usize> = states.iter().map(|&s| tree.state(s).actions.len()).collect();
    let count = sizes
        .iter()
        .try_fold(1usize, |c, &k| c.checked_mul(k).filter(|&c| c <= budget))
        .ok_or_else(|| PohpError::Resource(format!("more than {budget} continuations")))?;
    let mut out = Vec::with_capacity(count);
    let mut current = vec![0usize; sizes.len()];
    for _ in 0..count {
        let mut choices = base.to_vec();
        for (i, s) in states.iter().enumerate() {
            choices[s.0] = current[i];
        }
        out.push(PureStrategy::from_choices_unchecked(choices));
        for i in (0..sizes.len()).rev() {
            current[i] += 1;
            if current[i] < sizes[i] {
                break;
            }
            current[i] = 0;
        }
    }
    Ok(out)
}

pub fn apply_deviation(phi: &Deviation, x: &PureStrategy) -> PureStrategy {
    match phi {
        Deviation::Identity => x.clone(),
        Deviation::Local { forced } => PureStrategy::from_choices_unchecked(
            x.choices().iter().zip(forced).map(|(&a, f)| f.unwrap_or(a)).collect(),
        ),
        Deviation::Swap { strategies, table, active } => {
            let i = strategies.binary_search(x).expect("swap deviations act on their own strategy set");
            let y = &strategies[table[i]];
            PureStrategy::from_choices_unchecked(
                x.choices()
                    .iter()
                    .zip(y.choices())
                    .zip(active)
                    .map(|((&a, &b), &on)| if on { b } else { a })
                    .collect(),
            )
        }
    }
}

pub fn truncate(phi: &Deviation, s: StateId, mode: TruncMode, tree: &TreeIndex) -> Result<Deviation> {
    check_active(tree, s)?;
    let keep = |t: StateId| match mode {
        TruncMode::Before => tree.precedes(t, s),
        TruncMode::Through => tree.precedes_eq(t, s),
    };
    Ok(match phi {
        Deviation::Identity => Deviation::Identity,
        Deviation::Local { forced } => Deviation::Local {
            forced: forced.iter().enumerate().map(|(t, f)| if keep(StateId(t)) { *f } else { None }).collect(),
        },
        Deviation::Swap { strategies, table, active } => Deviation::Swap {
            strategies: strategies.clone(),
            table: table.clone(),
            active: active.iter().enumerate().map(|(t, &on)| on && keep(StateId(t))).collect(),
        },
    })
}

/// `[φπ](x′) = Σ_{x ∈ φ⁻¹(x′)} π(x)`.
///
/// Local deviations of a behavioral strategy stay behavioral; swap deviations
/// produce a distribution over their enumerated strategy set.
pub fn pushforward(phi: &Deviation, pi: &MixedStrategy, tree: &TreeIndex) -> Result<MixedStrategy> {
    match (phi, pi) {
        (Deviation::Identity, _) => Ok(pi.clone()),
        (Deviation::Local { forced }, MixedStrategy::Behavioral(b)) => {
            let mut out = b.clone();
            for (s, f) in forced.iter().enumerate() {
                if let Some(a) = f {
                    out.force(StateId(s), *a);
                }
            }
            Ok(MixedStrategy::Behavioral(out))
        }
        (Deviation::Swap { strategies, .. }, MixedStrategy::Behavioral(b)) => {
            let mu = strategies.iter().map(|x| b.pure_prob(x)).collect();
            push_enumerated(phi, strategies, &mu)
        }
        (_, MixedStrategy::Enumerated(mu)) => {
            let strategies = match phi {
                Deviation::Swap { strategies, .. } => strategies.clone(),
                _ => Arc::new(enumerate_pure_strategies(tree, DEFAULT_PURE_BUDGET)?),
            };
            if strategies.len() != mu.len() {
                return Err(PohpError::Contract(
                    "enumerated mixed strategy does not match the deviation's strategy set".into(),
                ));
            }
            push_enumerated(phi, &strategies, mu)
        }
    }
}

fn push_enumerated(phi: &Deviation, strategies: &[PureStrategy], mu: &Vec<f64>) -> Result<MixedStrategy> {
    let index: HashMap<&PureStrategy, usize> = strategies.iter().enumerate().map(|(i, x)| (x, i)).collect();
    let mut out = vec![0.0; strategies.len()];
    for (x, &p) in strategies.iter().zip(mu) {
        let y = apply_deviation(phi, x);
        let j = *index
            .get(&y)
            .ok_or_else(|| PohpError::Contract("deviation leaves the enumerated strategy set".into()))?;
        out[j] += p;
    }
    Ok(MixedStrategy::Enumerated(out))
}

/// The deviation set of the given kind.
///
/// External: one constant deviation per pure strategy. Counterfactual: one per
/// trigger state and pure continuation at and below it. Swap: every map on the
/// strategy set, only for tiny sets. Internal: the swaps that move one strategy.
pub fn deviation_set(kind: DeviationKind, tree: &TreeIndex) -> Result<Vec<Deviation>> {
    match kind {
        DeviationKind::External => {
            Ok(enumerate_pure_strategies(tree, DEFAULT_PURE_BUDGET)?.iter().map(Deviation::external).collect())
        }
        DeviationKind::Counterfactual => {
            tree.require_perfect_recall()?;
            let base = vec![0; tree.num_active()];
            let mut out: Vec<Deviation> = Vec::new();
            for s in tree.active_states() {
                for c in enumerate_over(tree, &tree.subtree(s), &base, DEFAULT_PURE_BUDGET)? {
                    let d = Deviation::counterfactual(tree, s, &c)?;
                    if !out.contains(&d) {
                        out.push(d);
                    }
                }
            }
            Ok(out)
        }
        DeviationKind::Swap | DeviationKind::Internal => {
            let xs = Arc::new(enumerate_pure_strategies(tree, MAX_SWAP_STRATEGIES)?);
            let n = xs.len();
            let mut out = Vec::new();
            if kind == DeviationKind::Swap {
                let total = n.pow(n as u32);
                for mut code in 0..total {
                    let mut table = vec![0; n];
                    for slot in table.iter_mut().rev() {
                        *slot = code % n;
                        code /= n;
                    }
                    out.push(Deviation::swap(xs.clone(), table)?);
                }
            } else {
                for from in 0..n {
                    for to in 0..n {
                        if from != to {
                            let mut table: Vec<usize> = (0..n).collect();
                            table[from] = to;
                            out.push(Deviation::swap(xs.clone(), table)?);
                        }
                    }
                }
            }
            Ok(out)
        }
    }
}

/// A uniformly drawn member of the deviation family; swaps use a random table
/// over the enumerated strategy set (up to `DEFAULT_PURE_BUDGET` strategies).
pub fn random_deviation<R: Rng>(kind: DeviationKind, tree: &TreeIndex, rng: &mut R) -> Result<Deviation> {
    let random_pure = |rng: &mut R| {
        PureStrategy::from_choices_unchecked(
            tree.active_states().map(|s| rng.gen_range(0..tree.state(s).actions.len())).collect(),
        )
    };
    if tree.num_active() == 0 {
        return Ok(Deviation::Identity);
    }
    match kind {
        DeviationKind::External => Ok(Deviation::external(&random_pure(rng))),
        DeviationKind::Counterfactual => {
            let trigger = StateId(rng.gen_range(0..tree.num_active()));
            Deviation::counterfactual(tree, trigger, &random_pure(rng))
        }
        DeviationKind::Swap | DeviationKind::Internal => {
            let xs = Arc::new(enumerate_pure_strategies(tree, DEFAULT_PURE_BUDGET)?);
            let n = xs.len();
            let table = if kind == DeviationKind::Swap {
                (0..n).map(|_| rng.gen_range(0..n)).collect()
            } else {
                let mut t: Vec<usize> = (0..n).collect();
                t[rng.gen_range(0..n)] = rng.gen_range(0..n);
                t
            };
            Deviation::swap(xs, table)
        }
    }
}

/// Behavioral pushforward when it exists, otherwise `None`.
pub fn pushforward_behavioral(phi: &Deviation, pi: &BehavioralStrategy) -> Option<BehavioralStrategy> {
    match phi {
        Deviation::Identity => Some(pi.clone()),
        Deviation::Local { forced } => {
            let mut out = pi.clone();
            for (s, f) in forced.iter().enumerate() {
                if let Some(a) = f {
                    out.force(StateId(s), *a);
                }
            }
            Some(out)
        }
        Deviation::Swap { .. } => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::gadget::{gadget_perfect_recall, gadget_theorem1};
    use crate::tree::{build_tree_index, TreeConfig};

    fn forgetful() -> TreeIndex {
        let (env, agent) = gadget_theorem1();
        build_tree_index(&env, &agent, &TreeConfig::default()).unwrap()
    }

    #[test]
    fn enumeration_is_lexicographic() {
        let tree = forgetful();
        let xs: Vec<Vec<usize>> =
            enumerate_pure_strategies(&tree, 16).unwrap().iter().map(|x| x.choices().to_vec()).collect();
        assert_eq!(xs, vec![vec![0, 0], vec![0, 1], vec![1, 0], vec![1, 1]]);
        assert!(matches!(enumerate_pure_strategies(&tree, 3), Err(PohpError::Resource(_))));
    }

    #[test]
    fn truncation_keeps_predecessors() {
        let tree = forgetful();
        let phi = Deviation::external(&PureStrategy::constant(&tree, 1));
        let before = truncate(&phi, StateId(1), TruncMode::Before, &tree).unwrap();
        assert_eq!(before, Deviation::Local { forced: vec![Some(1), None] });
        let through = truncate(&phi, StateId(1), TruncMode::Through, &tree).unwrap();
        assert_eq!(through, phi);
        assert!(truncate(&phi, StateId(0), TruncMode::Before, &tree).unwrap().is_identity());
    }

    #[test]
    fn external_pushforward_is_the_point_mass() {
        let tree = forgetful();
        let x = PureStrategy::new(&tree, vec![1, 0]).unwrap();
        let pi = MixedStrategy::Behavioral(BehavioralStrategy::uniform(&tree));
        match pushforward(&Deviation::external(&x), &pi, &tree).unwrap() {
            MixedStrategy::Behavioral(b) => assert_eq!(b.pure_prob(&x), 1.0),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn swap_pushforward_moves_mass() {
        let tree = forgetful();
        let xs = Arc::new(enumerate_pure_strategies(&tree, 16).unwrap());
        let phi = Deviation::swap(xs, vec![3, 3, 2, 0]).unwrap();
        let pi = MixedStrategy::Behavioral(BehavioralStrategy::uniform(&tree));
        assert_eq!(pushforward(&phi, &pi, &tree).unwrap(), MixedStrategy::Enumerated(vec![0.25, 0.0, 0.25, 0.5]));
        assert!(Deviation::swap(Arc::new(Vec::new()), vec![1]).is_err());
    }

    #[test]
    fn counterfactual_deviations_need_recall() {
        let tree = forgetful();
        let x = PureStrategy::constant(&tree, 0);
        assert!(matches!(Deviation::counterfactual(&tree, StateId(1), &x), Err(PohpError::Contract(_))));
        let (env, agent) = gadget_perfect_recall();
        let tree = build_tree_index(&env, &agent, &TreeConfig::default()).unwrap();
        // One trigger at the root with 8 continuations, one per second-decision state with 2.
        assert_eq!(deviation_set(DeviationKind::Counterfactual, &tree).unwrap().len(), 12);
        assert_eq!(deviation_set(DeviationKind::External, &forgetful()).unwrap().len(), 4);
        assert_eq!(deviation_set(DeviationKind::Swap, &forgetful()).unwrap().len(), 256);
        assert_eq!(deviation_set(DeviationKind::Internal, &forgetful()).unwrap().len(), 12);
    }

    #[test]
    fn deviation_kinds_parse() {
        assert_eq!("swap".parse::<DeviationKind>().unwrap(), DeviationKind::Swap);
        assert!("blind".parse::<DeviationKind>().is_err());
    }
}
