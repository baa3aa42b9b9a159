//! Immediate-regret minimization by time-selection regret matching, the
//! repeated-play driver, and the forgetting-gadget experiment.

use std::collections::HashMap;

use crate::deviations::{deviation_set, enumerate_pure_strategies, truncate, Deviation, DeviationKind, TruncMode, MAX_SWAP_STRATEGIES};
use crate::error::{PohpError, Result};
use crate::games::form::PohpFormGame;
use crate::games::gadget::gadget_theorem1;
use crate::oracle;
use crate::reach::own_reach;
use crate::strategy::{BehavioralStrategy, DaimonStrategy, MixedStrategy, PureStrategy};
use crate::tree::{build_tree_index, StateId, TreeConfig, TreeIndex};
use crate::values::{evaluate, immediate_regret};

/// What to play at a state whose positive regrets are all zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TieBreak {
    #[default]
    Uniform,
    FirstAction,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Averaging {
    /// `Σ_t ℙ_{π^t}[s] π^t(·|s) / Σ_t ℙ_{π^t}[s]`.
    #[default]
    ReachWeighted,
    /// `Σ_t π^t(·|s) / T`.
    Unweighted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LearnerConfig {
    pub kind: DeviationKind,
    pub tie_break: TieBreak,
    /// Largest accepted number of rounds.
    pub iteration_cap: usize,
    pub averaging: Averaging,
    /// Recorded for reproducibility; exact full-feedback updates draw no randomness.
    pub seed: u64,
    /// Accumulate oracle full regrets every round.
    pub track_full_regret: bool,
}

impl Default for LearnerConfig {
    fn default() -> Self {
        LearnerConfig {
            kind: DeviationKind::Counterfactual,
            tie_break: TieBreak::Uniform,
            iteration_cap: 1_000_000,
            averaging: Averaging::ReachWeighted,
            seed: 0,
            track_full_regret: true,
        }
    }
}

/// One tracked deviation at a state: the action it forces there and the
/// ancestors where it keeps the agent's own choice.
#[derive(Debug, Clone, PartialEq)]
pub struct LedgerEntry {
    pub action: usize,
    /// `(t, a)` pairs on the path into `s` where the deviation defers to π; the
    /// time-selection weight is `Π π(a|t)` over them.
    pub keep: Vec<(StateId, usize)>,
    pub regret: f64,
}

#[derive(Debug, Clone, PartialEq)]
enum Slot {
    Local(Vec<LedgerEntry>),
    /// `R[a][b]`: cumulative gain of playing `b` whenever `a` was played.
    Swap(Vec<Vec<f64>>),
}

/// Cumulative weighted immediate regrets, per active state.
#[derive(Debug, Clone, PartialEq)]
pub struct RegretLedger {
    kind: DeviationKind,
    slots: Vec<Slot>,
    rounds: usize,
}

impl RegretLedger {
    /// External and counterfactual sets collapse to one entry per action with no
    /// kept ancestors, which is counterfactual regret matching. Swap and internal
    /// sets track per-state action swaps.
    pub fn new(tree: &TreeIndex, kind: DeviationKind) -> Result<Self> {
        tree.require_perfect_recall()?;
        let slots = tree
            .active_states()
            .map(|s| {
                let k = tree.state(s).actions.len();
                match kind {
                    DeviationKind::External | DeviationKind::Counterfactual => Slot::Local(
                        (0..k).map(|action| LedgerEntry { action, keep: Vec::new(), regret: 0.0 }).collect(),
                    ),
                    DeviationKind::Swap | DeviationKind::Internal => Slot::Swap(vec![vec![0.0; k]; k]),
                }
            })
            .collect();
        Ok(RegretLedger { kind, slots, rounds: 0 })
    }

    /// A ledger over explicit local deviations, one entry per distinct signature.
    pub fn from_deviations(tree: &TreeIndex, deviations: &[Deviation]) -> Result<Self> {
        tree.require_perfect_recall()?;
        let mut slots: Vec<Slot> = tree.active_states().map(|_| Slot::Local(Vec::new())).collect();
        for phi in deviations {
            match phi {
                Deviation::Identity => {}
                Deviation::Local { .. } => {
                    for s in tree.active_states() {
                        if let Some((action, keep)) = signature(tree, phi, s) {
                            let Slot::Local(entries) = &mut slots[s.0] else { unreachable!() };
                            if !entries.iter().any(|e| e.action == action && e.keep == keep) {
                                entries.push(LedgerEntry { action, keep, regret: 0.0 });
                            }
                        }
                    }
                }
                Deviation::Swap { .. } => {
                    return Err(PohpError::Contract("explicit ledgers take local deviations only".into()))
                }
            }
        }
        Ok(RegretLedger { kind: DeviationKind::External, slots, rounds: 0 })
    }

    pub fn kind(&self) -> DeviationKind {
        self.kind
    }

    pub fn rounds(&self) -> usize {
        self.rounds
    }

    /// Local entries at `s`; empty for swap ledgers.
    pub fn entries(&self, s: StateId) -> &[LedgerEntry] {
        match &self.slots[s.0] {
            Slot::Local(e) => e,
            Slot::Swap(_) => &[],
        }
    }

    /// Regrets of the per-action entries (no kept ancestors) at `s`.
    pub fn action_regrets(&self, tree: &TreeIndex, s: StateId) -> Vec<f64> {
        let mut out = vec![0.0; tree.state(s).actions.len()];
        for e in self.entries(s).iter().filter(|e| e.keep.is_empty()) {
            out[e.action] += e.regret;
        }
        out
    }

    /// Overwrite the per-action entries at `s`, creating them if needed.
    pub fn set_action_regrets(&mut self, s: StateId, regrets: &[f64]) -> Result<()> {
        let Slot::Local(entries) = &mut self.slots[s.0] else {
            return Err(PohpError::Contract("swap ledgers have no per-action entries".into()));
        };
        for (action, &r) in regrets.iter().enumerate() {
            match entries.iter_mut().find(|e| e.action == action && e.keep.is_empty()) {
                Some(e) => e.regret = r,
                None => entries.push(LedgerEntry { action, keep: Vec::new(), regret: r }),
            }
        }
        Ok(())
    }

    /// `R[a][b]` at `s` for swap ledgers.
    pub fn swap_regrets(&self, s: StateId) -> Option<&[Vec<f64>]> {
        match &self.slots[s.0] {
            Slot::Swap(m) => Some(m),
            Slot::Local(_) => None,
        }
    }

    /// Cumulative immediate regret of `phi` at `s`, if the ledger tracks its signature.
    pub fn regret_of(&self, tree: &TreeIndex, phi: &Deviation, s: StateId) -> Option<f64> {
        match signature(tree, phi, s) {
            Some((action, keep)) => {
                self.entries(s).iter().find(|e| e.action == action && e.keep == keep).map(|e| e.regret)
            }
            None => Some(0.0).filter(|_| matches!(self.slots[s.0], Slot::Local(_))),
        }
    }

    /// Max over tracked deviations of cumulative immediate regret at `s`; the
    /// identity is always tracked, so this is never negative.
    pub fn max_cum_immediate(&self, s: StateId) -> f64 {
        match &self.slots[s.0] {
            Slot::Local(e) => e.iter().map(|e| e.regret).fold(0.0, f64::max),
            Slot::Swap(m) => m.iter().map(|row| row.iter().copied().fold(0.0, f64::max)).sum(),
        }
    }

    /// The next strategy: at each state, proportional to the reach-weighted
    /// positive regrets of the entries, or the tie-break when they all vanish.
    pub fn current_strategy(&self, tree: &TreeIndex, tie: TieBreak) -> BehavioralStrategy {
        let mut pi = BehavioralStrategy::uniform(tree);
        let mut order: Vec<StateId> = tree.active_states().collect();
        order.sort_by_key(|s| tree.state(*s).agent_steps);
        for s in order {
            let k = tree.state(s).actions.len();
            let row = match &self.slots[s.0] {
                Slot::Local(entries) => {
                    let mut mass = vec![0.0; k];
                    for e in entries {
                        let w: f64 = e.keep.iter().map(|&(t, a)| pi.prob(t, a)).product();
                        mass[e.action] += w * e.regret.max(0.0);
                    }
                    normalize_or(mass, tie)
                }
                Slot::Swap(m) => stationary(m).unwrap_or_else(|| fallback(k, tie)),
            };
            pi.set(s, row);
        }
        pi
    }

    /// Add one round of full-feedback regrets for `π^t` against `σ^t`.
    pub fn observe_round(&mut self, tree: &TreeIndex, pi: &BehavioralStrategy, sigma: &DaimonStrategy) -> Result<()> {
        tree.require_perfect_recall()?;
        let ev = evaluate(tree, pi, sigma);
        for s in tree.active_states() {
            let q = ev.action_values(tree, sigma, s);
            match &mut self.slots[s.0] {
                Slot::Local(entries) => {
                    let v = ev.cf_value(tree, s);
                    for e in entries.iter_mut() {
                        let w: f64 = e.keep.iter().map(|&(t, a)| pi.prob(t, a)).product();
                        e.regret += w * (q[e.action] - v);
                    }
                }
                Slot::Swap(m) => {
                    let row = pi.probs(s);
                    for (a, ra) in m.iter_mut().enumerate() {
                        for (b, r) in ra.iter_mut().enumerate() {
                            *r += row[a] * (q[b] - q[a]);
                        }
                    }
                }
            }
        }
        self.rounds += 1;
        Ok(())
    }
}

/// `(forced action at s, kept ancestors)`, or `None` when the deviation cannot
/// change play at `s`: no forced action there, or a forced ancestor that leads away.
fn signature(tree: &TreeIndex, phi: &Deviation, s: StateId) -> Option<(usize, Vec<(StateId, usize)>)> {
    let Deviation::Local { forced } = phi else { return None };
    let action = forced[s.0]?;
    let mut keep = Vec::new();
    for &(t, a) in tree.state_path(s) {
        match forced[t.0] {
            None => keep.push((t, a)),
            Some(b) if b == a => {}
            Some(_) => return None,
        }
    }
    Some((action, keep))
}

fn fallback(k: usize, tie: TieBreak) -> Vec<f64> {
    match tie {
        TieBreak::Uniform => vec![1.0 / k as f64; k],
        TieBreak::FirstAction => {
            let mut row = vec![0.0; k];
            row[0] = 1.0;
            row
        }
    }
}

fn normalize_or(mass: Vec<f64>, tie: TieBreak) -> Vec<f64> {
    let total: f64 = mass.iter().sum();
    if total > 0.0 {
        mass.into_iter().map(|m| m / total).collect()
    } else {
        fallback(mass.len(), tie)
    }
}

/// Stationary distribution of the chain `a → b` with rates `R⁺[a][b]`, or `None`
/// when no swap has positive regret.
fn stationary(m: &[Vec<f64>]) -> Option<Vec<f64>> {
    let k = m.len();
    let pos = |a: usize, b: usize| if a == b { 0.0 } else { m[a][b].max(0.0) };
    let z = (0..k).map(|a| (0..k).map(|b| pos(a, b)).sum::<f64>()).fold(0.0, f64::max);
    if z <= 0.0 {
        return None;
    }
    // Rows of (Mᵀ − I) with the last equation replaced by Σ p = 1.
    let mut a = vec![vec![0.0; k + 1]; k];
    for i in 0..k {
        for j in 0..k {
            let mji = if i == j { 1.0 - (0..k).map(|b| pos(j, b)).sum::<f64>() / z } else { pos(j, i) / z };
            a[i][j] = mji - if i == j { 1.0 } else { 0.0 };
        }
    }
    a[k - 1] = vec![1.0; k + 1];
    if let Some(p) = solve(a) {
        if p.iter().all(|x| *x > -1e-12) {
            let p: Vec<f64> = p.into_iter().map(|x| x.max(0.0)).collect();
            let total: f64 = p.iter().sum();
            return Some(p.into_iter().map(|x| x / total).collect());
        }
    }
    // Reducible chain: iterate the lazy chain from uniform.
    let mut p = vec![1.0 / k as f64; k];
    for _ in 0..100_000 {
        let mut next = vec![0.0; k];
        for i in 0..k {
            let stay = 1.0 - (0..k).map(|b| pos(i, b)).sum::<f64>() / z;
            next[i] += p[i] * (1.0 + stay) / 2.0;
            for j in 0..k {
                next[j] += p[i] * pos(i, j) / z / 2.0;
            }
        }
        let delta: f64 = next.iter().zip(&p).map(|(x, y)| (x - y).abs()).sum();
        p = next;
        if delta < 1e-15 {
            break;
        }
    }
    Some(p)
}

/// Gaussian elimination with partial pivoting on an augmented matrix.
fn solve(mut a: Vec<Vec<f64>>) -> Option<Vec<f64>> {
    let n = a.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[piv][col].abs() < 1e-13 {
            return None;
        }
        a.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = a[r][col] / a[col][col];
                if f != 0.0 {
                    for c in col..=n {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
    }
    Some((0..n).map(|i| a[i][n] / a[i][i]).collect())
}

/// Running average of behavioral strategies.
#[derive(Debug, Clone)]
pub struct StrategyAverager {
    mode: Averaging,
    num: Vec<Vec<f64>>,
    den: Vec<f64>,
}

impl StrategyAverager {
    pub fn new(tree: &TreeIndex, mode: Averaging) -> Self {
        StrategyAverager {
            mode,
            num: tree.active_states().map(|s| vec![0.0; tree.state(s).actions.len()]).collect(),
            den: vec![0.0; tree.num_active()],
        }
    }

    pub fn add(&mut self, tree: &TreeIndex, pi: &BehavioralStrategy) {
        for s in tree.active_states() {
            let w = match self.mode {
                Averaging::ReachWeighted => own_reach(tree, pi, s),
                Averaging::Unweighted => 1.0,
            };
            self.den[s.0] += w;
            for (n, p) in self.num[s.0].iter_mut().zip(pi.probs(s)) {
                *n += w * p;
            }
        }
    }

    /// The average; states never reached fall back to uniform.
    pub fn average(&self, tree: &TreeIndex) -> BehavioralStrategy {
        let mut out = BehavioralStrategy::uniform(tree);
        for s in tree.active_states() {
            if self.den[s.0] > 0.0 {
                out.set(s, self.num[s.0].iter().map(|n| n / self.den[s.0]).collect());
            }
        }
        out
    }
}

/// One logged curve sample.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveRow {
    pub round: usize,
    pub player: usize,
    pub state: usize,
    pub max_cum_immediate: f64,
    /// Max over tracked deviations of cumulative full regret at the state.
    pub cum_full: f64,
    pub exploitability: f64,
}

#[derive(Debug, Clone)]
pub struct SelfPlayResult {
    pub rounds: usize,
    pub rows: Vec<CurveRow>,
    pub averages: Vec<BehavioralStrategy>,
    pub ledgers: Vec<RegretLedger>,
    /// Deviations whose full regret was tracked, per player.
    pub tracked: Vec<Vec<Deviation>>,
    /// `[player][deviation][state]` cumulative full regret.
    pub cum_full: Vec<Vec<Vec<f64>>>,
    /// Largest `full − |𝒮_{s,𝒜}| · max_{s″} cumulative immediate regret` seen on any round.
    pub max_bound_gap: f64,
    pub final_exploitability: f64,
}

/// Tracked set for full-regret auditing: the learner's own family, except that
/// swap learners on strategy sets too large to enumerate are audited against
/// external deviations.
fn tracked_set(tree: &TreeIndex, kind: DeviationKind) -> Result<Vec<Deviation>> {
    match kind {
        DeviationKind::Swap | DeviationKind::Internal => {
            if enumerate_pure_strategies(tree, MAX_SWAP_STRATEGIES).is_ok() {
                deviation_set(kind, tree)
            } else {
                deviation_set(DeviationKind::External, tree)
            }
        }
        other => deviation_set(other, tree),
    }
}

/// Full regrets of every tracked deviation at every state, sharing evaluations
/// between deviations whose truncations coincide.
fn full_regret_table(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    tracked: &[Deviation],
) -> Result<Vec<Vec<f64>>> {
    let mut cache: HashMap<Vec<Option<usize>>, Vec<f64>> = HashMap::new();
    let mut values = |phi: &Deviation| -> Result<Vec<f64>> {
        match phi {
            Deviation::Identity => values_forced(tree, pi, sigma, &vec![None; tree.num_active()], &mut cache),
            Deviation::Local { forced } => values_forced(tree, pi, sigma, forced, &mut cache),
            Deviation::Swap { .. } => {
                let pushed = crate::deviations::pushforward(phi, &MixedStrategy::Behavioral(pi.clone()), tree)?;
                oracle::dfs_mixed_values(tree, &pushed, sigma)
            }
        }
    };
    let mut out = Vec::with_capacity(tracked.len());
    for phi in tracked {
        let full = values(phi)?;
        let mut row = vec![0.0; tree.num_active()];
        for s in tree.active_states() {
            let anchor = values(&truncate(phi, s, TruncMode::Before, tree)?)?;
            row[s.0] = full[s.0] - anchor[s.0];
        }
        out.push(row);
    }
    Ok(out)
}

fn values_forced(
    tree: &TreeIndex,
    pi: &BehavioralStrategy,
    sigma: &DaimonStrategy,
    forced: &[Option<usize>],
    cache: &mut HashMap<Vec<Option<usize>>, Vec<f64>>,
) -> Result<Vec<f64>> {
    if let Some(v) = cache.get(forced) {
        return Ok(v.clone());
    }
    let mut p = pi.clone();
    for (s, f) in forced.iter().enumerate() {
        if let Some(a) = f {
            p.force(StateId(s), *a);
        }
    }
    let v = oracle::dfs_state_values(tree, &p, sigma);
    cache.insert(forced.to_vec(), v.clone());
    Ok(v)
}

/// Every player runs a learner; player `i`'s daimon is the others' current strategies.
///
/// Rows are logged after rounds `stride, 2·stride, …` and after the last round.
pub fn run_self_play(form: &PohpFormGame, config: &LearnerConfig, rounds: usize, stride: usize) -> Result<SelfPlayResult> {
    if stride == 0 {
        return Err(PohpError::Validation("stride must be at least 1".into()));
    }
    if rounds > config.iteration_cap {
        return Err(PohpError::Resource(format!("{rounds} rounds exceed the iteration cap {}", config.iteration_cap)));
    }
    let n = form.players();
    let mut ledgers = (0..n).map(|i| RegretLedger::new(form.tree(i), config.kind)).collect::<Result<Vec<_>>>()?;
    let mut averagers: Vec<StrategyAverager> =
        (0..n).map(|i| StrategyAverager::new(form.tree(i), config.averaging)).collect();
    let tracked: Vec<Vec<Deviation>> = if config.track_full_regret {
        (0..n).map(|i| tracked_set(form.tree(i), config.kind)).collect::<Result<_>>()?
    } else {
        vec![Vec::new(); n]
    };
    let mut cum_full: Vec<Vec<Vec<f64>>> =
        (0..n).map(|i| vec![vec![0.0; form.tree(i).num_active()]; tracked[i].len()]).collect();
    let subtrees: Vec<Vec<Vec<StateId>>> =
        (0..n).map(|i| form.tree(i).active_states().map(|s| form.tree(i).subtree(s)).collect()).collect();
    let mut rows = Vec::new();
    let mut max_bound_gap = f64::NEG_INFINITY;

    for t in 1..=rounds {
        let profile: Vec<BehavioralStrategy> =
            (0..n).map(|i| ledgers[i].current_strategy(form.tree(i), config.tie_break)).collect();
        for i in 0..n {
            let tree = form.tree(i);
            let sigma = form.player_daimon(i, &profile)?;
            ledgers[i].observe_round(tree, &profile[i], &sigma)?;
            averagers[i].add(tree, &profile[i]);
            if !tracked[i].is_empty() {
                let table = full_regret_table(tree, &profile[i], &sigma, &tracked[i])?;
                for (acc, row) in cum_full[i].iter_mut().zip(table) {
                    acc.iter_mut().zip(row).for_each(|(a, r)| *a += r);
                }
                for s in tree.active_states() {
                    let sub = &subtrees[i][s.0];
                    let worst = sub.iter().map(|u| ledgers[i].max_cum_immediate(*u)).fold(0.0, f64::max);
                    let bound = sub.len() as f64 * worst;
                    for acc in &cum_full[i] {
                        max_bound_gap = max_bound_gap.max(acc[s.0] - bound);
                    }
                }
            }
        }
        if t % stride == 0 || t == rounds {
            let averages: Vec<BehavioralStrategy> =
                (0..n).map(|i| averagers[i].average(form.tree(i))).collect();
            let expl = oracle::exploitability(form, &averages)?;
            for i in 0..n {
                for s in form.tree(i).active_states() {
                    let full = cum_full[i].iter().map(|acc| acc[s.0]).fold(f64::NEG_INFINITY, f64::max);
                    rows.push(CurveRow {
                        round: t,
                        player: i,
                        state: s.0,
                        max_cum_immediate: ledgers[i].max_cum_immediate(s),
                        cum_full: if full.is_finite() { full } else { 0.0 },
                        exploitability: expl,
                    });
                }
            }
        }
    }
    let averages: Vec<BehavioralStrategy> = (0..n).map(|i| averagers[i].average(form.tree(i))).collect();
    let final_exploitability = oracle::exploitability(form, &averages)?;
    Ok(SelfPlayResult { rounds, rows, averages, ledgers, tracked, cum_full, max_bound_gap, final_exploitability })
}

/// The forgetting gadget played by the uniform agent against its only daimon.
#[derive(Debug, Clone)]
pub struct GadgetRegretReport {
    pub rounds: usize,
    /// Max over `{φ→1, φ→2}` of one round's immediate regret at the second decision.
    pub per_round: f64,
    /// Max over the two deviations of cumulative immediate regret at the second decision.
    pub cumulative: f64,
    /// `cumulative / rounds`, zero when no rounds are played.
    pub slope: f64,
    /// Same, at the first decision.
    pub cumulative_first: f64,
    pub rows: Vec<CurveRow>,
}

/// Exact, sampling-free computation over `rounds` identical rounds.
pub fn theorem1_experiment(rounds: usize, stride: usize) -> Result<GadgetRegretReport> {
    if stride == 0 {
        return Err(PohpError::Validation("stride must be at least 1".into()));
    }
    let (env, agent) = gadget_theorem1();
    let tree = build_tree_index(&env, &agent, &TreeConfig::default())?;
    let pi = BehavioralStrategy::uniform(&tree);
    let sigma = DaimonStrategy::uniform(&tree);
    let deviations: Vec<Deviation> =
        (0..2).map(|k| Deviation::external(&PureStrategy::constant(&tree, k))).collect();
    let mut order: Vec<StateId> = tree.active_states().collect();
    order.sort_by_key(|s| tree.state(*s).agent_steps);
    let (first, second) = (order[0], order[1]);

    let imm: Vec<Vec<f64>> = deviations
        .iter()
        .map(|phi| tree.active_states().map(|s| immediate_regret(&tree, &pi, &sigma, phi, s)).collect())
        .collect::<Result<_>>()?;
    let full: Vec<Vec<f64>> =
        deviations.iter().map(|phi| oracle::full_regrets(&tree, &pi, &sigma, phi)).collect::<Result<_>>()?;
    let expl = oracle::best_response(&tree, &sigma)?.0 - oracle::root_value(&tree, &pi, &sigma);

    let mut cum_imm = vec![vec![0.0; tree.num_active()]; deviations.len()];
    let mut cum_full = cum_imm.clone();
    let mut rows = Vec::new();
    for t in 1..=rounds {
        for d in 0..deviations.len() {
            for s in tree.active_states() {
                cum_imm[d][s.0] += imm[d][s.0];
                cum_full[d][s.0] += full[d][s.0];
            }
        }
        if t % stride == 0 || t == rounds {
            for s in tree.active_states() {
                rows.push(CurveRow {
                    round: t,
                    player: 0,
                    state: s.0,
                    max_cum_immediate: cum_imm.iter().map(|c| c[s.0]).fold(0.0, f64::max),
                    cum_full: cum_full.iter().map(|c| c[s.0]).fold(f64::NEG_INFINITY, f64::max),
                    exploitability: expl,
                });
            }
        }
    }
    let max_at = |s: StateId| cum_imm.iter().map(|c| c[s.0]).fold(0.0, f64::max);
    let cumulative = max_at(second);
    Ok(GadgetRegretReport {
        rounds,
        per_round: imm.iter().map(|r| r[second.0]).fold(f64::NEG_INFINITY, f64::max),
        cumulative,
        slope: if rounds == 0 { 0.0 } else { cumulative / rounds as f64 },
        cumulative_first: max_at(first),
        rows,
    })
}

/// For each pure gadget policy, the largest one-round immediate regret over both
/// decisions and both constant deviations.
pub fn gadget_pure_policy_regrets() -> Result<Vec<(PureStrategy, f64)>> {
    let (env, agent) = gadget_theorem1();
    let tree = build_tree_index(&env, &agent, &TreeConfig::default())?;
    let sigma = DaimonStrategy::uniform(&tree);
    let deviations: Vec<Deviation> =
        (0..2).map(|k| Deviation::external(&PureStrategy::constant(&tree, k))).collect();
    let mut out = Vec::new();
    for x in enumerate_pure_strategies(&tree, 16)? {
        let pi = BehavioralStrategy::from_pure(&tree, &x);
        let mut worst = f64::NEG_INFINITY;
        for phi in &deviations {
            for s in tree.active_states() {
                worst = worst.max(immediate_regret(&tree, &pi, &sigma, phi, s)?);
            }
        }
        out.push((x, worst));
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::games::bundled::{kuhn, matching_pennies};
    use crate::games::GameBuilder;

    fn three_actions() -> PohpFormGame {
        let mut b = GameBuilder::new(1);
        b.decision(&[], 0, "x", &["a", "b", "c"]);
        for (a, u) in [("a", 1.0), ("b", 0.0), ("c", -1.0)] {
            b.terminal(&[a], &[u]);
        }
        PohpFormGame::new(b.build().unwrap(), &TreeConfig::default()).unwrap()
    }

    #[test]
    fn positive_part_normalization() {
        let form = three_actions();
        let tree = form.tree(0);
        let mut ledger = RegretLedger::new(tree, DeviationKind::Counterfactual).unwrap();
        assert_eq!(ledger.current_strategy(tree, TieBreak::Uniform).probs(StateId(0)), &[1.0 / 3.0; 3]);
        ledger.set_action_regrets(StateId(0), &[3.0, 1.0, 0.0]).unwrap();
        assert_eq!(ledger.current_strategy(tree, TieBreak::Uniform).probs(StateId(0)), &[0.75, 0.25, 0.0]);
        ledger.set_action_regrets(StateId(0), &[-1.0, -2.0, -3.0]).unwrap();
        assert_eq!(ledger.current_strategy(tree, TieBreak::Uniform).probs(StateId(0)), &[1.0 / 3.0; 3]);
        assert_eq!(ledger.current_strategy(tree, TieBreak::FirstAction).probs(StateId(0)), &[1.0, 0.0, 0.0]);
        assert_eq!(ledger.max_cum_immediate(StateId(0)), 0.0);
    }

    #[test]
    fn nonpositive_pair_is_uniform() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let tree = form.tree(0);
        let mut ledger = RegretLedger::new(tree, DeviationKind::External).unwrap();
        ledger.set_action_regrets(StateId(0), &[-1.0, -2.0]).unwrap();
        assert_eq!(ledger.current_strategy(tree, TieBreak::Uniform).probs(StateId(0)), &[0.5, 0.5]);
    }

    #[test]
    fn pennies_tails_against_heads() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let mut profile = form.uniform_profile();
        profile[0].force(StateId(0), 1);
        profile[1].force(StateId(0), 0);
        let sigma = form.player_daimon(0, &profile).unwrap();
        let mut ledger = RegretLedger::new(form.tree(0), DeviationKind::External).unwrap();
        ledger.observe_round(form.tree(0), &profile[0], &sigma).unwrap();
        assert_eq!(ledger.action_regrets(form.tree(0), StateId(0)), vec![2.0, 0.0]);
        assert_eq!(ledger.rounds(), 1);
    }

    #[test]
    fn zero_rewards_leave_the_ledger_alone() {
        let mut b = GameBuilder::new(1);
        b.decision(&[], 0, "x", &["a", "b"]);
        b.terminal(&["a"], &[0.0]);
        b.terminal(&["b"], &[0.0]);
        let form = PohpFormGame::new(b.build().unwrap(), &TreeConfig::default()).unwrap();
        let tree = form.tree(0);
        let pi = BehavioralStrategy::uniform(tree);
        let sigma = form.player_daimon(0, std::slice::from_ref(&pi)).unwrap();
        for kind in [DeviationKind::Counterfactual, DeviationKind::Swap] {
            let mut ledger = RegretLedger::new(tree, kind).unwrap();
            let before = ledger.clone();
            ledger.observe_round(tree, &pi, &sigma).unwrap();
            assert_eq!(ledger.max_cum_immediate(StateId(0)), before.max_cum_immediate(StateId(0)));
            assert_eq!(ledger.current_strategy(tree, TieBreak::Uniform), before.current_strategy(tree, TieBreak::Uniform));
        }
    }

    #[test]
    fn swap_strategy_is_stationary() {
        let m = vec![vec![0.0, 2.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 0.0, 0.0]];
        let p = stationary(&m).unwrap();
        // p = pM with M the normalized swap chain.
        let z = 2.0;
        for j in 0..3 {
            let stay = 1.0 - m[j].iter().enumerate().filter(|(b, _)| *b != j).map(|(_, r)| r.max(0.0)).sum::<f64>() / z;
            let inflow: f64 = (0..3).filter(|&i| i != j).map(|i| p[i] * m[i][j].max(0.0) / z).sum();
            assert!((p[j] - (p[j] * stay + inflow)).abs() < 1e-12);
        }
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert!(stationary(&[vec![0.0, -1.0], vec![-2.0, 0.0]]).is_none());
    }

    #[test]
    fn no_rounds_means_uniform_and_no_rows() {
        let form = PohpFormGame::new(kuhn(), &TreeConfig::default()).unwrap();
        let result = run_self_play(&form, &LearnerConfig::default(), 0, 1).unwrap();
        assert!(result.rows.is_empty());
        assert_eq!(result.averages, form.uniform_profile());
        assert!(result.ledgers.iter().all(|l| l.rounds() == 0));
    }

    #[test]
    fn learners_reject_forgetful_seats() {
        let form = crate::games::bundled::chain_mdp3().unwrap();
        assert!(matches!(RegretLedger::new(form.tree(0), DeviationKind::Counterfactual), Err(PohpError::Contract(_))));
        let remembering = form.with_perfect_recall_players(&TreeConfig::default()).unwrap();
        assert!(RegretLedger::new(remembering.tree(0), DeviationKind::Counterfactual).is_ok());
    }

    #[test]
    fn gadget_regret_grows_by_one_per_round() {
        let one = theorem1_experiment(1, 1).unwrap();
        assert_eq!(one.per_round, 1.0);
        assert_eq!(one.cumulative, 1.0);
        let hundred = theorem1_experiment(100, 10).unwrap();
        assert!((hundred.cumulative - 100.0).abs() < 1e-9);
        assert_eq!(hundred.cumulative_first, 0.0);
        assert_eq!(hundred.rows.len(), 20);
        assert!(gadget_pure_policy_regrets().unwrap().iter().all(|(_, r)| *r >= 1.0));
    }

    #[test]
    fn caps_and_strides_are_validated() {
        let form = PohpFormGame::new(matching_pennies(), &TreeConfig::default()).unwrap();
        let config = LearnerConfig { iteration_cap: 5, ..LearnerConfig::default() };
        assert!(matches!(run_self_play(&form, &config, 6, 1), Err(PohpError::Resource(_))));
        assert!(matches!(run_self_play(&form, &config, 1, 0), Err(PohpError::Validation(_))));
    }
}
