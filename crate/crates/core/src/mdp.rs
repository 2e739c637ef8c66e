//! Explicit-state Markov decision processes.
//!
//! States and actions are dense indices. Display names live in side tables so
//! that MILP variable names and lookups stay stable.

use std::collections::{BTreeMap, BTreeSet, VecDeque};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the sum of every transition distribution.
pub const PROB_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Action {
    pub name: String,
    /// Successor distribution as `(state, probability)` pairs.
    pub transitions: Vec<(usize, f64)>,
}

/// Per-(state, action) rewards for one objective.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RewardStructure {
    pub name: String,
    /// `values[s][a]` is the reward for taking action `a` in state `s`.
    pub values: Vec<Vec<f64>>,
}

impl RewardStructure {
    #[inline]
    pub fn get(&self, state: usize, action: usize) -> f64 {
        self.values
            .get(state)
            .and_then(|row| row.get(action))
            .copied()
            .unwrap_or(0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MdpModel {
    state_names: Vec<String>,
    initial: usize,
    actions: Vec<Vec<Action>>,
    end: Vec<bool>,
    rewards: Vec<RewardStructure>,
    labels: Vec<Option<String>>,
}

impl MdpModel {
    /// Creates a model with `num_states` states and no actions.
    pub fn new(num_states: usize, initial: usize) -> Result<Self> {
        if initial >= num_states {
            return Err(Error::StateOutOfRange(initial));
        }
        Ok(MdpModel {
            state_names: (0..num_states).map(|s| format!("s{s}")).collect(),
            initial,
            actions: vec![Vec::new(); num_states],
            end: vec![false; num_states],
            rewards: Vec::new(),
            labels: vec![None; num_states],
        })
    }

    pub fn num_states(&self) -> usize {
        self.actions.len()
    }

    pub fn initial(&self) -> usize {
        self.initial
    }

    pub fn state_name(&self, state: usize) -> &str {
        &self.state_names[state]
    }

    pub fn set_state_name(&mut self, state: usize, name: impl Into<String>) -> Result<()> {
        self.check_state(state)?;
        self.state_names[state] = name.into();
        Ok(())
    }

    pub fn state_index(&self, name: &str) -> Option<usize> {
        self.state_names.iter().position(|n| n == name)
    }

    pub fn label(&self, state: usize) -> Option<&str> {
        self.labels.get(state).and_then(|l| l.as_deref())
    }

    pub fn set_label(&mut self, state: usize, label: impl Into<String>) -> Result<()> {
        self.check_state(state)?;
        self.labels[state] = Some(label.into());
        Ok(())
    }

    pub fn actions(&self, state: usize) -> &[Action] {
        &self.actions[state]
    }

    pub fn num_actions(&self, state: usize) -> usize {
        self.actions[state].len()
    }

    /// Total number of state-action pairs, `Σ_s |α(s)|`.
    pub fn num_choices(&self) -> usize {
        self.actions.iter().map(Vec::len).sum()
    }

    pub fn transitions(&self, state: usize, action: usize) -> &[(usize, f64)] {
        &self.actions[state][action].transitions
    }

    pub fn is_end(&self, state: usize) -> bool {
        self.end[state]
    }

    pub fn end_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(move |&s| self.end[s])
    }

    pub fn non_end_states(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.num_states()).filter(move |&s| !self.end[s])
    }

    pub fn set_end(&mut self, state: usize, end: bool) -> Result<()> {
        self.check_state(state)?;
        self.end[state] = end;
        Ok(())
    }

    /// Appends an action to `state`, returning its index. Every existing
    /// reward structure gets a zero entry for it.
    pub fn add_action(
        &mut self,
        state: usize,
        name: impl Into<String>,
        transitions: Vec<(usize, f64)>,
    ) -> Result<usize> {
        self.check_state(state)?;
        if let Some(&(t, _)) = transitions.iter().find(|(t, _)| *t >= self.num_states()) {
            return Err(Error::StateOutOfRange(t));
        }
        self.actions[state].push(Action {
            name: name.into(),
            transitions,
        });
        for r in &mut self.rewards {
            r.values[state].push(0.0);
        }
        Ok(self.actions[state].len() - 1)
    }

    pub fn action_index(&self, state: usize, name: &str) -> Option<usize> {
        self.actions
            .get(state)?
            .iter()
            .position(|a| a.name == name)
    }

    /// Registers a reward structure initialised to zero and returns its index.
    pub fn add_reward(&mut self, name: impl Into<String>) -> usize {
        let values = self.actions.iter().map(|acts| vec![0.0; acts.len()]).collect();
        self.rewards.push(RewardStructure {
            name: name.into(),
            values,
        });
        self.rewards.len() - 1
    }

    pub fn set_reward(&mut self, reward: usize, state: usize, action: usize, value: f64) -> Result<()> {
        self.check_action(state, action)?;
        let r = self
            .rewards
            .get_mut(reward)
            .ok_or_else(|| Error::UnknownReward(format!("#{reward}")))?;
        r.values[state][action] = value;
        Ok(())
    }

    pub fn rewards(&self) -> &[RewardStructure] {
        &self.rewards
    }

    pub fn reward(&self, index: usize) -> &RewardStructure {
        &self.rewards[index]
    }

    pub fn reward_index(&self, name: &str) -> Option<usize> {
        self.rewards.iter().position(|r| r.name == name)
    }

    fn check_state(&self, state: usize) -> Result<()> {
        if state < self.num_states() {
            Ok(())
        } else {
            Err(Error::StateOutOfRange(state))
        }
    }

    fn check_action(&self, state: usize, action: usize) -> Result<()> {
        self.check_state(state)?;
        if action < self.actions[state].len() {
            Ok(())
        } else {
            Err(Error::ActionOutOfRange { state, action })
        }
    }
}

/// A deterministic memoryless strategy. `None` on end states.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Strategy {
    pub choice: Vec<Option<usize>>,
}

impl Strategy {
    pub fn new(choice: Vec<Option<usize>>) -> Self {
        Strategy { choice }
    }

    /// Picks the same action index in every non-end state.
    pub fn uniform(model: &MdpModel, action: usize) -> Self {
        Strategy {
            choice: (0..model.num_states())
                .map(|s| (!model.is_end(s)).then_some(action))
                .collect(),
        }
    }

    pub fn action(&self, state: usize) -> Option<usize> {
        self.choice.get(state).copied().flatten()
    }

    pub fn check(&self, model: &MdpModel) -> Result<()> {
        if self.choice.len() != model.num_states() {
            return Err(Error::DimensionMismatch {
                expected: model.num_states(),
                got: self.choice.len(),
            });
        }
        for s in model.non_end_states() {
            match self.choice[s] {
                Some(a) if a < model.num_actions(s) => {}
                Some(a) => return Err(Error::ActionOutOfRange { state: s, action: a }),
                None => return Err(Error::InvalidModel(format!("strategy undefined at state {s}"))),
            }
        }
        Ok(())
    }

    /// Does this strategy comply with `theta` on the states it reaches?
    pub fn complies_with(&self, model: &MdpModel, theta: &MultiStrategy) -> bool {
        let single = MultiStrategy::from_strategy(model, self);
        reachable_mask(model, &single)
            .iter()
            .enumerate()
            .filter(|&(s, &r)| r && !model.is_end(s))
            .all(|(s, _)| self.action(s).is_some_and(|a| theta.allows(s, a)))
    }
}

/// Per-state sets of allowed actions.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiStrategy {
    pub allowed: Vec<BTreeSet<usize>>,
}

impl MultiStrategy {
    pub fn empty(num_states: usize) -> Self {
        MultiStrategy {
            allowed: vec![BTreeSet::new(); num_states],
        }
    }

    /// Allows every enabled action everywhere.
    pub fn full(model: &MdpModel) -> Self {
        MultiStrategy {
            allowed: (0..model.num_states())
                .map(|s| (0..model.num_actions(s)).collect())
                .collect(),
        }
    }

    pub fn from_strategy(model: &MdpModel, sigma: &Strategy) -> Self {
        MultiStrategy {
            allowed: (0..model.num_states())
                .map(|s| sigma.action(s).into_iter().collect())
                .collect(),
        }
    }

    pub fn allowed(&self, state: usize) -> &BTreeSet<usize> {
        &self.allowed[state]
    }

    pub fn allows(&self, state: usize, action: usize) -> bool {
        self.allowed[state].contains(&action)
    }

    pub fn set(&mut self, state: usize, actions: impl IntoIterator<Item = usize>) {
        self.allowed[state] = actions.into_iter().collect();
    }

    /// Pointwise inclusion `self ⊆ other`.
    pub fn is_subset(&self, other: &MultiStrategy) -> bool {
        self.allowed.len() == other.allowed.len()
            && self
                .allowed
                .iter()
                .zip(&other.allowed)
                .all(|(a, b)| a.is_subset(b))
    }

    /// Reachable non-end states that have no allowed action.
    pub fn blocked_states(&self, model: &MdpModel) -> Vec<usize> {
        reachable_mask(model, self)
            .iter()
            .enumerate()
            .filter(|&(s, &r)| r && !model.is_end(s) && self.allowed[s].is_empty())
            .map(|(s, _)| s)
            .collect()
    }

    /// Checks `allowed(s) ⊆ α(s)` and that no reachable state is blocked.
    pub fn check(&self, model: &MdpModel) -> Result<()> {
        if self.allowed.len() != model.num_states() {
            return Err(Error::DimensionMismatch {
                expected: model.num_states(),
                got: self.allowed.len(),
            });
        }
        for (s, set) in self.allowed.iter().enumerate() {
            if let Some(&a) = set.iter().find(|&&a| a >= model.num_actions(s)) {
                return Err(Error::ActionOutOfRange { state: s, action: a });
            }
        }
        match self.blocked_states(model).first() {
            Some(&s) => Err(Error::BlockedState(s)),
            None => Ok(()),
        }
    }

    /// Empties the allowed sets of every state not reachable from the
    /// initial state.
    pub fn pruned(&self, model: &MdpModel) -> MultiStrategy {
        let reach = reachable_mask(model, self);
        MultiStrategy {
            allowed: self
                .allowed
                .iter()
                .zip(reach)
                .map(|(set, r)| if r { set.clone() } else { BTreeSet::new() })
                .collect(),
        }
    }

    /// Number of reachable states with at least two allowed actions.
    pub fn permissive_state_count(&self, model: &MdpModel) -> usize {
        reachable_mask(model, self)
            .iter()
            .enumerate()
            .filter(|&(s, &r)| r && self.allowed[s].len() >= 2)
            .count()
    }

    /// `{state: [actions]}` keyed by state index, reachable states only
    /// when `model` is given.
    pub fn to_map(&self) -> BTreeMap<usize, Vec<usize>> {
        self.allowed
            .iter()
            .enumerate()
            .filter(|(_, set)| !set.is_empty())
            .map(|(s, set)| (s, set.iter().copied().collect()))
            .collect()
    }
}

/// Incoming transitions `ρ(s) = {(t, a) | δ(t,a)(s) > 0, t ≠ s}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IncomingIndex {
    incoming: Vec<Vec<(usize, usize)>>,
}

impl IncomingIndex {
    pub fn get(&self, state: usize) -> &[(usize, usize)] {
        &self.incoming[state]
    }

    pub fn len(&self) -> usize {
        self.incoming.len()
    }

    pub fn is_empty(&self) -> bool {
        self.incoming.is_empty()
    }
}

pub fn incoming_index(model: &MdpModel) -> IncomingIndex {
    let mut incoming = vec![Vec::new(); model.num_states()];
    for t in 0..model.num_states() {
        for (a, act) in model.actions(t).iter().enumerate() {
            let mut seen = BTreeSet::new();
            for &(s, p) in &act.transitions {
                if p > 0.0 && s != t && seen.insert(s) {
                    incoming[s].push((t, a));
                }
            }
        }
    }
    IncomingIndex { incoming }
}

/// States reachable from the initial state using only allowed actions.
pub fn reachable_states(model: &MdpModel, theta: &MultiStrategy) -> BTreeSet<usize> {
    reachable_mask(model, theta)
        .into_iter()
        .enumerate()
        .filter_map(|(s, r)| r.then_some(s))
        .collect()
}

pub(crate) fn reachable_mask(model: &MdpModel, theta: &MultiStrategy) -> Vec<bool> {
    let mut seen = vec![false; model.num_states()];
    let mut queue = VecDeque::from([model.initial()]);
    seen[model.initial()] = true;
    while let Some(s) = queue.pop_front() {
        for &a in theta.allowed.get(s).into_iter().flatten() {
            if a >= model.num_actions(s) {
                continue;
            }
            for &(t, p) in model.transitions(s, a) {
                if p > 0.0 && !seen[t] {
                    seen[t] = true;
                    queue.push_back(t);
                }
            }
        }
    }
    seen
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    DistributionSum,
    NegativeProbability,
    EmptyDistribution,
    NoActions,
    EndStateHasActions,
    EndStateReward,
    RewardShape,
    NonFiniteReward,
    NotAlmostSurelyEnding,
    NoEndStates,
}

impl fmt::Display for ViolationKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ViolationKind::DistributionSum => "distribution sum",
            ViolationKind::NegativeProbability => "negative probability",
            ViolationKind::EmptyDistribution => "empty distribution",
            ViolationKind::NoActions => "non-end state without actions",
            ViolationKind::EndStateHasActions => "end state has outgoing transitions",
            ViolationKind::EndStateReward => "nonzero end-state reward",
            ViolationKind::RewardShape => "reward structure shape",
            ViolationKind::NonFiniteReward => "non-finite reward",
            ViolationKind::NotAlmostSurelyEnding => "end states not almost-surely reached",
            ViolationKind::NoEndStates => "no end states",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    pub state: Option<usize>,
    pub action: Option<usize>,
    pub detail: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.kind)?;
        match (self.state, self.action) {
            (Some(s), Some(a)) => write!(f, " at (state {s}, action {a})")?,
            (Some(s), None) => write!(f, " at state {s}")?,
            _ => {}
        }
        if !self.detail.is_empty() {
            write!(f, ": {}", self.detail)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn has(&self, kind: ViolationKind) -> bool {
        self.violations.iter().any(|v| v.kind == kind)
    }

    fn push(&mut self, kind: ViolationKind, state: Option<usize>, action: Option<usize>, detail: String) {
        self.violations.push(Violation {
            kind,
            state,
            action,
            detail,
        });
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let msg = self
                .violations
                .iter()
                .map(ToString::to_string)
                .collect::<Vec<_>>()
                .join("; ");
            Err(Error::InvalidModel(msg))
        }
    }
}

/// Checks every structural invariant of `model` and reports all violations.
pub fn validate_model(model: &MdpModel) -> ValidationReport {
    use ViolationKind::*;
    let mut report = ValidationReport::default();
    let n = model.num_states();

    if model.end_states().next().is_none() {
        report.push(NoEndStates, None, None, String::new());
    }
    for s in 0..n {
        let acts = model.actions(s);
        if model.is_end(s) {
            if !acts.is_empty() {
                report.push(EndStateHasActions, Some(s), None, format!("{} actions", acts.len()));
            }
        } else if acts.is_empty() {
            report.push(NoActions, Some(s), None, String::new());
        }
        for (a, act) in acts.iter().enumerate() {
            if act.transitions.is_empty() {
                report.push(EmptyDistribution, Some(s), Some(a), String::new());
                continue;
            }
            if let Some(&(t, p)) = act.transitions.iter().find(|(_, p)| *p < 0.0 || !p.is_finite()) {
                report.push(NegativeProbability, Some(s), Some(a), format!("δ(.)({t}) = {p}"));
            }
            let sum: f64 = act.transitions.iter().map(|(_, p)| p).sum();
            if (sum - 1.0).abs() > PROB_TOL {
                report.push(DistributionSum, Some(s), Some(a), format!("sums to {sum}"));
            }
        }
    }
    for (ri, r) in model.rewards().iter().enumerate() {
        if r.values.len() != n || (0..n).any(|s| r.values[s].len() != model.num_actions(s)) {
            report.push(RewardShape, None, None, format!("reward #{ri} `{}`", r.name));
            continue;
        }
        for s in 0..n {
            for (a, &v) in r.values[s].iter().enumerate() {
                if !v.is_finite() {
                    report.push(NonFiniteReward, Some(s), Some(a), format!("reward `{}`", r.name));
                } else if model.is_end(s) && v != 0.0 {
                    report.push(EndStateReward, Some(s), Some(a), format!("reward `{}`", r.name));
                }
            }
        }
    }
    for s in trapping_states(model) {
        report.push(NotAlmostSurelyEnding, Some(s), None, "some strategy avoids end states forever from here".into());
    }
    report
}

/// Non-end states from which some strategy can avoid the end states forever.
///
/// Repeatedly discards actions that can leave the candidate set and states
/// left without actions. Every survivor has an action that keeps the play
/// inside the surviving set. An empty result means every strategy reaches an end
/// state almost surely from every state.
pub fn trapping_states(model: &MdpModel) -> Vec<usize> {
    let n = model.num_states();
    let mut inside: Vec<bool> = (0..n).map(|s| !model.is_end(s)).collect();
    loop {
        let mut changed = false;
        for s in 0..n {
            if !inside[s] {
                continue;
            }
            let stays = model.actions(s).iter().any(|act| {
                act.transitions
                    .iter()
                    .all(|&(t, p)| p <= 0.0 || (t < n && inside[t]))
            });
            if !stays {
                inside[s] = false;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
    // States with no actions at all are reported separately.
    (0..n)
        .filter(|&s| inside[s] && model.num_actions(s) > 0)
        .collect()
}
