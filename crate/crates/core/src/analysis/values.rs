use nalgebra::{DMatrix, DVector};

use super::MultiObjectiveProperty;
use crate::error::{Error, Result};
use crate::mdp::{incoming_index, MdpModel, MultiStrategy, RewardStructure, Strategy};

/// Default convergence tolerance for min/max values under a multi-strategy.
pub const LEMMA_TOL: f64 = 1e-10;

const MAX_SWEEPS: usize = 1_000_000;
const TIE_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sense {
    Min,
    Max,
}

impl Sense {
    fn better(self, a: f64, b: f64) -> bool {
        match self {
            Sense::Min => a < b,
            Sense::Max => a > b,
        }
    }
}

/// Expected total reward of `sigma` from every state, by direct linear
/// solve of `(I - P_σ) v = r_σ` over the non-end states.
pub fn strategy_values(model: &MdpModel, sigma: &Strategy, rewards: &[Vec<f64>]) -> Result<Vec<f64>> {
    sigma.check(model)?;
    let live: Vec<usize> = model.non_end_states().collect();
    let mut pos = vec![usize::MAX; model.num_states()];
    for (k, &s) in live.iter().enumerate() {
        pos[s] = k;
    }
    let k = live.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (row, &s) in live.iter().enumerate() {
        let act = sigma.action(s).expect("checked above");
        b[row] = rewards[s][act];
        for &(t, p) in model.transitions(s, act) {
            if !model.is_end(t) {
                a[(row, pos[t])] -= p;
            }
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidModel("strategy does not reach an end state almost surely".into()))?;
    let mut v = vec![0.0; model.num_states()];
    for (row, &s) in live.iter().enumerate() {
        v[s] = x[row];
    }
    Ok(v)
}

/// `E[total reward]` from the initial state under `sigma`.
pub fn evaluate_strategy(model: &MdpModel, sigma: &Strategy, reward: &RewardStructure) -> Result<f64> {
    Ok(strategy_values(model, sigma, &reward.values)?[model.initial()])
}

/// Same quantity as [`strategy_values`], by fixed-point iteration until the
/// largest change drops below `tol`.
pub fn evaluate_strategy_iterative(
    model: &MdpModel,
    sigma: &Strategy,
    rewards: &[Vec<f64>],
    tol: f64,
) -> Result<Vec<f64>> {
    sigma.check(model)?;
    let mut v = vec![0.0; model.num_states()];
    for _ in 0..MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        let next: Vec<f64> = (0..model.num_states())
            .map(|s| match sigma.action(s) {
                Some(a) if !model.is_end(s) => q_value(model, rewards, &v, s, a),
                _ => 0.0,
            })
            .collect();
        for (old, new) in v.iter().zip(&next) {
            delta = delta.max((old - new).abs());
        }
        v = next;
        if delta < tol {
            return Ok(v);
        }
    }
    Err(Error::InvalidModel("strategy evaluation did not converge".into()))
}

#[inline]
pub(crate) fn q_value(model: &MdpModel, rewards: &[Vec<f64>], v: &[f64], s: usize, a: usize) -> f64 {
    rewards[s][a]
        + model
            .transitions(s, a)
            .iter()
            .map(|&(t, p)| p * v[t])
            .sum::<f64>()
}

/// Result of an optimal-value computation.
#[derive(Debug, Clone)]
pub(crate) struct Optimum {
    pub values: Vec<f64>,
    pub strategy: Strategy,
    /// States where several actions attain the optimum.
    pub ties: Vec<usize>,
}

fn allowed_actions<'a>(
    model: &'a MdpModel,
    allowed: Option<&'a MultiStrategy>,
    s: usize,
) -> Box<dyn Iterator<Item = usize> + 'a> {
    match allowed {
        Some(theta) => Box::new(theta.allowed(s).iter().copied()),
        None => Box::new(0..model.num_actions(s)),
    }
}

/// Optimal values restricted to the actions in `allowed` (all actions if
/// `None`).
///
/// Value iteration from zero runs until the largest change is below `tol`.
/// The greedy strategy is then refined by policy iteration with exact
/// evaluation, and ties are resolved to the smallest action index.
/// Non-end states without allowed actions get value 0.
pub(crate) fn solve_optimal(
    model: &MdpModel,
    rewards: &[Vec<f64>],
    allowed: Option<&MultiStrategy>,
    sense: Sense,
    tol: f64,
) -> Result<Optimum> {
    let n = model.num_states();
    let active: Vec<bool> = (0..n)
        .map(|s| !model.is_end(s) && allowed_actions(model, allowed, s).next().is_some())
        .collect();

    let mut v = vec![0.0; n];
    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut delta: f64 = 0.0;
        let mut next = vec![0.0; n];
        for s in (0..n).filter(|&s| active[s]) {
            let best = allowed_actions(model, allowed, s)
                .map(|a| q_value(model, rewards, &v, s, a))
                .reduce(|x, y| if sense.better(y, x) { y } else { x })
                .expect("active state has an action");
            delta = delta.max((best - v[s]).abs());
            next[s] = best;
        }
        v = next;
        if delta < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::InvalidModel("value iteration did not converge".into()));
    }

    // Greedy extraction, then policy iteration on a strategy where inactive
    // states are closed off with a placeholder (never evaluated).
    let mut choice: Vec<Option<usize>> = (0..n)
        .map(|s| active[s].then(|| pick(model, rewards, &v, allowed, s, sense).0))
        .collect();
    let mut values;
    let mut rounds = 0;
    loop {
        values = restricted_values(model, rewards, &choice, &active)?;
        let mut changed = false;
        for s in (0..n).filter(|&s| active[s]) {
            let current = choice[s].expect("active");
            let cur_q = q_value(model, rewards, &values, s, current);
            let (best_a, best_q, _) = pick(model, rewards, &values, allowed, s, sense);
            let eps = TIE_EPS * best_q.abs().max(1.0);
            if sense.better(best_q + sense_shift(sense, eps), cur_q) {
                choice[s] = Some(best_a);
                changed = true;
            }
        }
        rounds += 1;
        if !changed || rounds > 10_000 {
            break;
        }
    }
    // Canonical tie-break: smallest index among optimal actions.
    let mut ties = Vec::new();
    for s in (0..n).filter(|&s| active[s]) {
        let (a, _, tied) = pick(model, rewards, &values, allowed, s, sense);
        choice[s] = Some(a);
        if tied {
            ties.push(s);
        }
    }
    let values = restricted_values(model, rewards, &choice, &active)?;
    let strategy = Strategy::new(
        (0..n)
            .map(|s| {
                if model.is_end(s) {
                    None
                } else {
                    choice[s].or(Some(0))
                }
            })
            .collect(),
    );
    Ok(Optimum {
        values,
        strategy,
        ties,
    })
}

fn sense_shift(sense: Sense, eps: f64) -> f64 {
    match sense {
        Sense::Min => eps,
        Sense::Max => -eps,
    }
}

/// Smallest-index action within the tie window of the best Q-value.
fn pick(
    model: &MdpModel,
    rewards: &[Vec<f64>],
    v: &[f64],
    allowed: Option<&MultiStrategy>,
    s: usize,
    sense: Sense,
) -> (usize, f64, bool) {
    let qs: Vec<(usize, f64)> = allowed_actions(model, allowed, s)
        .map(|a| (a, q_value(model, rewards, v, s, a)))
        .collect();
    let best = qs
        .iter()
        .map(|&(_, q)| q)
        .reduce(|x, y| if sense.better(y, x) { y } else { x })
        .expect("nonempty");
    let eps = TIE_EPS * best.abs().max(1.0);
    let mut within = qs.iter().filter(|&&(_, q)| (q - best).abs() <= eps);
    let &(a, q) = within.next().expect("best is within its own window");
    (a, q, within.next().is_some())
}

fn restricted_values(
    model: &MdpModel,
    rewards: &[Vec<f64>],
    choice: &[Option<usize>],
    active: &[bool],
) -> Result<Vec<f64>> {
    let live: Vec<usize> = (0..model.num_states()).filter(|&s| active[s]).collect();
    let mut pos = vec![usize::MAX; model.num_states()];
    for (k, &s) in live.iter().enumerate() {
        pos[s] = k;
    }
    let k = live.len();
    let mut a = DMatrix::<f64>::identity(k, k);
    let mut b = DVector::<f64>::zeros(k);
    for (row, &s) in live.iter().enumerate() {
        let act = choice[s].expect("active");
        b[row] = rewards[s][act];
        for &(t, p) in model.transitions(s, act) {
            if active[t] {
                a[(row, pos[t])] -= p;
            }
        }
    }
    let x = a
        .lu()
        .solve(&b)
        .ok_or_else(|| Error::InvalidModel("strategy does not reach an end state almost surely".into()))?;
    let mut v = vec![0.0; model.num_states()];
    for (row, &s) in live.iter().enumerate() {
        v[s] = x[row];
    }
    Ok(v)
}

/// Optimal expected total reward from every state.
pub fn optimal_values(
    model: &MdpModel,
    rewards: &[Vec<f64>],
    allowed: Option<&MultiStrategy>,
    sense: Sense,
    tol: f64,
) -> Result<Vec<f64>> {
    Ok(solve_optimal(model, rewards, allowed, sense, tol)?.values)
}

/// Minimal and maximal expected total reward from each state over all
/// strategies complying with `theta`. End states (and unreachable states
/// with nothing allowed) get 0.
pub fn min_max_under_multistrategy(
    model: &MdpModel,
    theta: &MultiStrategy,
    rewards: &[Vec<f64>],
    tol: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    theta.check(model)?;
    let mu = solve_optimal(model, rewards, Some(theta), Sense::Min, tol)?.values;
    let nu = solve_optimal(model, rewards, Some(theta), Sense::Max, tol)?.values;
    Ok((mu, nu))
}

/// Magnitudes that the big-M constant has to dominate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BigM {
    /// `maxᵢ maxₛ max(|infᵢ(s)|, |supᵢ(s)|)` over all strategies.
    pub max_abs: f64,
    /// `Σᵢ maxₛ (supᵢ(s) − infᵢ(s))`.
    pub span_sum: f64,
    /// Largest `|α(s)|` or incoming count `|ρ(s)|` (plus one at the initial
    /// state) over non-end states; the reachability rows multiply by `c`.
    pub degree: f64,
}

impl BigM {
    pub fn compute(model: &MdpModel, property: &MultiObjectiveProperty) -> Result<Self> {
        let mut max_abs: f64 = 0.0;
        let mut span_sum = 0.0;
        for i in 0..property.len() {
            let r = property.internal_rewards(model, i);
            let lo = optimal_values(model, &r, None, Sense::Min, LEMMA_TOL)?;
            let hi = optimal_values(model, &r, None, Sense::Max, LEMMA_TOL)?;
            let mut span: f64 = 0.0;
            for (l, h) in lo.iter().zip(&hi) {
                max_abs = max_abs.max(l.abs()).max(h.abs());
                span = span.max(h - l);
            }
            span_sum += span;
        }
        let incoming = incoming_index(model);
        let degree = model
            .non_end_states()
            .map(|s| {
                let inc = incoming.get(s).len() + usize::from(s == model.initial());
                model.num_actions(s).max(inc)
            })
            .max()
            .unwrap_or(0) as f64;
        Ok(BigM {
            max_abs,
            span_sum,
            degree,
        })
    }

    /// Smallest magnitude `c` must strictly exceed.
    pub fn floor(&self) -> f64 {
        self.max_abs.max(self.span_sum)
    }

    pub fn constant(&self) -> f64 {
        (1.0 + self.floor()).max(self.degree)
    }

    pub fn admits(&self, c: f64) -> bool {
        c > self.floor() && c >= self.degree
    }
}

/// `c = max(1 + max(max |value|, Σᵢ max value spread), degree)` over all
/// strategies.
///
/// The spread term keeps a disabled action's recursion constraint slack even
/// when the two sides sit at opposite extremes, and keeps the tie-break term
/// of the objective below one unit of permissivity. The degree term lets a
/// single allowed incoming action justify every action of its target.
pub fn big_m_constant(model: &MdpModel, property: &MultiObjectiveProperty) -> Result<f64> {
    Ok(BigM::compute(model, property)?.constant())
}
