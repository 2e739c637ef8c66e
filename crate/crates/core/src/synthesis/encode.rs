use serde::{Deserialize, Serialize};

use crate::analysis::{BigM, MultiObjectiveProperty, ObjectiveBounds};
use crate::error::{Error, Result};
use crate::mdp::{incoming_index, MdpModel, MultiStrategy};
use crate::milp::{MilpModel, Relation, VarId};

/// Which states the permissivity term of the objective charges for
/// disallowed actions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PenaltyScope {
    /// Every non-end state is charged, and a state without an allowed
    /// incoming transition must allow nothing. Unreachable states therefore
    /// cost `|α(s)|` each.
    #[default]
    AllStates,
    /// The "unreachable implies nothing allowed" rows are dropped, so
    /// unreachable states may allow every action at no cost and the
    /// objective charges reachable states only.
    Reachable,
}

/// MILP variables and rows for one synthesis instance.
#[derive(Debug, Clone)]
pub struct MilpEncoding {
    pub milp: MilpModel,
    /// `eta[s][a]`; empty for end states.
    pub eta: Vec<Vec<VarId>>,
    /// `mu[i][s]`; `None` for end states, whose value is the constant 0.
    pub mu: Vec<Vec<Option<VarId>>>,
    pub nu: Vec<Vec<Option<VarId>>>,
    pub c: f64,
    pub bounds: ObjectiveBounds,
    pub scope: PenaltyScope,
    pub initial: usize,
}

/// Predicted sizes of an encoding.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodingSize {
    pub binaries: usize,
    pub continuous: usize,
    pub constraints: usize,
}

impl EncodingSize {
    /// `Σ|α(s)|` binaries, `2n·|S∖end|` continuous and
    /// `2·|S∖end| + 2n·Σ|α(s)| + 2n + 1` rows (one fewer per non-end state
    /// with [`PenaltyScope::Reachable`]).
    pub fn predict(model: &MdpModel, objectives: usize, scope: PenaltyScope) -> Self {
        let live = model.non_end_states().count();
        let choices = model.num_choices();
        let per_state = match scope {
            PenaltyScope::AllStates => 2,
            PenaltyScope::Reachable => 1,
        };
        EncodingSize {
            binaries: choices,
            continuous: 2 * objectives * live,
            constraints: per_state * live + 2 * objectives * choices + 2 * objectives + 1,
        }
    }
}

impl MilpEncoding {
    pub fn size(&self) -> EncodingSize {
        EncodingSize {
            binaries: self.milp.num_binaries(),
            continuous: self.milp.num_continuous(),
            constraints: self.milp.num_constraints(),
        }
    }

    /// θ(s) = {a | η(s,a) > 0.5}, without pruning.
    pub fn decode(&self, values: &[f64]) -> MultiStrategy {
        MultiStrategy {
            allowed: self
                .eta
                .iter()
                .map(|row| {
                    row.iter()
                        .enumerate()
                        .filter(|(_, v)| values[v.0] > 0.5)
                        .map(|(a, _)| a)
                        .collect()
                })
                .collect(),
        }
    }

    /// `μ(i,s0)` and `ν(i,s0)` in internal (minimizing) form.
    pub fn initial_values(&self, values: &[f64]) -> (Vec<f64>, Vec<f64>) {
        let pick = |v: &Option<VarId>| v.map_or(0.0, |id| values[id.0]);
        (
            self.mu.iter().map(|row| pick(&row[self.initial])).collect(),
            self.nu.iter().map(|row| pick(&row[self.initial])).collect(),
        )
    }
}

/// Builds the MILP whose optimal solutions are optimally permissive sound
/// multi-strategies, charging unreachable states as written.
pub fn encode(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    bounds: &ObjectiveBounds,
    c: f64,
) -> Result<MilpEncoding> {
    encode_with_scope(model, property, bounds, c, PenaltyScope::AllStates)
}

pub fn encode_with_scope(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    bounds: &ObjectiveBounds,
    c: f64,
    scope: PenaltyScope,
) -> Result<MilpEncoding> {
    let n = property.len();
    if bounds.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: bounds.len(),
        });
    }
    if !bounds.is_finite() {
        return Err(Error::Encoding("objective bounds must be finite".into()));
    }
    let big_m = BigM::compute(model, property)?;
    if !c.is_finite() || !big_m.admits(c) {
        return Err(Error::Encoding(format!(
            "big-M constant {c} too small: needs > {} and >= {}",
            big_m.floor(),
            big_m.degree
        )));
    }

    let s0 = model.initial();
    if model.is_end(s0) {
        return Err(Error::Encoding("initial state is an end state".into()));
    }
    let states = model.num_states();
    let live: Vec<usize> = model.non_end_states().collect();
    let mut milp = MilpModel::new();

    let mut eta = vec![Vec::new(); states];
    for &s in &live {
        for a in 0..model.num_actions(s) {
            eta[s].push(milp.add_binary(format!("eta_{s}_{a}"))?);
        }
    }
    let mut mu = vec![vec![None; states]; n];
    let mut nu = vec![vec![None; states]; n];
    for i in 0..n {
        for &s in &live {
            mu[i][s] = Some(milp.add_continuous(format!("mu_{i}_{s}"), -c, c)?);
        }
        for &s in &live {
            nu[i][s] = Some(milp.add_continuous(format!("nu_{i}_{s}"), -c, c)?);
        }
    }

    let incoming = incoming_index(model);
    for &s in &live {
        let init = if s == s0 { 1.0 } else { 0.0 };
        let own: Vec<(VarId, f64)> = eta[s].iter().map(|&v| (v, 1.0)).collect();
        let inc: Vec<(VarId, f64)> = incoming.get(s).iter().map(|&(t, a)| (eta[t][a], 1.0)).collect();
        if scope == PenaltyScope::AllStates {
            let terms = own.iter().copied().chain(inc.iter().map(|&(v, w)| (v, -c * w)));
            milp.add_constraint(format!("reach_{s}"), terms, Relation::Le, c * init)?;
        }
        let terms = own.iter().map(|&(v, w)| (v, c * w)).chain(inc.iter().map(|&(v, w)| (v, -w)));
        milp.add_constraint(format!("live_{s}"), terms, Relation::Ge, init)?;
    }

    for i in 0..n {
        let r = property.internal_rewards(model, i);
        for &s in &live {
            for a in 0..model.num_actions(s) {
                let succ = |vars: &[Option<VarId>]| -> Vec<(VarId, f64)> {
                    model
                        .transitions(s, a)
                        .iter()
                        .filter_map(|&(t, p)| vars[t].map(|v| (v, -p)))
                        .collect()
                };
                let x = eta[s][a];
                let mut lo = vec![(mu[i][s].expect("live"), 1.0)];
                lo.extend(succ(&mu[i]));
                lo.push((x, c));
                milp.add_constraint(format!("rmin_{i}_{s}_{a}"), lo, Relation::Le, r[s][a] + c)?;
                let mut hi = vec![(nu[i][s].expect("live"), 1.0)];
                hi.extend(succ(&nu[i]));
                hi.push((x, -c));
                milp.add_constraint(format!("rmax_{i}_{s}_{a}"), hi, Relation::Ge, r[s][a] - c)?;
            }
        }
    }

    for i in 0..n {
        let (lo, hi) = bounds.internal(property, i);
        let m0: Vec<(VarId, f64)> = mu[i][s0].map(|v| (v, 1.0)).into_iter().collect();
        let n0: Vec<(VarId, f64)> = nu[i][s0].map(|v| (v, 1.0)).into_iter().collect();
        milp.add_constraint(format!("lb_{i}"), m0, Relation::Ge, lo)?;
        milp.add_constraint(format!("ub_{i}"), n0, Relation::Le, hi)?;
    }
    let first: Vec<(VarId, f64)> = eta[s0].iter().map(|&v| (v, 1.0)).collect();
    milp.add_constraint("init", first, Relation::Ge, 1.0)?;

    let binaries: Vec<VarId> = eta.iter().flatten().copied().collect();
    let mut objective: Vec<(VarId, f64)> = binaries.iter().map(|&v| (v, -c)).collect();
    for i in 0..n {
        if let (Some(m0), Some(n0)) = (mu[i][s0], nu[i][s0]) {
            objective.push((n0, 1.0));
            objective.push((m0, -1.0));
        }
    }
    milp.set_objective(objective, c * binaries.len() as f64)?;

    Ok(MilpEncoding {
        milp,
        eta,
        mu,
        nu,
        c,
        bounds: bounds.clone(),
        scope,
        initial: s0,
    })
}

/// Re-evaluates the reachability rows on a decoded (unpruned) θ using
/// integer counts. Returns the first violated state.
pub fn check_reachability_rows(
    model: &MdpModel,
    raw: &MultiStrategy,
    c: f64,
    scope: PenaltyScope,
) -> std::result::Result<(), usize> {
    let incoming = incoming_index(model);
    for s in model.non_end_states() {
        let own = raw.allowed(s).len();
        let inc = incoming.get(s).iter().filter(|&&(t, a)| raw.allows(t, a)).count()
            + usize::from(s == model.initial());
        let reach_ok = scope == PenaltyScope::Reachable || own as f64 <= c * inc as f64;
        let live_ok = c * own as f64 >= inc as f64;
        if !(reach_ok && live_ok) {
            return Err(s);
        }
    }
    Ok(())
}
