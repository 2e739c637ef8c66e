//! A small mixed-integer linear programming toolkit: model builder, dense
//! bounded-variable simplex, best-first branch-and-bound over binaries, and
//! LP-format export for external solvers.

mod bnb;
mod lp_format;
mod simplex;

use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use bnb::{brute_force, solve, solve_with_callback, SolverConfig};
pub use lp_format::{export_lp, format_number};
pub use simplex::{solve_lp_relaxation, solve_lp_with_bounds, LpOutcome};

/// Feasibility tolerance used by the assignment checker.
pub const CHECK_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct VarId(pub usize);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VarKind {
    Binary,
    Continuous,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Variable {
    pub name: String,
    pub kind: VarKind,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Relation {
    #[serde(rename = "<=")]
    Le,
    #[serde(rename = ">=")]
    Ge,
    #[serde(rename = "=")]
    Eq,
}

impl fmt::Display for Relation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Relation::Le => "<=",
            Relation::Ge => ">=",
            Relation::Eq => "=",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Constraint {
    pub name: String,
    pub terms: Vec<(VarId, f64)>,
    pub relation: Relation,
    pub rhs: f64,
}

impl Constraint {
    pub fn lhs(&self, x: &[f64]) -> f64 {
        self.terms.iter().map(|&(v, a)| a * x[v.0]).sum()
    }

    /// Amount by which `x` violates this row (0 when satisfied).
    pub fn violation(&self, x: &[f64]) -> f64 {
        let lhs = self.lhs(x);
        match self.relation {
            Relation::Le => (lhs - self.rhs).max(0.0),
            Relation::Ge => (self.rhs - lhs).max(0.0),
            Relation::Eq => (lhs - self.rhs).abs(),
        }
    }
}

/// A minimization MILP over binary and bounded continuous variables.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MilpModel {
    variables: Vec<Variable>,
    constraints: Vec<Constraint>,
    objective: Vec<(VarId, f64)>,
    objective_constant: f64,
    #[serde(skip)]
    names: HashMap<String, VarId>,
    #[serde(skip)]
    row_names: HashMap<String, usize>,
}

impl MilpModel {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add_binary(&mut self, name: impl Into<String>) -> Result<VarId> {
        self.add_var(name.into(), VarKind::Binary, 0.0, 1.0)
    }

    pub fn add_continuous(&mut self, name: impl Into<String>, lower: f64, upper: f64) -> Result<VarId> {
        if lower > upper || lower.is_nan() || upper.is_nan() {
            return Err(Error::Milp(format!("empty bounds [{lower}, {upper}]")));
        }
        self.add_var(name.into(), VarKind::Continuous, lower, upper)
    }

    fn add_var(&mut self, name: String, kind: VarKind, lower: f64, upper: f64) -> Result<VarId> {
        if self.names.contains_key(&name) {
            return Err(Error::Milp(format!("duplicate variable name `{name}`")));
        }
        let id = VarId(self.variables.len());
        self.names.insert(name.clone(), id);
        self.variables.push(Variable {
            name,
            kind,
            lower,
            upper,
        });
        Ok(id)
    }

    /// Adds `Σ terms (relation) rhs`. Repeated variables are merged.
    pub fn add_constraint(
        &mut self,
        name: impl Into<String>,
        terms: impl IntoIterator<Item = (VarId, f64)>,
        relation: Relation,
        rhs: f64,
    ) -> Result<usize> {
        let name = name.into();
        if self.row_names.contains_key(&name) {
            return Err(Error::Milp(format!("duplicate constraint name `{name}`")));
        }
        let terms = self.merge(terms)?;
        if !rhs.is_finite() {
            return Err(Error::Milp(format!("constraint `{name}` has non-finite rhs")));
        }
        self.row_names.insert(name.clone(), self.constraints.len());
        self.constraints.push(Constraint {
            name,
            terms,
            relation,
            rhs,
        });
        Ok(self.constraints.len() - 1)
    }

    pub fn set_objective(&mut self, terms: impl IntoIterator<Item = (VarId, f64)>, constant: f64) -> Result<()> {
        self.objective = self.merge(terms)?;
        self.objective_constant = constant;
        Ok(())
    }

    fn merge(&self, terms: impl IntoIterator<Item = (VarId, f64)>) -> Result<Vec<(VarId, f64)>> {
        let mut out: Vec<(VarId, f64)> = Vec::new();
        for (v, a) in terms {
            if v.0 >= self.variables.len() {
                return Err(Error::Milp(format!("unknown variable #{}", v.0)));
            }
            if !a.is_finite() {
                return Err(Error::Milp(format!("non-finite coefficient on `{}`", self.variables[v.0].name)));
            }
            match out.iter_mut().find(|(w, _)| *w == v) {
                Some((_, c)) => *c += a,
                None => out.push((v, a)),
            }
        }
        out.retain(|&(_, a)| a != 0.0);
        Ok(out)
    }

    pub fn var(&self, name: &str) -> Option<VarId> {
        self.names.get(name).copied()
    }

    pub fn variables(&self) -> &[Variable] {
        &self.variables
    }

    pub fn variable(&self, id: VarId) -> &Variable {
        &self.variables[id.0]
    }

    pub fn constraints(&self) -> &[Constraint] {
        &self.constraints
    }

    pub fn objective(&self) -> &[(VarId, f64)] {
        &self.objective
    }

    pub fn objective_constant(&self) -> f64 {
        self.objective_constant
    }

    pub fn num_vars(&self) -> usize {
        self.variables.len()
    }

    pub fn num_binaries(&self) -> usize {
        self.variables.iter().filter(|v| v.kind == VarKind::Binary).count()
    }

    pub fn num_continuous(&self) -> usize {
        self.num_vars() - self.num_binaries()
    }

    pub fn num_constraints(&self) -> usize {
        self.constraints.len()
    }

    pub fn binaries(&self) -> impl Iterator<Item = VarId> + '_ {
        self.variables
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VarKind::Binary)
            .map(|(i, _)| VarId(i))
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective_constant + self.objective.iter().map(|&(v, a)| a * x[v.0]).sum::<f64>()
    }

    /// Independent feasibility check of a full assignment: every row,
    /// every bound, and integrality of binaries, all within `tol`.
    pub fn check_assignment(&self, x: &[f64], tol: f64) -> std::result::Result<(), String> {
        if x.len() != self.variables.len() {
            return Err(format!("assignment has {} values for {} variables", x.len(), self.variables.len()));
        }
        for (v, &val) in self.variables.iter().zip(x) {
            if !val.is_finite() || val < v.lower - tol || val > v.upper + tol {
                return Err(format!("`{}` = {val} outside [{}, {}]", v.name, v.lower, v.upper));
            }
            if v.kind == VarKind::Binary && val.min(1.0 - val).abs() > tol {
                return Err(format!("binary `{}` = {val} is fractional", v.name));
            }
        }
        for c in &self.constraints {
            let viol = c.violation(x);
            if viol > tol {
                return Err(format!("row `{}` violated by {viol}", c.name));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveStatus {
    Optimal,
    Infeasible,
    /// Time limit hit before any integral solution was found.
    Timeout,
    /// Best integral solution found so far, optimality not proven.
    Incumbent,
    Unbounded,
    /// The simplex lost accuracy or failed to terminate; never trust the
    /// assignment.
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MilpSolution {
    pub status: SolveStatus,
    pub values: Vec<f64>,
    pub objective: f64,
    /// Best proven lower bound on the optimum.
    pub bound: f64,
    pub nodes: usize,
    pub wall_time_secs: f64,
}

impl MilpSolution {
    pub fn has_assignment(&self) -> bool {
        matches!(self.status, SolveStatus::Optimal | SolveStatus::Incumbent)
    }

    pub fn value(&self, v: VarId) -> f64 {
        self.values[v.0]
    }
}
