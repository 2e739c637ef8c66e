use std::cmp::Ordering;
use std::collections::BinaryHeap;
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use super::simplex::{solve_lp_with_bounds, LpOutcome};
use super::{MilpModel, MilpSolution, SolveStatus, VarKind, CHECK_TOL};

#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub time_limit: Option<Duration>,
    /// Absolute optimality gap.
    pub gap: f64,
    /// Distance from 0 or 1 below which a binary counts as integral.
    pub int_tol: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            time_limit: None,
            gap: 1e-9,
            int_tol: 1e-6,
        }
    }
}

struct Node {
    bound: f64,
    id: usize,
    lo: Vec<f64>,
    hi: Vec<f64>,
    x: Vec<f64>,
}

impl PartialEq for Node {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Node {}

impl PartialOrd for Node {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Node {
    // Max-heap order: smallest bound first, then oldest node.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .bound
            .total_cmp(&self.bound)
            .then_with(|| other.id.cmp(&self.id))
    }
}

/// Solves the MILP to optimality (or until the time limit).
pub fn solve(model: &MilpModel, config: &SolverConfig) -> MilpSolution {
    solve_with_callback(model, config, &mut |_| ControlFlow::Continue(()))
}

/// Best-first branch-and-bound over the binaries.
///
/// `on_incumbent` sees every improving integral solution after it passed the
/// independent constraint check; returning `Break` stops the search with
/// status [`SolveStatus::Incumbent`].
pub fn solve_with_callback(
    model: &MilpModel,
    config: &SolverConfig,
    on_incumbent: &mut dyn FnMut(&MilpSolution) -> ControlFlow<()>,
) -> MilpSolution {
    let start = Instant::now();
    let mut nodes = 0usize;
    let finish = |status, values: Vec<f64>, objective, bound, nodes| MilpSolution {
        status,
        values,
        objective,
        bound,
        nodes,
        wall_time_secs: start.elapsed().as_secs_f64(),
    };
    let binaries: Vec<usize> = model.binaries().map(|v| v.0).collect();
    let lo0: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
    let hi0: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();

    let mut heap = BinaryHeap::new();
    let mut next_id = 0usize;
    let mut push = |heap: &mut BinaryHeap<Node>, lo: Vec<f64>, hi: Vec<f64>, nodes: &mut usize| -> Result<(), SolveStatus> {
        *nodes += 1;
        match solve_lp_with_bounds(model, &lo, &hi) {
            LpOutcome::Optimal { x, objective } => {
                heap.push(Node {
                    bound: objective,
                    id: next_id,
                    lo,
                    hi,
                    x,
                });
                next_id += 1;
                Ok(())
            }
            LpOutcome::Infeasible => Ok(()),
            LpOutcome::Unbounded => Err(SolveStatus::Unbounded),
            LpOutcome::Numerical(_) => Err(SolveStatus::NumericalFailure),
        }
    };

    if let Err(status) = push(&mut heap, lo0, hi0, &mut nodes) {
        return finish(status, Vec::new(), f64::NAN, f64::NEG_INFINITY, nodes);
    }

    let mut incumbent: Option<(Vec<f64>, f64)> = None;
    let timed_out = || config.time_limit.is_some_and(|t| start.elapsed() >= t);

    while let Some(node) = heap.pop() {
        let best = incumbent.as_ref().map_or(f64::INFINITY, |(_, v)| *v);
        if node.bound >= best - config.gap {
            heap.clear();
            break;
        }
        if timed_out() {
            heap.push(node);
            break;
        }
        let branch = binaries
            .iter()
            .copied()
            .filter(|&j| node.x[j].min(1.0 - node.x[j]) > config.int_tol)
            .max_by(|&a, &b| {
                let fa = node.x[a].min(1.0 - node.x[a]);
                let fb = node.x[b].min(1.0 - node.x[b]);
                fa.total_cmp(&fb).then(b.cmp(&a))
            });
        match branch {
            None => {
                let mut x = node.x;
                for &j in &binaries {
                    x[j] = x[j].round();
                }
                if model.check_assignment(&x, CHECK_TOL).is_err() {
                    continue;
                }
                let objective = model.objective_value(&x);
                if objective < best - config.gap {
                    incumbent = Some((x.clone(), objective));
                    let bound = heap.peek().map_or(objective, |n| n.bound.min(objective));
                    let snapshot = finish(SolveStatus::Incumbent, x, objective, bound, nodes);
                    if on_incumbent(&snapshot).is_break() {
                        return snapshot;
                    }
                }
            }
            Some(j) => {
                for value in [0.0, 1.0] {
                    let mut lo = node.lo.clone();
                    let mut hi = node.hi.clone();
                    lo[j] = value;
                    hi[j] = value;
                    if let Err(status) = push(&mut heap, lo, hi, &mut nodes) {
                        return finish(status, Vec::new(), f64::NAN, f64::NEG_INFINITY, nodes);
                    }
                }
            }
        }
    }

    let open_bound = heap.peek().map(|n| n.bound);
    match (incumbent, open_bound) {
        (Some((x, obj)), None) => finish(SolveStatus::Optimal, x, obj, obj, nodes),
        (Some((x, obj)), Some(b)) => finish(SolveStatus::Incumbent, x, obj, b.min(obj), nodes),
        (None, None) => finish(SolveStatus::Infeasible, Vec::new(), f64::NAN, f64::INFINITY, nodes),
        (None, Some(b)) => finish(SolveStatus::Timeout, Vec::new(), f64::NAN, b, nodes),
    }
}

/// Exhaustive search over all binary assignments; exponential, for tests
/// and small cross-checks only.
pub fn brute_force(model: &MilpModel) -> Option<(Vec<f64>, f64)> {
    let binaries: Vec<usize> = model.binaries().map(|v| v.0).collect();
    assert!(binaries.len() <= 20, "brute force limited to 20 binaries");
    let mut best: Option<(Vec<f64>, f64)> = None;
    for mask in 0u32..(1u32 << binaries.len()) {
        let mut lo: Vec<f64> = model.variables().iter().map(|v| v.lower).collect();
        let mut hi: Vec<f64> = model.variables().iter().map(|v| v.upper).collect();
        for (k, &j) in binaries.iter().enumerate() {
            let v = ((mask >> k) & 1) as f64;
            lo[j] = v;
            hi[j] = v;
        }
        if let LpOutcome::Optimal { x, objective } = solve_lp_with_bounds(model, &lo, &hi) {
            if best.as_ref().is_none_or(|(_, b)| objective < *b) {
                best = Some((x, objective));
            }
        }
    }
    debug_assert!(model.variables().iter().all(|v| v.kind == VarKind::Binary || v.lower <= v.upper));
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::milp::{Relation, VarId};

    fn knapsack(values: &[f64], weights: &[f64], cap: f64) -> MilpModel {
        let mut m = MilpModel::new();
        let xs: Vec<VarId> = (0..values.len()).map(|i| m.add_binary(format!("x{i}")).unwrap()).collect();
        m.add_constraint("cap", xs.iter().copied().zip(weights.iter().copied()), Relation::Le, cap)
            .unwrap();
        m.set_objective(xs.iter().copied().zip(values.iter().map(|v| -v)), 0.0).unwrap();
        m
    }

    #[test]
    fn solves_small_knapsack() {
        let m = knapsack(&[10.0, 13.0, 7.0, 8.0], &[3.0, 4.0, 2.0, 3.0], 7.0);
        let s = solve(&m, &SolverConfig::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective + 23.0).abs() < 1e-9);
        assert!(m.check_assignment(&s.values, CHECK_TOL).is_ok());
    }

    #[test]
    fn infeasible_binary_program() {
        let mut m = MilpModel::new();
        let x = m.add_binary("x").unwrap();
        let y = m.add_binary("y").unwrap();
        m.add_constraint("c", [(x, 1.0), (y, 1.0)], Relation::Eq, 1.5).unwrap();
        let s = solve(&m, &SolverConfig::default());
        assert_eq!(s.status, SolveStatus::Infeasible);
    }

    #[test]
    fn mixed_binary_continuous() {
        // min -y, y <= 3 b, y <= 2 + 0.5 b, y in [0, 10]
        let mut m = MilpModel::new();
        let b = m.add_binary("b").unwrap();
        let y = m.add_continuous("y", 0.0, 10.0).unwrap();
        m.add_constraint("r1", [(y, 1.0), (b, -3.0)], Relation::Le, 0.0).unwrap();
        m.add_constraint("r2", [(y, 1.0), (b, -0.5)], Relation::Le, 2.0).unwrap();
        m.set_objective([(y, -1.0), (b, 0.1)], 1.0).unwrap();
        let s = solve(&m, &SolverConfig::default());
        assert_eq!(s.status, SolveStatus::Optimal);
        assert!((s.objective - (1.0 - 2.5 + 0.1)).abs() < 1e-9);
        assert_eq!(brute_force(&m).map(|(_, v)| (v * 1e9).round()), Some((s.objective * 1e9).round()));
    }

    #[test]
    fn callback_can_stop_early() {
        let m = knapsack(&[5.0, 4.0, 3.0, 2.0, 1.0], &[2.0, 2.0, 2.0, 2.0, 2.0], 5.0);
        let mut seen = 0;
        let s = solve_with_callback(&m, &SolverConfig::default(), &mut |sol| {
            seen += 1;
            assert!(m.check_assignment(&sol.values, CHECK_TOL).is_ok());
            ControlFlow::Break(())
        });
        assert_eq!(seen, 1);
        assert_eq!(s.status, SolveStatus::Incumbent);
    }

    #[test]
    fn zero_time_limit_times_out() {
        let m = knapsack(&[10.0, 13.0, 7.0, 8.0], &[3.0, 4.0, 2.5, 3.0], 7.0);
        let cfg = SolverConfig {
            time_limit: Some(Duration::ZERO),
            ..SolverConfig::default()
        };
        let s = solve(&m, &cfg);
        assert_eq!(s.status, SolveStatus::Timeout);
    }
}
