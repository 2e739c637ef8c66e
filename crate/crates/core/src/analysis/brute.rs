use super::values::strategy_values;
use super::{dominates, MultiObjectiveProperty, ParetoPoint};
use crate::error::{Error, Result};
use crate::mdp::{MdpModel, Strategy};

/// Default cap on exhaustive enumeration.
pub const DEFAULT_LIMIT: u64 = 1_000_000;

/// `Π_s |α(s)|` over non-end states, as a float so it cannot overflow.
pub fn count_strategies(model: &MdpModel) -> f64 {
    model
        .non_end_states()
        .map(|s| model.num_actions(s) as f64)
        .product()
}

/// Iterates every deterministic memoryless strategy in odometer order
/// (last non-end state varies fastest).
pub fn enumerate_strategies(model: &MdpModel) -> StrategyIter<'_> {
    let live: Vec<usize> = model.non_end_states().collect();
    let done = live.iter().any(|&s| model.num_actions(s) == 0);
    StrategyIter {
        model,
        digits: vec![0; live.len()],
        live,
        done,
    }
}

pub struct StrategyIter<'a> {
    model: &'a MdpModel,
    live: Vec<usize>,
    digits: Vec<usize>,
    done: bool,
}

impl Iterator for StrategyIter<'_> {
    type Item = Strategy;

    fn next(&mut self) -> Option<Strategy> {
        if self.done {
            return None;
        }
        let mut choice = vec![None; self.model.num_states()];
        for (k, &s) in self.live.iter().enumerate() {
            choice[s] = Some(self.digits[k]);
        }
        // advance
        let mut k = self.live.len();
        loop {
            if k == 0 {
                self.done = true;
                break;
            }
            k -= 1;
            self.digits[k] += 1;
            if self.digits[k] < self.model.num_actions(self.live[k]) {
                break;
            }
            self.digits[k] = 0;
        }
        Some(Strategy::new(choice))
    }
}

/// Non-dominated points over all deterministic memoryless strategies.
///
/// Duplicate points keep the first witnessing strategy in enumeration order.
pub fn brute_force_frontier(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    limit: u64,
) -> Result<Vec<ParetoPoint>> {
    let count = count_strategies(model);
    if count > limit as f64 {
        return Err(Error::TooLarge { count, limit });
    }
    let rewards: Vec<Vec<Vec<f64>>> = (0..property.len())
        .map(|i| property.internal_rewards(model, i))
        .collect();
    let mut all: Vec<(Vec<f64>, Strategy)> = Vec::new();
    for sigma in enumerate_strategies(model) {
        let x = rewards
            .iter()
            .map(|r| Ok(strategy_values(model, &sigma, r)?[model.initial()]))
            .collect::<Result<Vec<f64>>>()?;
        all.push((x, sigma));
    }
    const TOL: f64 = 1e-9;
    let mut frontier: Vec<ParetoPoint> = Vec::new();
    for (x, sigma) in &all {
        if all.iter().any(|(y, _)| dominates(y, x, TOL)) {
            continue;
        }
        let seen = frontier.iter().any(|p| {
            p.internal(property)
                .iter()
                .zip(x)
                .all(|(a, b)| (a - b).abs() <= TOL)
        });
        if !seen {
            frontier.push(ParetoPoint {
                weights: Vec::new(),
                point: x.iter().enumerate().map(|(i, v)| property.restore_sign(i, *v)).collect(),
                strategy: sigma.clone(),
                ties: Vec::new(),
            });
        }
    }
    Ok(frontier)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_road;

    #[test]
    fn two_road_frontier() {
        let m = two_road();
        let p = MultiObjectiveProperty::parse(&m, "dist:min,risk:min").unwrap();
        let f = brute_force_frontier(&m, &p, DEFAULT_LIMIT).unwrap();
        let mut pts: Vec<Vec<f64>> = f.iter().map(|p| p.point.clone()).collect();
        pts.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(pts, vec![vec![1.0, 1.0], vec![2.0, 0.0]]);
    }

    #[test]
    fn single_strategy_model() {
        let mut m = MdpModel::new(2, 0).unwrap();
        m.add_action(0, "go", vec![(1, 0.9), (0, 0.1)]).unwrap();
        m.set_end(1, true).unwrap();
        let a = m.add_reward("a");
        m.add_reward("b");
        m.set_reward(a, 0, 0, 1.0).unwrap();
        let p = MultiObjectiveProperty::parse(&m, "a:min,b:max").unwrap();
        let f = brute_force_frontier(&m, &p, DEFAULT_LIMIT).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f[0].point[0] - 1.0 / 0.9).abs() < 1e-12);
    }

    #[test]
    fn limit_is_enforced() {
        let m = two_road();
        let p = MultiObjectiveProperty::parse(&m, "dist:min,risk:min").unwrap();
        assert!(matches!(brute_force_frontier(&m, &p, 1), Err(Error::TooLarge { .. })));
    }

    #[test]
    fn enumeration_counts() {
        let m = two_road();
        assert_eq!(count_strategies(&m), 2.0);
        let all: Vec<Strategy> = enumerate_strategies(&m).collect();
        assert_eq!(all.len(), 2);
        assert_eq!(all[0].choice, vec![Some(0), Some(0), None]);
        assert_eq!(all[1].choice, vec![Some(1), Some(0), None]);
    }
}
