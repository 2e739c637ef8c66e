//! Multi-objective numerics over explicit MDPs.
//!
//! Objectives are stored in all-minimize form: a maximized reward is negated
//! on the way in and its sign restored whenever values are reported.

mod brute;
mod extreme;
mod pareto;
mod values;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mdp::MdpModel;

pub use brute::{brute_force_frontier, count_strategies, enumerate_strategies, StrategyIter, DEFAULT_LIMIT};
pub use extreme::extreme_points;
pub use pareto::{compute_bounds, weighted_value_iteration, DEFAULT_VI_TOL};
pub use values::{
    big_m_constant, evaluate_strategy, evaluate_strategy_iterative, min_max_under_multistrategy,
    optimal_values, strategy_values, BigM, Sense, LEMMA_TOL,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Min,
    Max,
}

impl Direction {
    /// Multiplier taking original rewards to the internal minimizing form.
    pub fn sign(self) -> f64 {
        match self {
            Direction::Min => 1.0,
            Direction::Max => -1.0,
        }
    }
}

impl FromStr for Direction {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "min" => Ok(Direction::Min),
            "max" => Ok(Direction::Max),
            other => Err(Error::InvalidModel(format!("unknown direction `{other}`"))),
        }
    }
}

impl fmt::Display for Direction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Direction::Min => "min",
            Direction::Max => "max",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Objective {
    pub name: String,
    /// Index into the model's reward structures.
    pub reward: usize,
    pub direction: Direction,
}

/// An ordered list of reward objectives, each minimized or maximized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiObjectiveProperty {
    objectives: Vec<Objective>,
}

impl MultiObjectiveProperty {
    pub fn new(model: &MdpModel, pairs: &[(&str, Direction)]) -> Result<Self> {
        if pairs.len() < 2 {
            return Err(Error::InvalidModel(format!(
                "a multi-objective property needs at least two objectives, got {}",
                pairs.len()
            )));
        }
        let objectives = pairs
            .iter()
            .map(|&(name, direction)| {
                let reward = model
                    .reward_index(name)
                    .ok_or_else(|| Error::UnknownReward(name.to_string()))?;
                Ok(Objective {
                    name: name.to_string(),
                    reward,
                    direction,
                })
            })
            .collect::<Result<_>>()?;
        Ok(MultiObjectiveProperty { objectives })
    }

    /// Parses `"dist:min,risk:min"`.
    pub fn parse(model: &MdpModel, text: &str) -> Result<Self> {
        let pairs = text
            .split(',')
            .map(|part| {
                let (name, dir) = part
                    .trim()
                    .split_once(':')
                    .ok_or_else(|| Error::InvalidModel(format!("expected name:min|max, got `{part}`")))?;
                Ok((name.trim(), dir.trim().parse::<Direction>()?))
            })
            .collect::<Result<Vec<_>>>()?;
        MultiObjectiveProperty::new(model, &pairs)
    }

    pub fn objectives(&self) -> &[Objective] {
        &self.objectives
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    /// Reward table of objective `i` in minimizing form, `[state][action]`.
    pub fn internal_rewards(&self, model: &MdpModel, i: usize) -> Vec<Vec<f64>> {
        let obj = &self.objectives[i];
        let sign = obj.direction.sign();
        model
            .reward(obj.reward)
            .values
            .iter()
            .map(|row| row.iter().map(|r| sign * r).collect())
            .collect()
    }

    /// `Σᵢ wᵢ·rᵢ` in minimizing form.
    pub fn scalarized_rewards(&self, model: &MdpModel, w: &[f64]) -> Vec<Vec<f64>> {
        let mut out: Vec<Vec<f64>> = (0..model.num_states())
            .map(|s| vec![0.0; model.num_actions(s)])
            .collect();
        for (i, &wi) in w.iter().enumerate() {
            if wi == 0.0 {
                continue;
            }
            for (row, src) in out.iter_mut().zip(self.internal_rewards(model, i)) {
                for (o, r) in row.iter_mut().zip(src) {
                    *o += wi * r;
                }
            }
        }
        out
    }

    /// Converts an internal (minimizing) value of objective `i` back to
    /// the original sign.
    pub fn restore_sign(&self, i: usize, internal: f64) -> f64 {
        self.objectives[i].direction.sign() * internal
    }
}

/// An achievable objective vector and the strategy that witnesses it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParetoPoint {
    /// Weight vector used to find the point; empty for enumerated points.
    pub weights: Vec<f64>,
    /// Expected total reward per objective, original sign.
    pub point: Vec<f64>,
    pub strategy: crate::mdp::Strategy,
    /// Non-end states where the Bellman minimum was attained by more than
    /// one action and the smallest action index was taken.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub ties: Vec<usize>,
}

impl ParetoPoint {
    /// The point in all-minimize form.
    pub fn internal(&self, property: &MultiObjectiveProperty) -> Vec<f64> {
        self.point
            .iter()
            .enumerate()
            .map(|(i, &x)| property.restore_sign(i, x))
            .collect()
    }
}

/// `a` dominates `b` (both in minimizing form) if it is no worse everywhere
/// and strictly better somewhere.
pub fn dominates(a: &[f64], b: &[f64], tol: f64) -> bool {
    a.iter().zip(b).all(|(x, y)| *x <= y + tol) && a.iter().zip(b).any(|(x, y)| *x < y - tol)
}

/// Per-objective `[b̲ᵢ, b̄ᵢ]`, original sign.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveBounds {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    /// The Pareto point computed for each extreme weight vector.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub points: Vec<ParetoPoint>,
}

impl ObjectiveBounds {
    pub fn new(lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len(),
            });
        }
        if let Some(i) = (0..lower.len()).find(|&i| !(lower[i] <= upper[i])) {
            return Err(Error::InvalidModel(format!(
                "bound {i}: lower {} exceeds upper {}",
                lower[i], upper[i]
            )));
        }
        Ok(ObjectiveBounds {
            lower,
            upper,
            points: Vec::new(),
        })
    }

    pub fn len(&self) -> usize {
        self.lower.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lower.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.lower.iter().chain(&self.upper).all(|x| x.is_finite())
    }

    /// Bounds of objective `i` in minimizing form.
    pub fn internal(&self, property: &MultiObjectiveProperty, i: usize) -> (f64, f64) {
        match property.objectives()[i].direction {
            Direction::Min => (self.lower[i], self.upper[i]),
            Direction::Max => (-self.upper[i], -self.lower[i]),
        }
    }
}
