use super::values::{solve_optimal, strategy_values, Sense};
use super::{extreme_points, MultiObjectiveProperty, ObjectiveBounds, ParetoPoint};
use crate::error::{Error, Result};
use crate::mdp::MdpModel;
use crate::preferences::{IntervalWeightVector, WeightVector};

/// Default tolerance for point extraction.
pub const DEFAULT_VI_TOL: f64 = 1e-8;

/// Finds the deterministic memoryless strategy minimizing `Σᵢ wᵢ·E(rᵢ)`
/// (minimizing form) and reports its per-objective values.
pub fn weighted_value_iteration(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    w: &WeightVector,
    tol: f64,
) -> Result<ParetoPoint> {
    if w.len() != property.len() {
        return Err(Error::DimensionMismatch {
            expected: property.len(),
            got: w.len(),
        });
    }
    if !(tol > 0.0) {
        return Err(Error::InvalidModel(format!("tolerance must be positive, got {tol}")));
    }
    let scalar = property.scalarized_rewards(model, w.as_slice());
    let opt = solve_optimal(model, &scalar, None, Sense::Min, tol)?;
    let point = (0..property.len())
        .map(|i| {
            let r = property.internal_rewards(model, i);
            let v = strategy_values(model, &opt.strategy, &r)?[model.initial()];
            Ok(property.restore_sign(i, v))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(ParetoPoint {
        weights: w.as_slice().to_vec(),
        point,
        strategy: opt.strategy,
        ties: opt.ties,
    })
}

/// Objective bounds from the Pareto points of the extreme weight vectors.
///
/// Points are visited in lexicographic order of their weight vectors, so
/// the result does not depend on evaluation order.
pub fn compute_bounds(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    iwv: &IntervalWeightVector,
) -> Result<ObjectiveBounds> {
    if iwv.len() != property.len() {
        return Err(Error::DimensionMismatch {
            expected: property.len(),
            got: iwv.len(),
        });
    }
    let n = property.len();
    let mut lower = vec![f64::INFINITY; n];
    let mut upper = vec![f64::NEG_INFINITY; n];
    let mut points = Vec::new();
    for w in extreme_points(iwv)? {
        let p = weighted_value_iteration(model, property, &w, DEFAULT_VI_TOL)?;
        for i in 0..n {
            if lower[i] >= p.point[i] {
                lower[i] = p.point[i];
            }
            if upper[i] <= p.point[i] {
                upper[i] = p.point[i];
            }
        }
        points.push(p);
    }
    debug_assert!(points
        .iter()
        .all(|p| (0..n).all(|i| lower[i] <= p.point[i] && p.point[i] <= upper[i])));
    let mut bounds = ObjectiveBounds::new(lower, upper)?;
    bounds.points = points;
    Ok(bounds)
}
