use std::collections::{BTreeSet, HashSet};

use super::{permissivity, verify_soundness, SOUNDNESS_TOL};
use crate::analysis::{MultiObjectiveProperty, ObjectiveBounds};
use crate::error::{Error, Result};
use crate::mdp::{MdpModel, MultiStrategy};

/// Default cap on the number of multi-strategies enumerated.
pub const DEFAULT_MULTI_LIMIT: u64 = 1_000_000;

const SPREAD_TIE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct BruteForceOptimum {
    /// Pruned to the states reachable under it.
    pub theta: MultiStrategy,
    pub penalty: usize,
    /// `Σᵢ (max − min)` at the initial state.
    pub spread: f64,
    /// Distinct pruned multi-strategies examined.
    pub candidates: usize,
}

/// Enumerates every multi-strategy, keeps the sound ones and returns the
/// most permissive. Ties go to the smaller spread, then to the
/// lexicographically smallest allowed sets.
pub fn brute_force_optimal_multistrategy(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    bounds: &ObjectiveBounds,
    limit: u64,
) -> Result<BruteForceOptimum> {
    let live: Vec<usize> = model.non_end_states().collect();
    let count: f64 = live
        .iter()
        .map(|&s| 2f64.powi(model.num_actions(s) as i32) - 1.0)
        .product();
    if count > limit as f64 {
        return Err(Error::TooLarge { count, limit });
    }
    if live.iter().any(|&s| model.num_actions(s) >= 31) {
        return Err(Error::TooLarge { count, limit });
    }

    let mut masks: Vec<u32> = vec![1; live.len()];
    let mut seen: HashSet<MultiStrategy> = HashSet::new();
    let mut best: Option<BruteForceOptimum> = None;
    let mut candidates = 0usize;
    loop {
        let mut theta = MultiStrategy::empty(model.num_states());
        for (k, &s) in live.iter().enumerate() {
            let set: BTreeSet<usize> = (0..model.num_actions(s)).filter(|a| masks[k] >> a & 1 == 1).collect();
            theta.allowed[s] = set;
        }
        let pruned = theta.pruned(model);
        if seen.insert(pruned.clone()) {
            candidates += 1;
            let penalty = permissivity(model, &pruned);
            if best.as_ref().is_none_or(|b| penalty <= b.penalty) {
                let report = verify_soundness(model, property, &pruned, bounds, SOUNDNESS_TOL)?;
                if report.pass {
                    let spread: f64 = report.objectives.iter().map(|o| o.max - o.min).sum();
                    let better = match &best {
                        None => true,
                        Some(b) => {
                            penalty < b.penalty
                                || spread < b.spread - SPREAD_TIE
                                || (spread <= b.spread + SPREAD_TIE && pruned < b.theta)
                        }
                    };
                    if better {
                        best = Some(BruteForceOptimum {
                            theta: pruned,
                            penalty,
                            spread,
                            candidates: 0,
                        });
                    }
                }
            }
        }
        // Odometer over non-empty action subsets, last state fastest.
        let mut k = live.len();
        loop {
            if k == 0 {
                return match best {
                    Some(mut b) => {
                        b.candidates = candidates;
                        Ok(b)
                    }
                    None => Err(Error::NoSoundMultiStrategy),
                };
            }
            k -= 1;
            let full = (1u32 << model.num_actions(live[k])) - 1;
            if masks[k] < full {
                masks[k] += 1;
                break;
            }
            masks[k] = 1;
        }
    }
}
