//! Optimally permissive multi-strategy synthesis.
//!
//! The pipeline computes objective bounds from the extreme weights of the
//! interval, builds the big-M MILP, solves it, decodes the allowed actions
//! and checks the result against an independent min/max evaluation.

mod brute;
mod encode;

use std::collections::BTreeMap;
use std::ops::ControlFlow;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::analysis::{
    big_m_constant, compute_bounds, min_max_under_multistrategy, Direction, MultiObjectiveProperty,
    ObjectiveBounds, LEMMA_TOL,
};
use crate::error::{Error, Result};
use crate::mdp::{reachable_states, validate_model, MdpModel, MultiStrategy};
use crate::milp::{solve_with_callback, MilpSolution, SolveStatus, SolverConfig};
use crate::preferences::IntervalWeightVector;

pub use brute::{brute_force_optimal_multistrategy, BruteForceOptimum, DEFAULT_MULTI_LIMIT};
pub use encode::{check_reachability_rows, encode, encode_with_scope, EncodingSize, MilpEncoding, PenaltyScope};

/// Default tolerance of the soundness check against the bounds.
pub const SOUNDNESS_TOL: f64 = 1e-6;
/// Largest accepted gap between MILP `μ/ν` at the initial state and their
/// independent recomputation.
pub const CROSS_CHECK_TOL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObjectiveCheck {
    pub name: String,
    /// Smallest value over compliant strategies, original sign.
    pub min: f64,
    /// Largest value over compliant strategies, original sign.
    pub max: f64,
    pub lower: f64,
    pub upper: f64,
    pub lower_ok: bool,
    pub upper_ok: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SoundnessReport {
    pub objectives: Vec<ObjectiveCheck>,
    pub pass: bool,
}

/// Converts an internal `[μ, ν]` pair to original-sign `[min, max]`.
fn to_original(direction: Direction, mu: f64, nu: f64) -> (f64, f64) {
    match direction {
        Direction::Min => (mu, nu),
        Direction::Max => (-nu, -mu),
    }
}

/// Checks every compliant strategy's value at the initial state against
/// the bounds, using exact min/max evaluation restricted to `theta`.
pub fn verify_soundness(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    theta: &MultiStrategy,
    bounds: &ObjectiveBounds,
    tol: f64,
) -> Result<SoundnessReport> {
    if bounds.len() != property.len() {
        return Err(Error::DimensionMismatch {
            expected: property.len(),
            got: bounds.len(),
        });
    }
    let s0 = model.initial();
    let mut objectives = Vec::with_capacity(property.len());
    for (i, obj) in property.objectives().iter().enumerate() {
        let r = property.internal_rewards(model, i);
        let (mu, nu) = min_max_under_multistrategy(model, theta, &r, LEMMA_TOL)?;
        let (min, max) = to_original(obj.direction, mu[s0], nu[s0]);
        let (lower, upper) = (bounds.lower[i], bounds.upper[i]);
        objectives.push(ObjectiveCheck {
            name: obj.name.clone(),
            min,
            max,
            lower,
            upper,
            lower_ok: min >= lower - tol,
            upper_ok: max <= upper + tol,
        });
    }
    let pass = objectives.iter().all(|o| o.lower_ok && o.upper_ok);
    Ok(SoundnessReport { objectives, pass })
}

/// `λ(θ) = Σ_{s ∈ S^θ} (|α(s)| − |θ(s)|)` over states reachable under θ.
pub fn permissivity(model: &MdpModel, theta: &MultiStrategy) -> usize {
    reachable_states(model, theta)
        .into_iter()
        .map(|s| {
            let allowed = theta.allowed(s).iter().filter(|&&a| a < model.num_actions(s)).count();
            model.num_actions(s) - allowed
        })
        .sum()
}

/// Decodes θ from a solution and drops states unreachable under it.
pub fn extract_multistrategy(
    model: &MdpModel,
    encoding: &MilpEncoding,
    solution: &MilpSolution,
) -> Result<MultiStrategy> {
    if !solution.has_assignment() {
        return Err(Error::MalformedSolution(format!("no assignment (status {:?})", solution.status)));
    }
    let theta = encoding.decode(&solution.values).pruned(model);
    if let Some(&s) = theta.blocked_states(model).first() {
        return Err(Error::MalformedSolution(format!("reachable state {s} allows no action")));
    }
    Ok(theta)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthesisConfig {
    pub time_limit: Option<Duration>,
    pub gap: f64,
    /// Overrides the computed big-M constant.
    pub big_m: Option<f64>,
    pub scope: PenaltyScope,
    pub tol: f64,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        SynthesisConfig {
            time_limit: None,
            gap: 1e-9,
            big_m: None,
            scope: PenaltyScope::Reachable,
            tol: SOUNDNESS_TOL,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub bounds_secs: f64,
    pub encode_secs: f64,
    pub solve_secs: f64,
    pub verify_secs: f64,
    pub total_secs: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthesisResult {
    pub theta: MultiStrategy,
    pub penalty: usize,
    /// Per-objective min over compliant strategies at the initial state,
    /// original sign, from the independent check.
    pub mu0: Vec<f64>,
    /// Per-objective max, as `mu0`.
    pub nu0: Vec<f64>,
    /// The same quantities as read off the MILP variables.
    pub milp_mu0: Vec<f64>,
    pub milp_nu0: Vec<f64>,
    pub bounds: ObjectiveBounds,
    pub big_m: f64,
    pub soundness: SoundnessReport,
    pub status: SolveStatus,
    /// Solver proved optimality and the soundness check passed.
    pub optimal: bool,
    pub objective: f64,
    pub scope: PenaltyScope,
    pub size: EncodingSize,
    pub nodes: usize,
    pub timings: Timings,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl SynthesisResult {
    /// Reachable states allowing at least two actions.
    pub fn permissive_states(&self, model: &MdpModel) -> Vec<usize> {
        reachable_states(model, &self.theta)
            .into_iter()
            .filter(|&s| self.theta.allowed(s).len() >= 2)
            .collect()
    }

    /// The external JSON result document, keyed by state and action names.
    pub fn to_document(&self, model: &MdpModel, property: &MultiObjectiveProperty) -> Value {
        let ms: BTreeMap<String, Vec<String>> = self
            .theta
            .to_map()
            .into_iter()
            .map(|(s, acts)| {
                let names = acts
                    .into_iter()
                    .map(|a| model.actions(s)[a].name.clone())
                    .collect();
                (model.state_name(s).to_string(), names)
            })
            .collect();
        let names: Vec<&str> = property.objectives().iter().map(|o| o.name.as_str()).collect();
        json!({
            "multiStrategy": ms,
            "penalty": self.penalty,
            "objectives": names,
            "bounds": {"lower": self.bounds.lower, "upper": self.bounds.upper},
            "mu0": self.mu0,
            "nu0": self.nu0,
            "sound": self.soundness.pass,
            "soundness": self.soundness,
            "permissiveStates": self.permissive_states(model)
                .into_iter()
                .map(|s| model.state_name(s).to_string())
                .collect::<Vec<_>>(),
            "solver": {
                "status": self.status,
                "optimal": self.optimal,
                "objective": self.objective,
                "bigM": self.big_m,
                "scope": self.scope,
                "binaries": self.size.binaries,
                "continuous": self.size.continuous,
                "constraints": self.size.constraints,
                "nodes": self.nodes,
                "timings": self.timings,
            },
            "warnings": self.warnings,
        })
    }
}

struct Candidate {
    theta: MultiStrategy,
    report: SoundnessReport,
    milp_mu0: Vec<f64>,
    milp_nu0: Vec<f64>,
    warnings: Vec<String>,
}

fn assess(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    enc: &MilpEncoding,
    solution: &MilpSolution,
    tol: f64,
) -> Result<Candidate> {
    let mut warnings = Vec::new();
    let raw = enc.decode(&solution.values);
    if let Err(s) = check_reachability_rows(model, &raw, enc.c, enc.scope) {
        warnings.push(format!("decoded allowed sets violate the reachability rows at state {s}"));
    }
    let theta = extract_multistrategy(model, enc, solution)?;
    let report = verify_soundness(model, property, &theta, &enc.bounds, tol)?;
    let (mu, nu) = enc.initial_values(&solution.values);
    let (mut milp_mu0, mut milp_nu0) = (Vec::new(), Vec::new());
    for (i, obj) in property.objectives().iter().enumerate() {
        let (lo, hi) = to_original(obj.direction, mu[i], nu[i]);
        milp_mu0.push(lo);
        milp_nu0.push(hi);
    }
    Ok(Candidate {
        theta,
        report,
        milp_mu0,
        milp_nu0,
        warnings,
    })
}

/// Synthesizes an optimally permissive multi-strategy sound for the bounds
/// induced by `iwv`.
pub fn synthesize(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    iwv: &IntervalWeightVector,
    config: &SynthesisConfig,
) -> Result<SynthesisResult> {
    synthesize_with_callback(model, property, iwv, config, &mut |_| ControlFlow::Continue(()))
}

/// As [`synthesize`]; `on_incumbent` sees each improving solution that
/// passed the soundness check and may stop the search early.
pub fn synthesize_with_callback(
    model: &MdpModel,
    property: &MultiObjectiveProperty,
    iwv: &IntervalWeightVector,
    config: &SynthesisConfig,
    on_incumbent: &mut dyn FnMut(&SynthesisResult) -> ControlFlow<()>,
) -> Result<SynthesisResult> {
    let start = Instant::now();
    validate_model(model).into_result()?;
    if iwv.len() != property.len() {
        return Err(Error::DimensionMismatch {
            expected: property.len(),
            got: iwv.len(),
        });
    }
    let mut timings = Timings::default();
    let t = Instant::now();
    let bounds = compute_bounds(model, property, iwv)?;
    timings.bounds_secs = t.elapsed().as_secs_f64();

    let t = Instant::now();
    let c = match config.big_m {
        Some(c) => c,
        None => big_m_constant(model, property)?,
    };
    let enc = encode_with_scope(model, property, &bounds, c, config.scope)?;
    timings.encode_secs = t.elapsed().as_secs_f64();

    let solver_cfg = SolverConfig {
        time_limit: config.time_limit,
        gap: config.gap,
        ..SolverConfig::default()
    };
    let build = |sol: &MilpSolution, cand: Candidate, timings: &Timings| SynthesisResult {
        penalty: permissivity(model, &cand.theta),
        theta: cand.theta,
        mu0: cand.report.objectives.iter().map(|o| o.min).collect(),
        nu0: cand.report.objectives.iter().map(|o| o.max).collect(),
        milp_mu0: cand.milp_mu0,
        milp_nu0: cand.milp_nu0,
        bounds: bounds.clone(),
        big_m: c,
        optimal: sol.status == SolveStatus::Optimal && cand.report.pass,
        soundness: cand.report,
        status: sol.status,
        objective: sol.objective,
        scope: config.scope,
        size: enc.size(),
        nodes: sol.nodes,
        timings: timings.clone(),
        warnings: cand.warnings,
    };

    let t = Instant::now();
    let mut last_sound: Option<SynthesisResult> = None;
    let mut failure: Option<Error> = None;
    let solution = solve_with_callback(&enc.milp, &solver_cfg, &mut |sol| {
        match assess(model, property, &enc, sol, config.tol) {
            Ok(cand) if cand.report.pass => {
                let res = build(sol, cand, &timings);
                let flow = on_incumbent(&res);
                last_sound = Some(res);
                flow
            }
            Ok(_) => ControlFlow::Continue(()),
            Err(e) => {
                failure = Some(e);
                ControlFlow::Break(())
            }
        }
    });
    timings.solve_secs = t.elapsed().as_secs_f64();
    if let Some(e) = failure {
        return Err(e);
    }

    let t = Instant::now();
    let mut result = match solution.status {
        SolveStatus::Optimal => {
            let cand = assess(model, property, &enc, &solution, config.tol)?;
            if !cand.report.pass {
                return Err(Error::Synthesis(
                    "optimal MILP solution failed the independent soundness check".into(),
                ));
            }
            build(&solution, cand, &timings)
        }
        SolveStatus::Incumbent => match last_sound {
            Some(mut res) => {
                res.status = SolveStatus::Incumbent;
                res.optimal = false;
                res.nodes = solution.nodes;
                res
            }
            None => return Err(Error::Synthesis("search stopped without a sound incumbent".into())),
        },
        SolveStatus::Timeout => {
            return Err(Error::Synthesis("time limit reached without a sound incumbent".into()))
        }
        SolveStatus::Infeasible => {
            return Err(Error::Synthesis(
                "MILP infeasible although every bound is attained by some strategy".into(),
            ))
        }
        SolveStatus::Unbounded | SolveStatus::NumericalFailure => {
            return Err(Error::Synthesis(format!("MILP solver failed: {:?}", solution.status)))
        }
    };
    if result.optimal {
        for i in 0..property.len() {
            let dmu = (result.milp_mu0[i] - result.mu0[i]).abs();
            let dnu = (result.milp_nu0[i] - result.nu0[i]).abs();
            if dmu.max(dnu) > CROSS_CHECK_TOL {
                result.warnings.push(format!(
                    "objective {i}: MILP bounds [{}, {}] differ from recomputed [{}, {}]",
                    result.milp_mu0[i], result.milp_nu0[i], result.mu0[i], result.nu0[i]
                ));
            }
        }
    }
    timings.verify_secs = t.elapsed().as_secs_f64();
    timings.total_secs = start.elapsed().as_secs_f64();
    result.timings = timings;
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::two_road;
    use crate::milp::{solve, Relation};

    fn prop(m: &MdpModel) -> MultiObjectiveProperty {
        MultiObjectiveProperty::parse(m, "dist:min,risk:min").unwrap()
    }

    fn theta(sets: &[&[usize]]) -> MultiStrategy {
        MultiStrategy {
            allowed: sets.iter().map(|s| s.iter().copied().collect()).collect(),
        }
    }

    fn b(lower: [f64; 2], upper: [f64; 2]) -> ObjectiveBounds {
        ObjectiveBounds::new(lower.to_vec(), upper.to_vec()).unwrap()
    }

    #[test]
    fn two_road_counts() {
        let m = two_road();
        let enc = encode(&m, &prop(&m), &b([1.0, 0.0], [2.0, 1.0]), 3.0).unwrap();
        let size = enc.size();
        assert_eq!((size.binaries, size.continuous, size.constraints), (3, 8, 21));
        assert_eq!(size, EncodingSize::predict(&m, 2, PenaltyScope::AllStates));
        let enc = encode_with_scope(&m, &prop(&m), &b([1.0, 0.0], [2.0, 1.0]), 3.0, PenaltyScope::Reachable)
            .unwrap();
        assert_eq!(enc.size().constraints, 19);
    }

    #[test]
    fn encode_rejects_bad_inputs() {
        let m = two_road();
        let p = prop(&m);
        assert!(encode(&m, &p, &b([1.0, 0.0], [2.0, 1.0]), 2.0).is_err());
        assert!(encode(&m, &p, &b([1.0, 0.0], [f64::INFINITY, 1.0]), 3.0).is_err());
    }

    #[test]
    fn recursion_row_matches_worked_example() {
        // s0 --west--> s1 w.p. 0.9, stays w.p. 0.1, cost 1.
        let mut m = MdpModel::new(3, 0).unwrap();
        m.add_action(0, "west", vec![(1, 0.9), (0, 0.1)]).unwrap();
        m.add_action(1, "go", vec![(2, 1.0)]).unwrap();
        m.set_end(2, true).unwrap();
        let d = m.add_reward("dist");
        let r = m.add_reward("risk");
        for (s, a) in [(0, 0), (1, 0)] {
            m.set_reward(d, s, a, 1.0).unwrap();
            m.set_reward(r, s, a, 0.0).unwrap();
        }
        let p = MultiObjectiveProperty::parse(&m, "dist:min,risk:min").unwrap();
        let c = 10.0;
        let enc = encode(&m, &p, &b([0.0, 0.0], [5.0, 1.0]), c).unwrap();
        let row = enc.milp.constraints().iter().find(|r| r.name == "rmin_0_0_0").unwrap();
        // μ₀ ≤ 0.9 μ₁ + 0.1 μ₀ + 1 + c(1 − η)  ⇔  0.9 μ₀ − 0.9 μ₁ + c η ≤ 1 + c
        let coef = |name: &str| {
            let v = enc.milp.var(name).unwrap();
            row.terms.iter().find(|(x, _)| *x == v).map(|t| t.1).unwrap()
        };
        assert!((coef("mu_0_0") - 0.9).abs() < 1e-15);
        assert_eq!(coef("mu_0_1"), -0.9);
        assert_eq!(coef("eta_0_0"), c);
        assert_eq!(row.relation, Relation::Le);
        assert_eq!(row.rhs, 1.0 + c);
    }

    #[test]
    fn permissivity_examples() {
        let m = two_road();
        assert_eq!(permissivity(&m, &MultiStrategy::full(&m)), 0);
        assert_eq!(permissivity(&m, &theta(&[&[0], &[0], &[]])), 1);
        assert_eq!(permissivity(&m, &theta(&[&[0], &[], &[]])), 1);

        let mut one = MdpModel::new(2, 0).unwrap();
        for k in 0..3 {
            one.add_action(0, format!("a{k}"), vec![(1, 1.0)]).unwrap();
        }
        one.set_end(1, true).unwrap();
        assert_eq!(permissivity(&one, &theta(&[&[1], &[]])), 2);
    }

    #[test]
    fn soundness_examples() {
        let m = two_road();
        let p = prop(&m);
        let wide = b([1.0, 0.0], [2.0, 1.0]);
        assert!(verify_soundness(&m, &p, &MultiStrategy::full(&m), &wide, 1e-6).unwrap().pass);
        assert!(verify_soundness(&m, &p, &theta(&[&[0], &[0], &[]]), &wide, 1e-6).unwrap().pass);
        let point = b([1.0, 1.0], [1.0, 1.0]);
        let r = verify_soundness(&m, &p, &theta(&[&[1], &[0], &[]]), &point, 1e-6).unwrap();
        assert!(!r.pass);
        assert!(r.objectives.iter().all(|o| !(o.lower_ok && o.upper_ok)));
    }

    #[test]
    fn extraction_decodes_and_prunes() {
        let m = two_road();
        let enc = encode(&m, &prop(&m), &b([1.0, 0.0], [2.0, 1.0]), 3.0).unwrap();
        let mut values = vec![0.0; enc.milp.num_vars()];
        values[enc.eta[0][0].0] = 1.0;
        values[enc.eta[1][0].0] = 1.0;
        let sol = MilpSolution {
            status: SolveStatus::Optimal,
            values: values.clone(),
            objective: 0.0,
            bound: 0.0,
            nodes: 1,
            wall_time_secs: 0.0,
        };
        assert_eq!(extract_multistrategy(&m, &enc, &sol).unwrap(), theta(&[&[0], &[], &[]]));
        values[enc.eta[0][0].0] = 0.0;
        values[enc.eta[0][1].0] = 1.0;
        values[enc.eta[1][0].0] = 0.0;
        let bad = MilpSolution { values, ..sol };
        assert!(matches!(extract_multistrategy(&m, &enc, &bad), Err(Error::MalformedSolution(_))));
    }

    #[test]
    fn island_cycle_is_pruned() {
        // s0 -> end; s1 <-> s2 each with an exit, unreachable from s0.
        let mut m = MdpModel::new(4, 0).unwrap();
        m.add_action(0, "go", vec![(3, 1.0)]).unwrap();
        m.add_action(1, "to2", vec![(2, 1.0)]).unwrap();
        m.add_action(1, "out", vec![(3, 1.0)]).unwrap();
        m.add_action(2, "to1", vec![(1, 0.5), (3, 0.5)]).unwrap();
        m.set_end(3, true).unwrap();
        let r0 = m.add_reward("a");
        let r1 = m.add_reward("b");
        let _ = (r0, r1);
        let p = MultiObjectiveProperty::parse(&m, "a:min,b:min").unwrap();
        let enc = encode(&m, &p, &b([0.0, 0.0], [0.0, 0.0]), 3.0).unwrap();
        let mut values = vec![0.0; enc.milp.num_vars()];
        for v in [enc.eta[0][0], enc.eta[1][0], enc.eta[2][0]] {
            values[v.0] = 1.0;
        }
        let raw = enc.decode(&values);
        assert!(check_reachability_rows(&m, &raw, 3.0, PenaltyScope::AllStates).is_ok());
        assert!(enc.milp.check_assignment(&values, 1e-6).is_ok());
        let sol = MilpSolution {
            status: SolveStatus::Optimal,
            values,
            objective: 0.0,
            bound: 0.0,
            nodes: 1,
            wall_time_secs: 0.0,
        };
        let th = extract_multistrategy(&m, &enc, &sol).unwrap();
        assert!(th.allowed(1).is_empty() && th.allowed(2).is_empty());
    }

    #[test]
    fn two_road_end_to_end() {
        let m = two_road();
        let p = prop(&m);
        let res = synthesize(&m, &p, &"0.2:0.8,0.2:0.8".parse().unwrap(), &SynthesisConfig::default()).unwrap();
        assert_eq!(res.theta.allowed(0).iter().copied().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(res.penalty, 0);
        assert!(res.optimal && res.soundness.pass && res.warnings.is_empty());
        assert_eq!((res.bounds.lower.clone(), res.bounds.upper.clone()), (vec![1.0, 0.0], vec![2.0, 1.0]));
        let spread: f64 = res.nu0.iter().zip(&res.mu0).map(|(n, m)| n - m).sum();
        assert!((spread - 2.0).abs() < 1e-9);
        let doc = res.to_document(&m, &p);
        assert_eq!(doc["multiStrategy"]["s0"], json!(["short", "long"]));
        assert_eq!(doc["penalty"], json!(0));
    }

    #[test]
    fn two_road_narrow_interval_keeps_short_only() {
        let m = two_road();
        let p = prop(&m);
        let res =
            synthesize(&m, &p, &"0.75:0.8,0.2:0.25".parse().unwrap(), &SynthesisConfig::default()).unwrap();
        assert_eq!(res.theta.allowed(0).iter().copied().collect::<Vec<_>>(), vec![0]);
        assert_eq!(res.penalty, 1);
        assert_eq!(res.bounds.lower, vec![1.0, 1.0]);
    }

    #[test]
    fn verbatim_scope_also_solves_two_road() {
        let m = two_road();
        let cfg = SynthesisConfig {
            scope: PenaltyScope::AllStates,
            ..SynthesisConfig::default()
        };
        let res = synthesize(&m, &prop(&m), &"0.2:0.8,0.2:0.8".parse().unwrap(), &cfg).unwrap();
        assert_eq!(res.penalty, 0);
        let enc = encode(&m, &prop(&m), &res.bounds, res.big_m).unwrap();
        let sol = solve(&enc.milp, &SolverConfig::default());
        assert_eq!(sol.status, SolveStatus::Optimal);
        assert!((sol.objective - 2.0).abs() < 1e-9);
    }

    #[test]
    fn callback_sees_only_sound_incumbents() {
        let m = two_road();
        let mut seen = Vec::new();
        let res = synthesize_with_callback(
            &m,
            &prop(&m),
            &"0.2:0.8,0.2:0.8".parse().unwrap(),
            &SynthesisConfig::default(),
            &mut |r| {
                seen.push(r.soundness.pass);
                ControlFlow::Continue(())
            },
        )
        .unwrap();
        assert!(!seen.is_empty() && seen.iter().all(|&p| p));
        assert!(res.optimal);
    }
}
