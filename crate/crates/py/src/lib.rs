//! Python bindings: models, interval weight vectors, elicitation, bounds,
//! synthesis and LP export.

use std::collections::BTreeMap;
use std::time::Duration;

use prefsynth_core::analysis::{
    compute_bounds as core_bounds, extreme_points, weighted_value_iteration, BigM, MultiObjectiveProperty,
    ObjectiveBounds, DEFAULT_VI_TOL,
};
use prefsynth_core::fixtures;
use prefsynth_core::gridworld::{grid_to_mdp, parse_grid};
use prefsynth_core::io::{model_from_json, model_to_json};
use prefsynth_core::mdp::{validate_model, MdpModel, MultiStrategy};
use prefsynth_core::milp::export_lp as core_export_lp;
use prefsynth_core::preferences::{aggregate_to_interval, Elicitation, IntervalWeightVector, WeightVector};
use prefsynth_core::synthesis::{
    encode_with_scope, synthesize as core_synthesize, verify_soundness as core_verify, PenaltyScope, SynthesisConfig,
    SOUNDNESS_TOL,
};
use prefsynth_core::Error;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

create_exception!(prefsynth, PrefsynthError, PyValueError);

fn err(e: Error) -> PyErr {
    PrefsynthError::new_err(e.to_string())
}

fn parse_scope(text: &str) -> PyResult<PenaltyScope> {
    match text {
        "reachable" => Ok(PenaltyScope::Reachable),
        "all_states" => Ok(PenaltyScope::AllStates),
        other => Err(PyValueError::new_err(format!(
            "scope must be `reachable` or `all_states`, got `{other}`"
        ))),
    }
}

/// An MDP with named reward structures.
#[pyclass(name = "Model", module = "prefsynth", frozen)]
pub struct PyModel {
    inner: MdpModel,
}

#[pymethods]
impl PyModel {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyModel {
            inner: model_from_json(text).map_err(err)?,
        })
    }

    /// The two-route example model with `dist` and `risk` rewards.
    #[staticmethod]
    fn two_road() -> Self {
        PyModel {
            inner: fixtures::two_road(),
        }
    }

    /// The navigation MDP of a grid map over `. # S D F P`.
    #[staticmethod]
    #[pyo3(signature = (text, motion_noise = None))]
    fn from_grid(text: &str, motion_noise: Option<f64>) -> PyResult<Self> {
        let mut grid = parse_grid(text).map_err(err)?;
        if let Some(noise) = motion_noise {
            grid = grid.with_motion_noise(noise).map_err(err)?;
        }
        Ok(PyModel {
            inner: grid_to_mdp(&grid).map_err(err)?.model,
        })
    }

    fn to_json(&self) -> String {
        model_to_json(&self.inner)
    }

    #[getter]
    fn num_states(&self) -> usize {
        self.inner.num_states()
    }

    #[getter]
    fn initial(&self) -> usize {
        self.inner.initial()
    }

    fn state_names(&self) -> Vec<String> {
        (0..self.inner.num_states()).map(|s| self.inner.state_name(s).to_string()).collect()
    }

    fn action_names(&self, state: usize) -> PyResult<Vec<String>> {
        if state >= self.inner.num_states() {
            return Err(err(Error::StateOutOfRange(state)));
        }
        Ok(self.inner.actions(state).iter().map(|a| a.name.clone()).collect())
    }

    fn reward_names(&self) -> Vec<String> {
        self.inner.rewards().iter().map(|r| r.name.clone()).collect()
    }

    /// Violation messages; empty when the model is valid.
    fn validate(&self) -> Vec<String> {
        validate_model(&self.inner).violations.iter().map(ToString::to_string).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "Model(states={}, choices={}, rewards={:?})",
            self.inner.num_states(),
            self.inner.num_choices(),
            self.reward_names()
        )
    }
}

/// Per-objective weight intervals intersecting the probability simplex.
#[pyclass(name = "IntervalWeightVector", module = "prefsynth", frozen)]
pub struct PyInterval {
    inner: IntervalWeightVector,
}

#[pymethods]
impl PyInterval {
    #[new]
    fn new(lower: Vec<f64>, upper: Vec<f64>) -> PyResult<Self> {
        Ok(PyInterval {
            inner: IntervalWeightVector::new(lower, upper).map_err(err)?,
        })
    }

    /// Parses `lo:hi,lo:hi,...`.
    #[staticmethod]
    fn parse(text: &str) -> PyResult<Self> {
        Ok(PyInterval {
            inner: text.parse().map_err(err)?,
        })
    }

    #[getter]
    fn lower(&self) -> Vec<f64> {
        self.inner.lower().to_vec()
    }

    #[getter]
    fn upper(&self) -> Vec<f64> {
        self.inner.upper().to_vec()
    }

    fn extreme_points(&self) -> PyResult<Vec<Vec<f64>>> {
        Ok(extreme_points(&self.inner)
            .map_err(err)?
            .into_iter()
            .map(|w| w.as_slice().to_vec())
            .collect())
    }

    fn contains(&self, weights: Vec<f64>) -> PyResult<bool> {
        Ok(self.inner.contains(&WeightVector::new(weights).map_err(err)?))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("IntervalWeightVector({})", self.inner)
    }
}

fn property(model: &PyModel, text: &str) -> PyResult<MultiObjectiveProperty> {
    MultiObjectiveProperty::parse(&model.inner, text).map_err(err)
}

/// Weights from one elicitation payload, `{"method": ..., "data": ...}`.
#[pyfunction]
fn elicit(payload: &str) -> PyResult<Vec<f64>> {
    let e: Elicitation = serde_json::from_str(payload).map_err(|e| PrefsynthError::new_err(e.to_string()))?;
    Ok(e.weights().map_err(err)?.weights.as_slice().to_vec())
}

/// Componentwise min/max of weight vectors.
#[pyfunction]
fn aggregate(vectors: Vec<Vec<f64>>) -> PyResult<PyInterval> {
    let ws = vectors
        .into_iter()
        .map(WeightVector::new)
        .collect::<prefsynth_core::Result<Vec<_>>>()
        .map_err(err)?;
    Ok(PyInterval {
        inner: aggregate_to_interval(&ws).map_err(err)?,
    })
}

/// `(lower, upper)` objective bounds induced by an interval.
#[pyfunction]
fn compute_bounds(model: &PyModel, prop: &str, interval: &PyInterval) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let b = core_bounds(&model.inner, &property(model, prop)?, &interval.inner).map_err(err)?;
    Ok((b.lower, b.upper))
}

/// Objective values of the strategy optimal for one weight vector.
#[pyfunction]
fn weighted_point(model: &PyModel, prop: &str, weights: Vec<f64>) -> PyResult<Vec<f64>> {
    let w = WeightVector::new(weights).map_err(err)?;
    let p = weighted_value_iteration(&model.inner, &property(model, prop)?, &w, DEFAULT_VI_TOL).map_err(err)?;
    Ok(p.point)
}

/// Synthesizes an optimally permissive multi-strategy; returns the result
/// document as a dict.
#[pyfunction]
#[pyo3(signature = (model, prop, interval, time_limit = None, scope = "reachable"))]
fn synthesize(
    py: Python<'_>,
    model: &PyModel,
    prop: &str,
    interval: &PyInterval,
    time_limit: Option<f64>,
    scope: &str,
) -> PyResult<Py<PyAny>> {
    let p = property(model, prop)?;
    let config = SynthesisConfig {
        time_limit: time_limit.map(Duration::from_secs_f64),
        scope: parse_scope(scope)?,
        ..SynthesisConfig::default()
    };
    let inner = &model.inner;
    let iwv = &interval.inner;
    let doc = py
        .detach(|| core_synthesize(inner, &p, iwv, &config).map(|r| r.to_document(inner, &p).to_string()))
        .map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (doc,))?.unbind())
}

/// Whether the multi-strategy `{state: [action, ...]}` keeps every
/// objective within `[lower, upper]`.
#[pyfunction]
fn verify_soundness(
    model: &PyModel,
    prop: &str,
    theta: BTreeMap<usize, Vec<usize>>,
    lower: Vec<f64>,
    upper: Vec<f64>,
) -> PyResult<bool> {
    let mut ms = MultiStrategy::empty(model.inner.num_states());
    for (s, acts) in theta {
        if s >= model.inner.num_states() {
            return Err(err(Error::StateOutOfRange(s)));
        }
        ms.set(s, acts);
    }
    let bounds = ObjectiveBounds::new(lower, upper).map_err(err)?;
    let report = core_verify(&model.inner, &property(model, prop)?, &ms, &bounds, SOUNDNESS_TOL).map_err(err)?;
    Ok(report.pass)
}

/// The synthesis MILP in LP format.
#[pyfunction]
#[pyo3(signature = (model, prop, interval, big_m = None, scope = "all_states"))]
fn export_lp(model: &PyModel, prop: &str, interval: &PyInterval, big_m: Option<f64>, scope: &str) -> PyResult<String> {
    let p = property(model, prop)?;
    let bounds = core_bounds(&model.inner, &p, &interval.inner).map_err(err)?;
    let c = match big_m {
        Some(c) => c,
        None => BigM::compute(&model.inner, &p).map_err(err)?.constant(),
    };
    let enc = encode_with_scope(&model.inner, &p, &bounds, c, parse_scope(scope)?).map_err(err)?;
    Ok(core_export_lp(&enc.milp))
}

#[pymodule]
pub fn prefsynth(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModel>()?;
    m.add_class::<PyInterval>()?;
    m.add_function(wrap_pyfunction!(elicit, m)?)?;
    m.add_function(wrap_pyfunction!(aggregate, m)?)?;
    m.add_function(wrap_pyfunction!(compute_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_point, m)?)?;
    m.add_function(wrap_pyfunction!(synthesize, m)?)?;
    m.add_function(wrap_pyfunction!(verify_soundness, m)?)?;
    m.add_function(wrap_pyfunction!(export_lp, m)?)?;
    m.add("PrefsynthError", m.py().get_type::<PrefsynthError>())?;
    Ok(())
}
