//! Synthesis requests and the documents they produce.

use std::time::Duration;

use prefsynth_core::analysis::weighted_value_iteration;
use prefsynth_core::gridworld::{render_overlay, OverlayInput};
use prefsynth_core::io::ModelDoc;
use prefsynth_core::mdp::{MdpModel, MultiStrategy, Strategy};
use prefsynth_core::preferences::{IntervalWeightVector, WeightVector};
use prefsynth_core::synthesis::{synthesize, PenaltyScope, SynthesisConfig, SynthesisResult};
use prefsynth_core::{analysis::DEFAULT_VI_TOL, Error};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::error::ServiceError;
use crate::scenario::{grid_scenario, load_map, model_scenario, Scenario};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntervalDoc {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

/// Exactly one of `map`, `model` and `grid` names the model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct SynthesisRequest {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub map: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub model: Option<ModelDoc>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub motion_noise: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub property: Option<String>,
    pub interval: IntervalDoc,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub time_limit_secs: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scope: Option<PenaltyScope>,
}

/// Loads a scenario from a map id, a model document or grid text.
pub fn resolve_source(
    map: Option<&str>,
    model: Option<&ModelDoc>,
    grid: Option<&str>,
    motion_noise: Option<f64>,
    property: Option<&str>,
) -> Result<Scenario, ServiceError> {
    let mut scenario = match (map, model, grid) {
        (Some(id), None, None) => load_map(id, motion_noise).ok_or_else(|| ServiceError::NotFound(format!("unknown map `{id}`")))??,
        (None, Some(doc), None) => model_scenario(doc.clone())?,
        (None, None, Some(text)) => grid_scenario(text, motion_noise)?,
        _ => return Err(ServiceError::BadRequest("give exactly one of `map`, `model` and `grid`".into())),
    };
    if let Some(p) = property {
        scenario.set_property(p)?;
    }
    Ok(scenario)
}

impl SynthesisRequest {
    /// Resolves the model and checks the interval against it.
    pub fn prepare(&self) -> Result<(Scenario, IntervalWeightVector), ServiceError> {
        let scenario = resolve_source(
            self.map.as_deref(),
            self.model.as_ref(),
            self.grid.as_deref(),
            self.motion_noise,
            self.property.as_deref(),
        )?;
        let iwv = IntervalWeightVector::new(self.interval.lower.clone(), self.interval.upper.clone())?;
        if iwv.len() != scenario.property.len() {
            return Err(Error::DimensionMismatch {
                expected: scenario.property.len(),
                got: iwv.len(),
            }
            .into());
        }
        self.config()?;
        Ok((scenario, iwv))
    }

    pub fn config(&self) -> Result<SynthesisConfig, ServiceError> {
        let mut config = SynthesisConfig::default();
        if let Some(t) = self.time_limit_secs {
            if !(t.is_finite() && t >= 0.0) {
                return Err(ServiceError::BadRequest(format!("invalid time limit {t}")));
            }
            config.time_limit = Some(Duration::from_secs_f64(t));
        }
        if let Some(scope) = self.scope {
            config.scope = scope;
        }
        Ok(config)
    }
}

/// Runs a request to completion and returns its result document.
pub fn run_synthesis(request: &SynthesisRequest) -> Result<Value, ServiceError> {
    let (scenario, iwv) = request.prepare()?;
    let result = synthesize(&scenario.model, &scenario.property, &iwv, &request.config()?)?;
    synthesis_document(&scenario, &result)
}

/// A strategy complying with `theta`: the first allowed action everywhere.
pub fn representative_strategy(model: &MdpModel, theta: &MultiStrategy) -> Strategy {
    Strategy::new(
        (0..model.num_states())
            .map(|s| (!model.is_end(s)).then(|| theta.allowed(s).first().copied().unwrap_or(0)))
            .collect(),
    )
}

/// The synthesis document plus, for grid maps, the multi-strategy overlay
/// and the overlay of one compliant strategy.
pub fn synthesis_document(scenario: &Scenario, result: &SynthesisResult) -> Result<Value, ServiceError> {
    let mut doc = result.to_document(&scenario.model, &scenario.property);
    if let Some(g) = &scenario.grid {
        let overlay = render_overlay(g, OverlayInput::Multi(&result.theta))?;
        let sigma = representative_strategy(&scenario.model, &result.theta);
        let single = render_overlay(g, OverlayInput::Single(&sigma))?;
        doc["overlay"] = serde_json::to_value(overlay).expect("overlay serializes");
        doc["strategyOverlay"] = serde_json::to_value(single).expect("overlay serializes");
    }
    Ok(doc)
}

/// One weighted Pareto point with its strategy and, for grids, its route.
pub fn pareto_document(scenario: &Scenario, w: &WeightVector) -> Result<Value, ServiceError> {
    let m = &scenario.model;
    let pt = weighted_value_iteration(m, &scenario.property, w, DEFAULT_VI_TOL)?;
    let strategy: serde_json::Map<String, Value> = m
        .non_end_states()
        .filter_map(|s| pt.strategy.action(s).map(|a| (m.state_name(s).to_string(), json!(m.actions(s)[a].name))))
        .collect();
    let mut doc = json!({
        "weights": w.as_slice(),
        "objectives": scenario.objective_names(),
        "point": pt.point,
        "strategy": strategy,
        "ties": pt.ties.iter().map(|&s| m.state_name(s)).collect::<Vec<_>>(),
    });
    if let Some(g) = &scenario.grid {
        let route = render_overlay(g, OverlayInput::Single(&pt.strategy))?;
        doc["route"] = serde_json::to_value(route).expect("overlay serializes");
    }
    Ok(doc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn request(map: &str, lower: Vec<f64>, upper: Vec<f64>) -> SynthesisRequest {
        SynthesisRequest {
            map: Some(map.into()),
            model: None,
            grid: None,
            motion_noise: None,
            property: None,
            interval: IntervalDoc { lower, upper },
            time_limit_secs: None,
            scope: None,
        }
    }

    #[test]
    fn two_road_request() {
        let doc = run_synthesis(&request("two-road", vec![0.2, 0.2], vec![0.8, 0.8])).unwrap();
        assert_eq!(doc["penalty"], 0);
        assert_eq!(doc["multiStrategy"]["s0"], json!(["short", "long"]));
        assert!(doc.get("overlay").is_none());
    }

    #[test]
    fn grid_request_has_overlays() {
        let doc = run_synthesis(&request("grid3x3", vec![0.1, 0.1], vec![0.9, 0.9])).unwrap();
        let starred: Vec<&Value> = doc["overlay"]["cells"]
            .as_array()
            .unwrap()
            .iter()
            .filter(|c| c["permissive"] == true)
            .collect();
        assert_eq!(starred.len(), doc["permissiveStates"].as_array().unwrap().len());
        assert_eq!(doc["strategyOverlay"]["routes"].as_array().unwrap().len(), 1);
    }

    #[test]
    fn request_errors() {
        let r = request("two-road", vec![0.7, 0.7], vec![0.9, 0.9]);
        assert!(matches!(r.prepare(), Err(ServiceError::Conflict(_))));
        let r = request("nowhere", vec![0.5, 0.5], vec![0.5, 0.5]);
        assert!(matches!(r.prepare(), Err(ServiceError::NotFound(_))));
        let r = request("two-road", vec![0.2, 0.2, 0.2], vec![0.8, 0.8, 0.8]);
        assert!(matches!(r.prepare(), Err(ServiceError::BadRequest(_))));
        let mut r = request("two-road", vec![0.5, 0.5], vec![0.5, 0.5]);
        r.grid = Some("SD".into());
        assert!(matches!(r.prepare(), Err(ServiceError::BadRequest(_))));
    }
}
