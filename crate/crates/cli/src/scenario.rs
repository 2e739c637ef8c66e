//! Named maps and the model/property pairs requests resolve to.

use prefsynth_core::analysis::{Direction, MultiObjectiveProperty};
use prefsynth_core::fixtures::{two_road, GRID_MAPS};
use prefsynth_core::gridworld::{grid_to_mdp, parse_grid, GridMdp};
use prefsynth_core::io::ModelDoc;
use prefsynth_core::mdp::MdpModel;
use prefsynth_core::Result;
use serde::Serialize;

pub const TWO_ROAD: &str = "two-road";

/// A model, the property to analyse and, for grid maps, the grid behind it.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub model: MdpModel,
    pub property: MultiObjectiveProperty,
    pub grid: Option<GridMdp>,
}

#[derive(Debug, Clone, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MapInfo {
    pub id: String,
    pub kind: &'static str,
    pub states: usize,
    pub objectives: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub width: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub height: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

pub fn map_ids() -> Vec<&'static str> {
    std::iter::once(TWO_ROAD).chain(GRID_MAPS.iter().map(|(id, _)| *id)).collect()
}

/// `None` for unknown ids.
pub fn load_map(id: &str, motion_noise: Option<f64>) -> Option<Result<Scenario>> {
    if id == TWO_ROAD {
        let model = two_road();
        return Some(Scenario::with_default_property(model, None));
    }
    let (_, text) = GRID_MAPS.iter().find(|(m, _)| *m == id)?;
    Some(grid_scenario(text, motion_noise))
}

pub fn grid_scenario(text: &str, motion_noise: Option<f64>) -> Result<Scenario> {
    let mut grid = parse_grid(text)?;
    if let Some(noise) = motion_noise {
        grid = grid.with_motion_noise(noise)?;
    }
    let g = grid_to_mdp(&grid)?;
    Scenario::with_default_property(g.model.clone(), Some(g))
}

pub fn model_scenario(doc: ModelDoc) -> Result<Scenario> {
    Scenario::with_default_property(doc.into_model()?, None)
}

pub fn map_info(id: &str) -> Option<MapInfo> {
    let s = load_map(id, None)?.ok()?;
    Some(MapInfo {
        id: id.to_string(),
        kind: if s.grid.is_some() { "grid" } else { "model" },
        states: s.model.num_states(),
        objectives: s.property.objectives().iter().map(|o| o.name.clone()).collect(),
        width: s.grid.as_ref().map(|g| g.grid.width()),
        height: s.grid.as_ref().map(|g| g.grid.height()),
        text: s.grid.as_ref().map(|g| g.grid.to_string()),
    })
}

impl Scenario {
    /// Grid maps minimize `dist` and `risk` and maximize `packages` when any
    /// package is collectable; other models minimize every reward structure.
    pub fn with_default_property(model: MdpModel, grid: Option<GridMdp>) -> Result<Self> {
        let property = match &grid {
            Some(g) => {
                let collectable = g.model.reward(2).values.iter().flatten().any(|&v| v != 0.0);
                g.property_prefix(if collectable { 3 } else { 2 })?
            }
            None => {
                let names: Vec<&str> = model.rewards().iter().map(|r| r.name.as_str()).collect();
                let pairs: Vec<(&str, Direction)> = names.iter().map(|&n| (n, Direction::Min)).collect();
                MultiObjectiveProperty::new(&model, &pairs)?
            }
        };
        Ok(Scenario { model, property, grid })
    }

    pub fn set_property(&mut self, text: &str) -> Result<()> {
        self.property = MultiObjectiveProperty::parse(&self.model, text)?;
        Ok(())
    }

    pub fn objective_names(&self) -> Vec<String> {
        self.property.objectives().iter().map(|o| o.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_map_loads() {
        for id in map_ids() {
            let s = load_map(id, None).unwrap().unwrap();
            assert!(s.property.len() >= 2, "{id}");
        }
        assert!(load_map("nowhere", None).is_none());
        assert_eq!(map_info("delivery").unwrap().objectives, ["dist", "risk", "packages"]);
        assert_eq!(map_info("grid3x3").unwrap().objectives, ["dist", "risk"]);
        assert_eq!(map_info(TWO_ROAD).unwrap().kind, "model");
    }
}
