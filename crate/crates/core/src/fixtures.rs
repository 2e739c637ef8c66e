//! Small hand-built models used by examples, tests and the service.

use crate::mdp::MdpModel;

/// Two routes to the goal `g`: `short` goes straight there through a fire
/// zone, `long` detours via `s1`.
///
/// Rewards: `dist` charges 1 per move; `risk` charges 1 for `short` only.
pub fn two_road() -> MdpModel {
    let mut m = MdpModel::new(3, 0).expect("static fixture");
    m.set_state_name(0, "s0").unwrap();
    m.set_state_name(1, "s1").unwrap();
    m.set_state_name(2, "g").unwrap();
    m.add_action(0, "short", vec![(2, 1.0)]).unwrap();
    m.add_action(0, "long", vec![(1, 1.0)]).unwrap();
    m.add_action(1, "move", vec![(2, 1.0)]).unwrap();
    m.set_end(2, true).unwrap();
    let dist = m.add_reward("dist");
    let risk = m.add_reward("risk");
    m.set_reward(dist, 0, 0, 1.0).unwrap();
    m.set_reward(dist, 0, 1, 1.0).unwrap();
    m.set_reward(dist, 1, 0, 1.0).unwrap();
    m.set_reward(risk, 0, 0, 1.0).unwrap();
    m
}

/// Three routes from `S` to `D`: straight through the fire cell or around
/// it above or below.
pub const GRID_3X3: &str = "...\nSFD\n...";

/// Branches at the start and at the cell east of it.
pub const TWO_ROUTE_GRID: &str = "S.D\n...";

/// A 5×5 map with walls, fire cells and packages.
pub const DELIVERY_GRID: &str = "S..P.\n.#F#.\n.....\n.F#P.\n...FD";

/// Named grid maps served to clients.
pub const GRID_MAPS: [(&str, &str); 3] = [("grid3x3", GRID_3X3), ("two-route", TWO_ROUTE_GRID), ("delivery", DELIVERY_GRID)];
