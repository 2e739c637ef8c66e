//! Grid-map navigation MDPs and route overlays.
//!
//! A free 4-connected grid contains cycles, under which some strategies
//! never reach the destination. Moves are therefore oriented: a move into a
//! neighbour is offered only when the neighbour lies strictly farther from
//! the start (breadth-first distance) or is the destination. Cells that are
//! unreachable from the start or cannot reach the destination under this
//! orientation are dropped.

use std::collections::{BTreeMap, VecDeque};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::analysis::{Direction, MultiObjectiveProperty};
use crate::error::{Error, Result};
use crate::mdp::{reachable_states, MdpModel, MultiStrategy, Strategy};

/// Default probability of staying put on a move attempt.
pub const DEFAULT_MOTION_NOISE: f64 = 0.1;

const MAX_ROUTES: usize = 32;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Cell {
    Open,
    Wall,
    Start,
    Destination,
    Fire,
    Package,
}

impl Cell {
    fn from_char(c: char) -> Option<Cell> {
        Some(match c {
            '.' => Cell::Open,
            '#' => Cell::Wall,
            'S' => Cell::Start,
            'D' => Cell::Destination,
            'F' => Cell::Fire,
            'P' => Cell::Package,
            _ => return None,
        })
    }

    fn to_char(self) -> char {
        match self {
            Cell::Open => '.',
            Cell::Wall => '#',
            Cell::Start => 'S',
            Cell::Destination => 'D',
            Cell::Fire => 'F',
            Cell::Package => 'P',
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Move {
    North,
    East,
    South,
    West,
}

impl Move {
    pub const ALL: [Move; 4] = [Move::North, Move::East, Move::South, Move::West];

    fn offset(self) -> (isize, isize) {
        match self {
            Move::North => (0, -1),
            Move::East => (1, 0),
            Move::South => (0, 1),
            Move::West => (-1, 0),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Move::North => "north",
            Move::East => "east",
            Move::South => "south",
            Move::West => "west",
        }
    }
}

/// A rectangular grid; `(x, y)` with `y` growing downwards.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridMap {
    width: usize,
    height: usize,
    cells: Vec<Cell>,
    motion_noise: f64,
}

impl GridMap {
    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn motion_noise(&self) -> f64 {
        self.motion_noise
    }

    pub fn with_motion_noise(mut self, noise: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&noise) {
            return Err(Error::Grid(format!("motion noise {noise} outside [0, 1)")));
        }
        self.motion_noise = noise;
        Ok(self)
    }

    pub fn cell(&self, x: usize, y: usize) -> Cell {
        self.cells[y * self.width + x]
    }

    fn find(&self, kind: Cell) -> (usize, usize) {
        let i = self.cells.iter().position(|&c| c == kind).expect("validated");
        (i % self.width, i / self.width)
    }

    pub fn start(&self) -> (usize, usize) {
        self.find(Cell::Start)
    }

    pub fn destination(&self) -> (usize, usize) {
        self.find(Cell::Destination)
    }

    fn step(&self, (x, y): (usize, usize), m: Move) -> Option<(usize, usize)> {
        let (dx, dy) = m.offset();
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        (nx < self.width && ny < self.height && self.cell(nx, ny) != Cell::Wall).then_some((nx, ny))
    }

    /// Mirror image along the vertical axis.
    pub fn reflect_horizontally(&self) -> GridMap {
        let mut cells = Vec::with_capacity(self.cells.len());
        for y in 0..self.height {
            for x in (0..self.width).rev() {
                cells.push(self.cell(x, y));
            }
        }
        GridMap { cells, ..self.clone() }
    }

    /// Breadth-first distance from the start over passable cells.
    fn distances(&self) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.cells.len()];
        let s = self.start();
        dist[s.1 * self.width + s.0] = Some(0);
        let mut queue = VecDeque::from([s]);
        while let Some(p) = queue.pop_front() {
            let d = dist[p.1 * self.width + p.0].expect("queued");
            for m in Move::ALL {
                if let Some(q) = self.step(p, m) {
                    let slot = &mut dist[q.1 * self.width + q.0];
                    if slot.is_none() {
                        *slot = Some(d + 1);
                        queue.push_back(q);
                    }
                }
            }
        }
        dist
    }
}

/// Parses a grid over `. # S D F P`, one row per line.
pub fn parse_grid(text: &str) -> Result<GridMap> {
    let rows: Vec<&str> = text.lines().map(str::trim_end).filter(|l| !l.is_empty()).collect();
    if rows.is_empty() {
        return Err(Error::Grid("empty grid".into()));
    }
    let width = rows[0].chars().count();
    let mut cells = Vec::with_capacity(width * rows.len());
    for (y, row) in rows.iter().enumerate() {
        if row.chars().count() != width {
            return Err(Error::Grid(format!("row {y} has {} cells, expected {width}", row.chars().count())));
        }
        for (x, ch) in row.chars().enumerate() {
            cells.push(Cell::from_char(ch).ok_or_else(|| Error::Grid(format!("unknown cell `{ch}` at ({x}, {y})")))?);
        }
    }
    for (kind, what) in [(Cell::Start, "start"), (Cell::Destination, "destination")] {
        match cells.iter().filter(|&&c| c == kind).count() {
            1 => {}
            0 => return Err(Error::Grid(format!("no {what}"))),
            k => return Err(Error::Grid(format!("duplicate {what} ({k} found)"))),
        }
    }
    Ok(GridMap {
        width,
        height: rows.len(),
        cells,
        motion_noise: DEFAULT_MOTION_NOISE,
    })
}

impl FromStr for GridMap {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        parse_grid(s)
    }
}

impl fmt::Display for GridMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for y in 0..self.height {
            let row: String = (0..self.width).map(|x| self.cell(x, y).to_char()).collect();
            writeln!(f, "{row}")?;
        }
        Ok(())
    }
}

/// The MDP of a grid plus the cell/state correspondence.
#[derive(Debug, Clone)]
pub struct GridMdp {
    pub grid: GridMap,
    pub model: MdpModel,
    /// `(x, y)` of every state.
    pub cells: Vec<(usize, usize)>,
    /// Move taken by every action, `moves[s][a]`.
    pub moves: Vec<Vec<Move>>,
    index: BTreeMap<(usize, usize), usize>,
}

impl GridMdp {
    pub fn state_of(&self, x: usize, y: usize) -> Option<usize> {
        self.index.get(&(x, y)).copied()
    }

    /// `dist:min, risk:min, packages:max`.
    pub fn property(&self) -> MultiObjectiveProperty {
        MultiObjectiveProperty::new(
            &self.model,
            &[
                ("dist", Direction::Min),
                ("risk", Direction::Min),
                ("packages", Direction::Max),
            ],
        )
        .expect("grid rewards are registered")
    }

    /// The first `k` objectives of [`GridMdp::property`].
    pub fn property_prefix(&self, k: usize) -> Result<MultiObjectiveProperty> {
        let all = [
            ("dist", Direction::Min),
            ("risk", Direction::Min),
            ("packages", Direction::Max),
        ];
        MultiObjectiveProperty::new(&self.model, &all[..k.min(3)])
    }
}

/// Builds the navigation MDP: one state per kept cell, one action per
/// oriented move, success with `1 − noise` and staying put otherwise.
/// Rewards are charged per attempt.
pub fn grid_to_mdp(grid: &GridMap) -> Result<GridMdp> {
    let dist = grid.distances();
    let dest = grid.destination();
    let w = grid.width;
    let idx = |(x, y): (usize, usize)| y * w + x;
    if dist[idx(dest)].is_none() {
        return Err(Error::Grid("destination unreachable from start".into()));
    }
    let oriented = |p: (usize, usize)| -> Vec<(Move, (usize, usize))> {
        if p == dest {
            return Vec::new();
        }
        let dp = dist[idx(p)].expect("reachable");
        Move::ALL
            .iter()
            .filter_map(|&m| grid.step(p, m).map(|q| (m, q)))
            .filter(|&(_, q)| q == dest || dist[idx(q)].is_some_and(|dq| dq > dp))
            .collect()
    };

    // Keep cells that can reach the destination along oriented moves.
    let mut keep: Vec<bool> = dist.iter().map(|d| d.is_some()).collect();
    loop {
        let mut changed = false;
        for y in 0..grid.height {
            for x in 0..w {
                let p = (x, y);
                if keep[idx(p)] && p != dest && !oriented(p).iter().any(|&(_, q)| keep[idx(q)]) {
                    keep[idx(p)] = false;
                    changed = true;
                }
            }
        }
        if !changed {
            break;
        }
    }
    if !keep[idx(grid.start())] {
        return Err(Error::Grid("destination unreachable from start".into()));
    }
    // Then restrict to cells reachable from the start.
    let mut seen = vec![false; keep.len()];
    let mut order = Vec::new();
    let mut queue = VecDeque::from([grid.start()]);
    seen[idx(grid.start())] = true;
    while let Some(p) = queue.pop_front() {
        order.push(p);
        for (_, q) in oriented(p) {
            if keep[idx(q)] && !seen[idx(q)] {
                seen[idx(q)] = true;
                queue.push_back(q);
            }
        }
    }
    order.sort_by_key(|&(x, y)| (y, x));
    let index: BTreeMap<(usize, usize), usize> = order.iter().enumerate().map(|(s, &p)| (p, s)).collect();

    let mut model = MdpModel::new(order.len(), index[&grid.start()])?;
    let mut moves = vec![Vec::new(); order.len()];
    let mut rewards: Vec<(usize, usize, [f64; 3])> = Vec::new();
    let noise = grid.motion_noise;
    for (s, &p) in order.iter().enumerate() {
        model.set_state_name(s, format!("{},{}", p.0, p.1))?;
        if p == dest {
            model.set_end(s, true)?;
            continue;
        }
        for (m, q) in oriented(p) {
            let Some(&t) = index.get(&q) else { continue };
            let transitions = if noise > 0.0 { vec![(t, 1.0 - noise), (s, noise)] } else { vec![(t, 1.0)] };
            let a = model.add_action(s, m.name(), transitions)?;
            moves[s].push(m);
            let target = grid.cell(q.0, q.1);
            rewards.push((
                s,
                a,
                [
                    1.0,
                    f64::from(u8::from(target == Cell::Fire)),
                    f64::from(u8::from(target == Cell::Package)),
                ],
            ));
        }
    }
    let ids = [model.add_reward("dist"), model.add_reward("risk"), model.add_reward("packages")];
    for (s, a, vals) in rewards {
        for (r, v) in ids.iter().zip(vals) {
            model.set_reward(*r, s, a, v)?;
        }
    }
    Ok(GridMdp {
        grid: grid.clone(),
        model,
        cells: order,
        moves,
        index,
    })
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OverlayCell {
    pub x: usize,
    pub y: usize,
    pub actions: Vec<Move>,
    pub permissive: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RouteOverlay {
    pub cells: Vec<OverlayCell>,
    /// Each route is a list of `[x, y]` points from start to destination.
    pub routes: Vec<Vec<[usize; 2]>>,
}

pub enum OverlayInput<'a> {
    Multi(&'a MultiStrategy),
    Single(&'a Strategy),
}

/// Overlay data for a multi-strategy or a single strategy. Only cells
/// reachable under it appear; routes follow successful moves and are
/// listed in lexicographic order of their move sequences.
pub fn render_overlay(g: &GridMdp, input: OverlayInput<'_>) -> Result<RouteOverlay> {
    let n = g.model.num_states();
    let theta = match input {
        OverlayInput::Multi(t) => {
            if t.allowed.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: t.allowed.len(),
                });
            }
            t.clone()
        }
        OverlayInput::Single(sigma) => {
            sigma.check(&g.model)?;
            MultiStrategy::from_strategy(&g.model, sigma)
        }
    };
    for s in 0..n {
        if let Some(&a) = theta.allowed(s).iter().find(|&&a| a >= g.model.num_actions(s)) {
            return Err(Error::ActionOutOfRange { state: s, action: a });
        }
    }
    let reach = reachable_states(&g.model, &theta);
    let mut cells: Vec<OverlayCell> = reach
        .iter()
        .map(|&s| {
            let (x, y) = g.cells[s];
            let actions: Vec<Move> = theta.allowed(s).iter().map(|&a| g.moves[s][a]).collect();
            OverlayCell {
                x,
                y,
                permissive: actions.len() >= 2,
                actions,
            }
        })
        .collect();
    cells.sort_by_key(|c| (c.y, c.x));

    let mut routes = Vec::new();
    let mut path = vec![g.model.initial()];
    trace(g, &theta, &mut path, &mut routes);
    let routes = routes
        .into_iter()
        .map(|p| p.into_iter().map(|s| [g.cells[s].0, g.cells[s].1]).collect())
        .collect();
    Ok(RouteOverlay { cells, routes })
}

fn trace(g: &GridMdp, theta: &MultiStrategy, path: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
    if out.len() >= MAX_ROUTES {
        return;
    }
    let s = *path.last().expect("nonempty");
    if g.model.is_end(s) {
        out.push(path.clone());
        return;
    }
    for &a in theta.allowed(s) {
        let next = g.model.transitions(s, a).iter().find(|&&(t, _)| t != s).map(|&(t, _)| t);
        if let Some(t) = next {
            if !path.contains(&t) {
                path.push(t);
                trace(g, theta, path, out);
                path.pop();
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::analysis::{evaluate_strategy, optimal_values, weighted_value_iteration, Sense, DEFAULT_VI_TOL};
    use crate::mdp::validate_model;
    use crate::preferences::WeightVector;

    fn build(text: &str, noise: f64) -> GridMdp {
        grid_to_mdp(&parse_grid(text).unwrap().with_motion_noise(noise).unwrap()).unwrap()
    }

    #[test]
    fn parse_examples() {
        let g = parse_grid("SD").unwrap();
        assert_eq!((g.width(), g.height()), (2, 1));
        let g = parse_grid("S.\n.D").unwrap();
        assert_eq!((g.width(), g.height()), (2, 2));
        assert_eq!(g.to_string(), "S.\n.D\n");
        assert!(matches!(parse_grid("SS\n.D"), Err(Error::Grid(m)) if m.contains("duplicate start")));
        assert!(parse_grid("S.\nD").is_err());
        assert!(parse_grid("S.X\n..D").is_err());
        assert!(parse_grid("..\n.D").is_err());
        assert!(parse_grid("SD").unwrap().with_motion_noise(1.0).is_err());
    }

    #[test]
    fn corridor_values() {
        let g = build("SD", 0.1);
        assert_eq!(g.model.num_states(), 2);
        assert_eq!(g.model.actions(0)[0].name, "east");
        let sigma = Strategy::new(vec![Some(0), None]);
        assert!((evaluate_strategy(&g.model, &sigma, g.model.reward(0)).unwrap() - 10.0 / 9.0).abs() < 1e-12);

        let g = build("SFD", 0.1);
        let sigma = Strategy::new(vec![Some(0), Some(0), None]);
        let risk = evaluate_strategy(&g.model, &sigma, g.model.reward(1)).unwrap();
        assert!((risk - 10.0 / 9.0).abs() < 1e-12);
    }

    #[test]
    fn unreachable_destination() {
        let g = parse_grid("S#D").unwrap();
        assert!(matches!(grid_to_mdp(&g), Err(Error::Grid(_))));
    }

    #[test]
    fn noiseless_distance_is_bfs_length() {
        let g = build("S..#\n.#..\n...D", 0.0);
        assert!(validate_model(&g.model).is_valid());
        let v = optimal_values(&g.model, &g.model.reward(0).values, None, Sense::Min, 1e-12).unwrap();
        assert_eq!(v[g.model.initial()], 5.0);
    }

    #[test]
    fn open_grids_are_valid_and_acyclic() {
        for text in ["...\nSFD\n...", "S.D\n...", "S..P.\n.#F#.\n.....\n.F#P.\n...FD", "P.F\n.S.\nF.D"] {
            let g = build(text, 0.1);
            assert!(validate_model(&g.model).is_valid(), "{text}");
        }
    }

    #[test]
    fn reflection_preserves_values() {
        let text = "S..P.\n.#F#.\n.....\n.F#P.\n...FD";
        let g = build(text, 0.1);
        let r = grid_to_mdp(&g.grid.reflect_horizontally()).unwrap();
        for w in [[1.0, 0.0, 0.0], [0.2, 0.5, 0.3], [0.0, 0.4, 0.6]] {
            let w = WeightVector::new(w.to_vec()).unwrap();
            let a = weighted_value_iteration(&g.model, &g.property(), &w, DEFAULT_VI_TOL).unwrap();
            let b = weighted_value_iteration(&r.model, &r.property(), &w, DEFAULT_VI_TOL).unwrap();
            let scalar = |p: &[f64]| w.as_slice()[0] * p[0] + w.as_slice()[1] * p[1] - w.as_slice()[2] * p[2];
            assert!((scalar(&a.point) - scalar(&b.point)).abs() < 1e-9);
            if a.ties.is_empty() && b.ties.is_empty() {
                for (x, y) in a.point.iter().zip(&b.point) {
                    assert!((x - y).abs() < 1e-9);
                }
            }
        }
    }

    #[test]
    fn overlay_examples() {
        let g = build("SD", 0.1);
        let o = render_overlay(&g, OverlayInput::Multi(&MultiStrategy::full(&g.model))).unwrap();
        assert_eq!(o.cells.iter().map(|c| c.actions.len()).sum::<usize>(), 1);
        assert!(o.cells.iter().all(|c| !c.permissive));

        let g = build("S.D\n...", 0.1);
        let o = render_overlay(&g, OverlayInput::Multi(&MultiStrategy::full(&g.model))).unwrap();
        let starred: Vec<(usize, usize)> = o.cells.iter().filter(|c| c.permissive).map(|c| (c.x, c.y)).collect();
        assert_eq!(starred, vec![(0, 0), (1, 0)]);
        assert_eq!(o.routes.len(), 3);

        let s0 = g.model.initial();
        let mut choice = vec![None; g.model.num_states()];
        for s in g.model.non_end_states() {
            choice[s] = Some(0);
        }
        choice[s0] = Some(0);
        let sigma = Strategy::new(choice);
        let o = render_overlay(&g, OverlayInput::Single(&sigma)).unwrap();
        assert_eq!(o.routes, vec![vec![[0, 0], [1, 0], [2, 0]]]);
        assert!(o.cells.iter().all(|c| !c.permissive));
        let json = serde_json::to_value(&o).unwrap();
        assert_eq!(json["cells"][0]["actions"], serde_json::json!(["east"]));
    }

    #[test]
    fn overlay_rejects_mismatch() {
        let g = build("SD", 0.1);
        assert!(render_overlay(&g, OverlayInput::Multi(&MultiStrategy::empty(5))).is_err());
    }
}
