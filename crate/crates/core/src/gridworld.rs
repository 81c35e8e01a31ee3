//! Grid navigation environments: per-agent slippery grid MDPs composed into a
//! joint reach-avoid game with hazards and inter-agent separation.

use serde::{Deserialize, Serialize};

use crate::conic::Clarabel;
use crate::error::{Error, Result};
use crate::markov_game::{AgentMdp, JointGame};
use crate::occupancy::{solve_penalized_lp, OccupancyVector, DEFAULT_CAP};
use crate::policy::JointPolicy;

/// Grid cell `(x, y)` with `y = 0` the bottom row.
pub type Cell = (usize, usize);

/// Local actions in index order.
pub const ACTIONS: [Move; 5] = [Move::Left, Move::Right, Move::Up, Move::Down, Move::Stay];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Move {
    Left,
    Right,
    Up,
    Down,
    Stay,
}

impl Move {
    fn offset(self) -> (isize, isize) {
        match self {
            Move::Left => (-1, 0),
            Move::Right => (1, 0),
            Move::Up => (0, 1),
            Move::Down => (0, -1),
            Move::Stay => (0, 0),
        }
    }
}

/// Where the slip probability mass goes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SlipModel {
    /// Uniformly over the current cell and its valid compass neighbours,
    /// excluding the intended destination.
    #[default]
    UniformOtherCells,
    /// Uniformly over the valid compass neighbours other than the intended
    /// destination; stays on the intended destination if there are none.
    UniformOtherNeighbors,
    /// Uniformly over the outcomes of the four other actions, blocked moves
    /// staying in place.
    UniformOtherActions,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgentSpec {
    pub start: Cell,
    pub target: Cell,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub walls: Vec<Cell>,
    #[serde(default)]
    pub hazards: Vec<Cell>,
    pub slip: f64,
    pub agents: Vec<AgentSpec>,
    /// Joint states with any pair at Chebyshev distance below this are avoided.
    #[serde(default = "default_collision_radius")]
    pub collision_radius: usize,
    /// Keep wall cells as unreachable local states so every agent has
    /// `width * height` states.
    #[serde(default = "default_keep_walls")]
    pub keep_walls_as_states: bool,
    #[serde(default)]
    pub slip_model: SlipModel,
}

fn default_collision_radius() -> usize {
    1
}

fn default_keep_walls() -> bool {
    true
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::InvalidModel("grid must be non-empty".into()));
        }
        if !(0.0..=1.0).contains(&self.slip) {
            return Err(Error::InvalidParameter(format!("slip {} outside [0, 1]", self.slip)));
        }
        if self.agents.is_empty() {
            return Err(Error::InvalidModel("grid needs at least one agent".into()));
        }
        for c in self.walls.iter().chain(&self.hazards) {
            if !self.in_bounds(*c) {
                return Err(Error::InvalidModel(format!("cell {c:?} is outside the grid")));
            }
        }
        for (i, agent) in self.agents.iter().enumerate() {
            for (what, c) in [("start", agent.start), ("target", agent.target)] {
                if !self.in_bounds(c) {
                    return Err(Error::InvalidModel(format!(
                        "agent {i} {what} {c:?} is outside the grid"
                    )));
                }
                if self.walls.contains(&c) {
                    return Err(Error::InvalidModel(format!("agent {i} {what} {c:?} is a wall")));
                }
                if self.hazards.contains(&c) {
                    return Err(Error::InvalidModel(format!("agent {i} {what} {c:?} is a hazard")));
                }
            }
        }
        Ok(())
    }

    fn in_bounds(&self, (x, y): Cell) -> bool {
        x < self.width && y < self.height
    }

    pub fn is_open(&self, c: Cell) -> bool {
        self.in_bounds(c) && !self.walls.contains(&c)
    }

    fn shifted(&self, (x, y): Cell, m: Move) -> Option<Cell> {
        let (dx, dy) = m.offset();
        let nx = x.checked_add_signed(dx)?;
        let ny = y.checked_add_signed(dy)?;
        let c = (nx, ny);
        self.is_open(c).then_some(c)
    }

    /// Local state index to cell, in row-major order from the bottom row.
    pub fn local_cells(&self) -> Vec<Cell> {
        let mut cells = Vec::with_capacity(self.width * self.height);
        for y in 0..self.height {
            for x in 0..self.width {
                if self.keep_walls_as_states || !self.walls.contains(&(x, y)) {
                    cells.push((x, y));
                }
            }
        }
        cells
    }

    pub fn local_index(&self, c: Cell) -> Option<usize> {
        self.local_cells().iter().position(|&d| d == c)
    }

    /// Distribution over destination cells for `action` taken at `cell`.
    pub fn move_distribution(&self, cell: Cell, action: Move) -> Vec<(Cell, f64)> {
        let intended = self.shifted(cell, action).unwrap_or(cell);
        let mut out: Vec<(Cell, f64)> = Vec::new();
        let mut add = |c: Cell, p: f64| {
            if p <= 0.0 {
                return;
            }
            match out.iter_mut().find(|(d, _)| *d == c) {
                Some(entry) => entry.1 += p,
                None => out.push((c, p)),
            }
        };
        match self.slip_model {
            SlipModel::UniformOtherCells => {
                let others: Vec<Cell> = [Move::Left, Move::Right, Move::Up, Move::Down]
                    .iter()
                    .filter_map(|&m| self.shifted(cell, m))
                    .chain(std::iter::once(cell))
                    .filter(|&c| c != intended)
                    .collect();
                if others.is_empty() || self.slip == 0.0 {
                    add(intended, 1.0);
                } else {
                    add(intended, 1.0 - self.slip);
                    let share = self.slip / others.len() as f64;
                    for c in others {
                        add(c, share);
                    }
                }
            }
            SlipModel::UniformOtherNeighbors => {
                let others: Vec<Cell> = [Move::Left, Move::Right, Move::Up, Move::Down]
                    .iter()
                    .filter_map(|&m| self.shifted(cell, m))
                    .filter(|&c| c != intended)
                    .collect();
                if others.is_empty() || self.slip == 0.0 {
                    add(intended, 1.0);
                } else {
                    add(intended, 1.0 - self.slip);
                    let share = self.slip / others.len() as f64;
                    for c in others {
                        add(c, share);
                    }
                }
            }
            SlipModel::UniformOtherActions => {
                add(intended, 1.0 - self.slip);
                let share = self.slip / (ACTIONS.len() - 1) as f64;
                for &m in ACTIONS.iter().filter(|&&m| m != action) {
                    add(self.shifted(cell, m).unwrap_or(cell), share);
                }
            }
        }
        out
    }

    /// Five-action grid MDP of agent `agent_index`.
    pub fn build_agent_mdp(&self, agent_index: usize) -> Result<AgentMdp> {
        self.validate()?;
        let agent = self.agents.get(agent_index).ok_or(Error::IndexOutOfRange {
            what: "agent",
            index: agent_index,
            bound: self.agents.len(),
        })?;
        let cells = self.local_cells();
        let index_of = |c: Cell| cells.iter().position(|&d| d == c).expect("open cell has a state");
        let mut kernel = Vec::with_capacity(cells.len() * ACTIONS.len());
        for &cell in &cells {
            for &m in &ACTIONS {
                kernel.push(
                    self.move_distribution(cell, m)
                        .into_iter()
                        .map(|(c, p)| (index_of(c), p))
                        .collect(),
                );
            }
        }
        AgentMdp::new(cells.len(), index_of(agent.start), ACTIONS.len(), kernel)
    }

    /// Joint game: target is the tuple of agent targets; avoid is any agent on
    /// a hazard or any two agents closer than `collision_radius`.
    pub fn build_game(&self) -> Result<JointGame> {
        self.validate()?;
        let agents = (0..self.agents.len())
            .map(|i| self.build_agent_mdp(i))
            .collect::<Result<Vec<_>>>()?;
        let cells = self.local_cells();
        let targets: Vec<usize> = self
            .agents
            .iter()
            .map(|a| cells.iter().position(|&c| c == a.target).expect("target is open"))
            .collect();
        let hazard: Vec<bool> = cells.iter().map(|c| self.hazards.contains(c)).collect();
        let radius = self.collision_radius;
        JointGame::from_predicates(
            agents,
            |s| s == targets.as_slice(),
            |s| {
                if s.iter().any(|&c| hazard[c]) {
                    return true;
                }
                for i in 0..s.len() {
                    for j in i + 1..s.len() {
                        if chebyshev(cells[s[i]], cells[s[j]]) < radius {
                            return true;
                        }
                    }
                }
                false
            },
        )
    }
}

/// Per-step cost of a planned route.
const ROUTE_STEP_COST: f64 = 0.01;
/// Extra per-step cost near cells a higher-priority teammate plans to use.
const ROUTE_CROWD_COST: f64 = 0.05;

impl GridSpec {
    /// Single-agent route to the agent's own target that ignores teammates
    /// but pays extra for time spent near `crowded` cells. Returns per-cell
    /// action distributions (indexed like `local_cells`) and the most likely
    /// path.
    fn plan_route(&self, agent_index: usize, crowded: &[Cell]) -> Result<(Vec<[f64; 5]>, Vec<Cell>)> {
        let mut one = self.clone();
        one.agents = vec![self.agents[agent_index].clone()];
        one.keep_walls_as_states = true;
        let game = one.build_game()?.augment_with_end_state()?;
        let cells = self.local_cells();
        let grid = one.local_cells();
        let radius = self.collision_radius.max(1);
        let cost: Vec<f64> = grid
            .iter()
            .map(|&c| {
                let near = crowded.iter().any(|&r| chebyshev(r, c) < radius);
                ROUTE_STEP_COST + if near { ROUTE_CROWD_COST } else { 0.0 }
            })
            .collect();
        let occupancy = solve_penalized_lp(&game, DEFAULT_CAP, &cost, &Clarabel::default())?;
        let target = self.agents[agent_index].target;
        let stay = Move::Stay as usize;
        let rows: Vec<[f64; 5]> = cells
            .iter()
            .map(|&c| {
                let mut row = [0.0; 5];
                let k = grid.iter().position(|&d| d == c).expect("same grid");
                let occ = &occupancy.row(k)[..ACTIONS.len()];
                let total: f64 = occ.iter().map(|v| v.max(0.0)).sum();
                if c != target && total > 1e-9 {
                    for (dst, v) in row.iter_mut().zip(occ) {
                        *dst = v.max(0.0) / total;
                    }
                } else {
                    row[stay] = 1.0;
                }
                row
            })
            .collect();
        let mut path = vec![self.agents[agent_index].start];
        let mut here = path[0];
        while here != target {
            let k = cells.iter().position(|&d| d == here).expect("path stays on open cells");
            let best = (0..ACTIONS.len())
                .max_by(|&a, &b| rows[k][a].total_cmp(&rows[k][b]))
                .expect("five actions");
            here = self.shifted(here, ACTIONS[best]).unwrap_or(here);
            if path.contains(&here) {
                break;
            }
            path.push(here);
        }
        Ok((rows, path))
    }

    /// [`Self::prioritized_route_policy_in_order`] in agent index order.
    pub fn prioritized_route_policy(&self, mix: f64) -> Result<JointPolicy> {
        let order: Vec<usize> = (0..self.agents.len()).collect();
        self.prioritized_route_policy_in_order(mix, &order)
    }

    /// Product of per-agent route policies planned one agent at a time in
    /// `order`: each agent pays extra for steps near the most likely paths of
    /// the agents planned before it. Every local policy is mixed with the
    /// uniform one at weight `mix`.
    pub fn prioritized_route_policy_in_order(&self, mix: f64, order: &[usize]) -> Result<JointPolicy> {
        self.validate()?;
        if !(mix > 0.0 && mix <= 1.0) {
            return Err(Error::InvalidParameter(format!("mix {mix} outside (0, 1]")));
        }
        let mut sorted = order.to_vec();
        sorted.sort_unstable();
        if sorted != (0..self.agents.len()).collect::<Vec<_>>() {
            return Err(Error::InvalidParameter(format!(
                "{order:?} is not an ordering of the agents"
            )));
        }
        let game = self.build_game()?;
        let mut crowded: Vec<Cell> = Vec::new();
        let mut locals = vec![Vec::new(); self.agents.len()];
        for &i in order {
            let (rows, path) = self.plan_route(i, &crowded)?;
            crowded.extend(path);
            locals[i] = rows;
        }
        let n = game.num_product_states();
        let m = game.num_joint_actions();
        let k = self.agents.len();
        let uniform = mix / ACTIONS.len() as f64;
        let mut probs = vec![0.0; n * m];
        let mut states = vec![0; k];
        let mut actions = vec![0; k];
        for s in 0..n {
            game.state_radix().decode_into(s, &mut states);
            for a in 0..m {
                game.action_radix().decode_into(a, &mut actions);
                probs[s * m + a] = (0..k)
                    .map(|i| (1.0 - mix) * locals[i][states[i]][actions[i]] + uniform)
                    .product();
            }
        }
        JointPolicy::from_rows(n, m, probs)
    }
}

/// Occupancy of one agent in one cell, summed over teammates and ordinary
/// actions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatmapRow {
    pub agent: usize,
    pub x: usize,
    pub y: usize,
    pub occupancy: f64,
}

impl GridSpec {
    /// Per-agent cell occupancy of joint occupancy `x` over the game built
    /// from this spec, one row per agent and local cell.
    pub fn heatmap(&self, game: &JointGame, x: &OccupancyVector) -> Result<Vec<HeatmapRow>> {
        let cells = self.local_cells();
        let k = self.agents.len();
        if game.num_agents() != k || game.agents().iter().any(|a| a.num_states() != cells.len()) {
            return Err(Error::InvalidParameter("game was not built from this grid".into()));
        }
        let n = game.num_product_states();
        let m = game.num_joint_actions();
        if x.num_states() < n || x.width() < m {
            return Err(Error::InvalidParameter("occupancy does not match the game".into()));
        }
        let mut totals = vec![vec![0.0; cells.len()]; k];
        let mut digits = vec![0; k];
        for s in 0..n {
            let mass: f64 = x.row(s)[..m].iter().sum();
            if mass == 0.0 {
                continue;
            }
            game.state_radix().decode_into(s, &mut digits);
            for (i, &d) in digits.iter().enumerate() {
                totals[i][d] += mass;
            }
        }
        Ok(totals
            .into_iter()
            .enumerate()
            .flat_map(|(agent, row)| {
                cells
                    .iter()
                    .zip(row)
                    .map(move |(&(x, y), occupancy)| HeatmapRow { agent, x, y, occupancy })
            })
            .collect())
    }
}

/// CSV with columns `agent, x, y, occupancy`.
pub fn write_heatmap_csv<W: std::io::Write>(rows: &[HeatmapRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["agent", "x", "y", "occupancy"])?;
    for r in rows {
        w.write_record([
            r.agent.to_string(),
            r.x.to_string(),
            r.y.to_string(),
            format!("{:.12}", r.occupancy),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_heatmap_csv<R: std::io::Read>(input: R) -> Result<Vec<HeatmapRow>> {
    csv::Reader::from_reader(input)
        .deserialize()
        .map(|r| r.map_err(Error::from))
        .collect()
}

fn chebyshev(a: Cell, b: Cell) -> usize {
    a.0.abs_diff(b.0).max(a.1.abs_diff(b.1))
}

/// Two robots crossing a 5×5 map split by a mountain ridge with a lake on top.
pub fn two_agent_spec(slip: f64) -> GridSpec {
    GridSpec {
        width: 5,
        height: 5,
        walls: vec![(2, 0), (2, 2), (2, 4)],
        hazards: vec![(0, 4), (1, 4), (3, 4)],
        slip,
        agents: vec![
            AgentSpec {
                start: (4, 0),
                target: (1, 0),
            },
            AgentSpec {
                start: (0, 0),
                target: (3, 0),
            },
        ],
        collision_radius: 1,
        keep_walls_as_states: true,
        slip_model: SlipModel::default(),
    }
}

/// Three robots swapping corners of an open 3×3 grid.
pub fn three_agent_spec(slip: f64) -> GridSpec {
    GridSpec {
        width: 3,
        height: 3,
        walls: Vec::new(),
        hazards: Vec::new(),
        slip,
        agents: vec![
            AgentSpec {
                start: (2, 0),
                target: (0, 2),
            },
            AgentSpec {
                start: (0, 2),
                target: (2, 0),
            },
            AgentSpec {
                start: (2, 2),
                target: (0, 0),
            },
        ],
        collision_radius: 1,
        keep_walls_as_states: true,
        slip_model: SlipModel::default(),
    }
}

pub fn build_two_agent_navigation(slip: f64) -> Result<JointGame> {
    two_agent_spec(slip).build_game()
}

pub fn build_three_agent_navigation(slip: f64) -> Result<JointGame> {
    three_agent_spec(slip).build_game()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn prob_to(dist: &[(Cell, f64)], c: Cell) -> f64 {
        dist.iter().find(|(d, _)| *d == c).map_or(0.0, |x| x.1)
    }

    #[test]
    fn interior_up_move_default() {
        let spec = two_agent_spec(0.05);
        let d = spec.move_distribution((1, 2), Move::Up);
        assert!((prob_to(&d, (1, 3)) - 0.95).abs() < 1e-15);
        for c in [(0, 2), (1, 1), (1, 2)] {
            assert!((prob_to(&d, c) - 0.05 / 3.0).abs() < 1e-15);
        }
        // (2, 2) is a wall
        assert_eq!(prob_to(&d, (2, 2)), 0.0);
        let stay = spec.move_distribution((1, 1), Move::Stay);
        assert!((prob_to(&stay, (1, 1)) - 0.95).abs() < 1e-15);
        assert!((prob_to(&stay, (2, 1)) - 0.05 / 4.0).abs() < 1e-15);
    }

    #[test]
    fn interior_up_move() {
        let spec = GridSpec {
            walls: vec![],
            hazards: vec![],
            slip_model: SlipModel::UniformOtherNeighbors,
            ..two_agent_spec(0.05)
        };
        let d = spec.move_distribution((2, 2), Move::Up);
        assert!((prob_to(&d, (2, 3)) - 0.95).abs() < 1e-15);
        for c in [(1, 2), (3, 2), (2, 1)] {
            assert!((prob_to(&d, c) - 0.05 / 3.0).abs() < 1e-15);
        }
        assert_eq!(d.len(), 4);
    }

    #[test]
    fn corner_off_grid_move() {
        let spec = GridSpec {
            slip_model: SlipModel::UniformOtherNeighbors,
            ..two_agent_spec(0.05)
        };
        let d = spec.move_distribution((0, 0), Move::Left);
        assert!((prob_to(&d, (0, 0)) - 0.95).abs() < 1e-15);
        assert!((prob_to(&d, (1, 0)) - 0.025).abs() < 1e-15);
        assert!((prob_to(&d, (0, 1)) - 0.025).abs() < 1e-15);
    }

    #[test]
    fn walls_block_moves() {
        let spec = two_agent_spec(0.0);
        // (1, 0) moving right runs into the wall at (2, 0)
        assert_eq!(spec.move_distribution((1, 0), Move::Right), vec![((1, 0), 1.0)]);
    }

    #[test]
    fn zero_slip_is_deterministic() {
        let spec = two_agent_spec(0.0);
        let agent = spec.build_agent_mdp(0).unwrap();
        for s in 0..agent.num_states() {
            for a in 0..agent.num_actions() {
                assert_eq!(agent.successors(s, a).len(), 1);
            }
        }
    }

    #[test]
    fn state_counts() {
        let spec = two_agent_spec(0.05);
        assert_eq!(spec.build_agent_mdp(0).unwrap().num_states(), 25);
        let reachable_only = GridSpec {
            keep_walls_as_states: false,
            ..spec
        };
        assert_eq!(reachable_only.build_agent_mdp(0).unwrap().num_states(), 22);
        let three = build_three_agent_navigation(0.05).unwrap();
        assert_eq!(three.num_product_states(), 729);
        assert_eq!(three.num_joint_actions(), 125);
    }

    #[test]
    fn two_agent_sets() {
        let spec = two_agent_spec(0.05);
        let game = spec.build_game().unwrap();
        let idx = |c| spec.local_index(c).unwrap();
        let radix = game.state_radix();
        assert!(game.is_target(radix.encode(&[idx((1, 0)), idx((3, 0))])));
        for c in [(0, 0), (3, 3), (4, 4)] {
            assert!(game.is_avoid(radix.encode(&[idx(c), idx(c)])));
        }
        assert!(game.is_avoid(radix.encode(&[idx((0, 4)), idx((0, 0))])));
        assert!(!game.is_avoid(game.initial_state()));
    }

    #[test]
    fn three_agent_start_is_safe() {
        let game = build_three_agent_navigation(0.05).unwrap();
        assert!(!game.is_avoid(game.initial_state()));
        assert!(!game.is_target(game.initial_state()));
    }

    #[test]
    fn rejects_start_in_wall() {
        let mut spec = two_agent_spec(0.05);
        spec.agents[0].start = (2, 0);
        assert!(spec.build_agent_mdp(0).is_err());
    }

    #[test]
    fn heatmap_of_a_corridor() {
        let spec = GridSpec {
            width: 3,
            height: 1,
            walls: Vec::new(),
            hazards: Vec::new(),
            slip: 0.0,
            agents: vec![AgentSpec {
                start: (0, 0),
                target: (2, 0),
            }],
            collision_radius: 1,
            keep_walls_as_states: true,
            slip_model: SlipModel::default(),
        };
        let game = spec.build_game().unwrap().augment_with_end_state().unwrap();
        let right = Move::Right as usize;
        let mut x = OccupancyVector::zeros(&game);
        x.set(0, right, 1.0);
        x.set(1, right, 1.0);
        let rows = spec.heatmap(&game, &x).unwrap();
        let occ: Vec<f64> = rows.iter().map(|r| r.occupancy).collect();
        assert_eq!(occ, vec![1.0, 1.0, 0.0]);
        let mut buf = Vec::new();
        write_heatmap_csv(&rows, &mut buf).unwrap();
        assert_eq!(read_heatmap_csv(buf.as_slice()).unwrap(), rows);
    }
}
