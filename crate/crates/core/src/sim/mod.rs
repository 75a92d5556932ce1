//! Agent simulation over the labelled perspective grid.
//!
//! Two steering models share one engine: the force model
//! ([`SimulatorKind::Csec`]) and Reynolds flocking ([`SimulatorKind::Boids`]).
//! The engine owns spawning, A* routing, fixed-rate stepping and resampling
//! to the output frame rate.

mod astar;
mod boids;
mod forces;
mod trace;

use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{CellLabel, PerspectiveGrid, Vec2};

pub use astar::{plan_path, plan_path_on, Cell, GridPath};
pub use boids::{boids_acceleration, step_boid, BoidsParams};
pub use forces::{
    force_breakdown, goal_force, obstacle_force, predictive_force, separation_force, step_forces, ForceBreakdown,
    DISTANCE_EPS, TIME_EPS,
};
pub use trace::{SimulationTrace, TraceAgent, TraceFrame, TraceStats};

/// Pedestrian walking speed in world units (metres) per second.
pub const BASE_DESIRED_SPEED: f64 = 1.4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    #[error("no path from cell {start:?} to cell {goal:?}")]
    NoPath { start: Cell, goal: Cell },
    #[error("invalid scene: {0}")]
    InvalidScene(String),
    #[error("invalid simulation parameters: {0}")]
    InvalidParams(String),
}

#[derive(Debug, Clone, PartialEq)]
pub struct AgentState {
    pub id: u32,
    pub position: Vec2,
    pub velocity: Vec2,
    /// Remaining waypoints; the last one is the final destination.
    route: Vec<Vec2>,
    route_index: usize,
    pub desired_speed: f64,
    pub radius: f64,
}

impl AgentState {
    /// `route` must be non-empty; its last point is the final destination.
    pub fn new(id: u32, position: Vec2, velocity: Vec2, route: Vec<Vec2>, desired_speed: f64, radius: f64) -> Self {
        assert!(!route.is_empty(), "agent route must contain a destination");
        Self { id, position, velocity, route, route_index: 0, desired_speed, radius }
    }

    /// Current waypoint.
    pub fn goal(&self) -> Vec2 {
        self.route[self.route_index]
    }

    pub fn final_destination(&self) -> Vec2 {
        *self.route.last().unwrap()
    }

    pub fn on_last_leg(&self) -> bool {
        self.route_index + 1 == self.route.len()
    }

    pub fn arrived(&self, radius: f64) -> bool {
        self.on_last_leg() && self.position.distance(self.final_destination()) < radius
    }

    pub(crate) fn advance_waypoint(&mut self, radius: f64) {
        while !self.on_last_leg() && self.position.distance(self.goal()) < radius {
            self.route_index += 1;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SimulatorKind {
    Csec,
    Boids,
}

impl SimulatorKind {
    pub fn name(self) -> &'static str {
        match self {
            SimulatorKind::Csec => "csec",
            SimulatorKind::Boids => "boids",
        }
    }
}

impl FromStr for SimulatorKind {
    type Err = SimError;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "csec" => Ok(SimulatorKind::Csec),
            "boids" | "reynolds" => Ok(SimulatorKind::Boids),
            other => Err(SimError::InvalidParams(format!("unknown simulator {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimParams {
    pub n_agents: u32,
    /// Multiplier on `base_speed`.
    pub speed_scale: f64,
    pub base_speed: f64,
    /// Relative standard deviation of per-agent desired speeds.
    pub speed_jitter: f64,
    pub sim_fps: f64,
    pub seed: u64,
    pub k_sep: f64,
    pub k_obs: f64,
    pub k_pred: f64,
    pub neighborhood_radius: f64,
    /// Goal relaxation time, seconds.
    pub tau: f64,
    pub prediction_horizon: f64,
    pub v_cap_factor: f64,
    pub waypoint_radius: f64,
    pub agent_radius: f64,
    /// Seconds simulated before recording starts; the initial population
    /// arrives during this period.
    pub warmup_s: f64,
    pub boids: BoidsParams,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            n_agents: 10,
            speed_scale: 1.0,
            base_speed: BASE_DESIRED_SPEED,
            speed_jitter: 0.1,
            sim_fps: 50.0,
            seed: 0,
            k_sep: 0.5,
            k_obs: 0.5,
            k_pred: 1.5,
            neighborhood_radius: 2.0,
            tau: 0.5,
            prediction_horizon: 3.0,
            v_cap_factor: 1.5,
            waypoint_radius: 0.5,
            agent_radius: 0.25,
            warmup_s: 15.0,
            boids: BoidsParams::default(),
        }
    }
}

impl SimParams {
    fn validate(&self) -> Result<(), SimError> {
        let bad = |m: &str| Err(SimError::InvalidParams(m.to_string()));
        if !(self.sim_fps > 0.0) {
            return bad("sim_fps must be positive");
        }
        if !(self.speed_scale > 0.0 && self.base_speed > 0.0) {
            return bad("speeds must be positive");
        }
        if [self.k_sep, self.k_obs, self.k_pred].iter().any(|k| !(*k >= 0.0)) {
            return bad("force gains must be non-negative");
        }
        if !(self.tau > 0.0 && self.v_cap_factor >= 1.0 && self.warmup_s >= 0.0) {
            return bad("tau, v_cap_factor or warmup_s out of range");
        }
        if !(self.speed_jitter >= 0.0 && self.speed_jitter < 0.5) {
            return bad("speed_jitter must be in [0, 0.5)");
        }
        Ok(())
    }
}

/// 8-connected groups of entrance cells, in row-major order of discovery.
pub fn entrance_regions(grid: &PerspectiveGrid) -> Vec<Vec<Cell>> {
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut seen = vec![false; rows * cols];
    let mut regions = Vec::new();
    for r in 0..rows {
        for c in 0..cols {
            if seen[r * cols + c] || grid.label(r, c) != CellLabel::Entrance {
                continue;
            }
            let mut region = Vec::new();
            let mut stack = vec![(r, c)];
            seen[r * cols + c] = true;
            while let Some((cr, cc)) = stack.pop() {
                region.push((cr, cc));
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        let (nr, nc) = (cr as isize + dr, cc as isize + dc);
                        if nr < 0 || nc < 0 || nr as usize >= rows || nc as usize >= cols {
                            continue;
                        }
                        let (nr, nc) = (nr as usize, nc as usize);
                        if !seen[nr * cols + nc] && grid.label(nr, nc) == CellLabel::Entrance {
                            seen[nr * cols + nc] = true;
                            stack.push((nr, nc));
                        }
                    }
                }
            }
            region.sort();
            regions.push(region);
        }
    }
    regions
}

struct Engine<'a> {
    grid: &'a PerspectiveGrid,
    params: &'a SimParams,
    kind: SimulatorKind,
    rng: ChaCha8Rng,
    regions: Vec<Vec<Cell>>,
    agents: Vec<AgentState>,
    next_id: u32,
    stats: TraceStats,
}

impl<'a> Engine<'a> {
    fn random_point_in(&mut self, cell: Cell) -> Vec2 {
        let cs = self.grid.cell_size();
        let margin = 0.15;
        let u = self.rng.random_range(margin..1.0 - margin);
        let v = self.rng.random_range(margin..1.0 - margin);
        Vec2::new((cell.1 as f64 + u) * cs.lateral, (cell.0 as f64 + v) * cs.depth)
    }

    fn pick_cell(&mut self, region: usize) -> Cell {
        let cells = &self.regions[region];
        cells[self.rng.random_range(0..cells.len())]
    }

    fn clear_of_others(&self, p: Vec2) -> bool {
        let min = 2.0 * self.params.agent_radius;
        self.agents.iter().all(|a| a.position.distance(p) >= min)
    }

    /// Creates one agent at an entrance, routed to a different entrance
    /// region (or a different cell when there is only one region).
    fn spawn(&mut self) {
        let speed_dist = Normal::new(1.0, self.params.speed_jitter.max(1e-12)).unwrap();
        for _ in 0..10 {
            let from = self.rng.random_range(0..self.regions.len());
            let to = if self.regions.len() > 1 {
                let k = self.rng.random_range(0..self.regions.len() - 1);
                if k >= from {
                    k + 1
                } else {
                    k
                }
            } else {
                from
            };
            let start_cell = self.pick_cell(from);
            let goal_cell = self.pick_cell(to);
            if start_cell == goal_cell {
                continue;
            }
            let Ok(path) = plan_path(self.grid, start_cell, goal_cell) else {
                continue;
            };
            let mut start = self.random_point_in(start_cell);
            for _ in 0..4 {
                if self.clear_of_others(start) {
                    break;
                }
                start = self.random_point_in(start_cell);
            }
            let route: Vec<Vec2> = path.cells[1..].iter().map(|&(r, c)| self.grid.cell_center_world(r, c)).collect();
            let jitter: f64 = if self.params.speed_jitter > 0.0 { speed_dist.sample(&mut self.rng) } else { 1.0 };
            let desired = self.params.base_speed * self.params.speed_scale * jitter.clamp(0.5, 1.5);
            let heading = (route[0] - start).normalized();
            let agent =
                AgentState::new(self.next_id, start, heading * desired, route, desired, self.params.agent_radius);
            self.next_id += 1;
            self.agents.push(agent);
            self.stats.spawned += 1;
            return;
        }
    }

    fn step(&mut self, dt: f64) {
        let snapshot = self.agents.clone();
        let mut next = Vec::with_capacity(snapshot.len());
        for (idx, agent) in snapshot.iter().enumerate() {
            let neighbors: Vec<&AgentState> =
                snapshot.iter().enumerate().filter(|(j, _)| *j != idx).map(|(_, a)| a).collect();
            let updated = match self.kind {
                SimulatorKind::Csec => step_forces(agent, &neighbors, self.grid, self.params, dt),
                SimulatorKind::Boids => step_boid(agent, &neighbors, self.grid, self.params, &self.params.boids, dt),
            };
            next.push(updated);
        }
        let before = next.len();
        next.retain(|a| !a.arrived(self.params.waypoint_radius));
        let arrived = before - next.len();
        self.stats.arrived += arrived as u64;
        self.agents = next;
        for _ in 0..arrived {
            self.spawn();
        }
    }

    fn record(&mut self, t: f64, headings: &mut std::collections::HashMap<u32, f64>) -> TraceFrame {
        let mut agents = Vec::with_capacity(self.agents.len());
        for a in &self.agents {
            let speed = a.velocity.norm();
            let heading = if speed > 1e-9 {
                a.velocity.y.atan2(a.velocity.x)
            } else {
                headings.get(&a.id).copied().unwrap_or(0.0)
            };
            headings.insert(a.id, heading);
            self.stats.agent_frames += 1;
            self.stats.max_speed_ratio = self.stats.max_speed_ratio.max(speed / a.desired_speed);
            if let Some((r, c)) = self.grid.cell_of(a.position) {
                if self.grid.label(r, c) == CellLabel::Obstacle {
                    self.stats.obstacle_violations += 1;
                }
            }
            agents.push(TraceAgent { id: a.id, x: a.position.x, y: a.position.y, heading });
        }
        TraceFrame { t, agents }
    }
}

/// Runs a simulation and samples `n_frames` output frames at `output_fps`.
///
/// Agents enter at entrance cells following a seeded Poisson schedule during
/// the warm-up, leave when they reach their destination and are replaced
/// immediately so the population stays at `n_agents`. The result is
/// bit-identical for identical inputs.
pub fn run_simulation(
    grid: &PerspectiveGrid,
    params: &SimParams,
    n_frames: usize,
    output_fps: f64,
    kind: SimulatorKind,
) -> Result<SimulationTrace, SimError> {
    params.validate()?;
    if !(output_fps > 0.0) {
        return Err(SimError::InvalidParams("output_fps must be positive".into()));
    }
    let regions = entrance_regions(grid);
    if regions.is_empty() {
        return Err(SimError::InvalidScene("grid has no entrance cell".into()));
    }
    if grid.count_label(CellLabel::Walkable) == 0 {
        return Err(SimError::InvalidScene("grid has no walkable cell".into()));
    }
    let dt = 1.0 / params.sim_fps;
    let mut engine = Engine {
        grid,
        params,
        kind,
        rng: ChaCha8Rng::seed_from_u64(params.seed),
        regions,
        agents: Vec::new(),
        next_id: 0,
        stats: TraceStats::default(),
    };

    // arrival step indices of the initial population
    let warmup_steps = (params.warmup_s * params.sim_fps).round() as usize;
    let mut arrivals: Vec<usize> = Vec::with_capacity(params.n_agents as usize);
    if params.n_agents > 0 {
        if warmup_steps == 0 {
            arrivals.resize(params.n_agents as usize, 0);
        } else {
            let exp = Exp::new(params.n_agents as f64 / params.warmup_s).unwrap();
            let mut t = 0.0;
            for _ in 0..params.n_agents {
                t += exp.sample(&mut engine.rng);
                arrivals.push((t * params.sim_fps).floor() as usize);
            }
        }
    }

    let output_steps: Vec<usize> =
        (0..n_frames).map(|k| warmup_steps + (k as f64 / output_fps * params.sim_fps).round() as usize).collect();
    let mut frames = Vec::with_capacity(n_frames);
    let mut headings = std::collections::HashMap::new();
    let mut next_arrival = 0;
    let mut next_output = 0;
    let mut step = 0usize;
    while next_output < output_steps.len() {
        while next_arrival < arrivals.len() && arrivals[next_arrival] <= step {
            engine.spawn();
            next_arrival += 1;
        }
        while next_output < output_steps.len() && output_steps[next_output] == step {
            let t = next_output as f64 / output_fps;
            frames.push(engine.record(t, &mut headings));
            next_output += 1;
        }
        if next_output == output_steps.len() {
            break;
        }
        engine.step(dt);
        step += 1;
    }

    Ok(SimulationTrace { frames, output_fps, stats: engine.stats })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellSize, Point2};

    /// Rectangular fronto-parallel grid with entrances on the left and right
    /// edge columns.
    fn corridor(rows: usize, cols: usize) -> PerspectiveGrid {
        let mut corners = Vec::new();
        for r in 0..=rows {
            for c in 0..=cols {
                corners.push(Point2::new(c as f64 * 10.0, 300.0 - r as f64 * 10.0));
            }
        }
        let mut g =
            PerspectiveGrid::from_corners(rows, cols, corners, Point2::new(0.0, -1e9), CellSize::default(), 400, 400)
                .unwrap();
        for r in 0..rows {
            g.set_label(r, 0, CellLabel::Entrance);
            g.set_label(r, cols - 1, CellLabel::Entrance);
        }
        g
    }

    #[test]
    fn zero_agents_gives_empty_frames() {
        let grid = corridor(5, 12);
        let params = SimParams { n_agents: 0, ..Default::default() };
        let trace = run_simulation(&grid, &params, 40, 25.0, SimulatorKind::Csec).unwrap();
        assert_eq!(trace.duration_frames(), 40);
        assert!(trace.frames.iter().all(|f| f.agents.is_empty()));
        assert!((trace.frames[1].t - 0.04).abs() < 1e-12);
    }

    #[test]
    fn same_seed_same_trace() {
        let grid = corridor(6, 14);
        for kind in [SimulatorKind::Csec, SimulatorKind::Boids] {
            let params = SimParams { n_agents: 8, seed: 11, warmup_s: 4.0, ..Default::default() };
            let a = run_simulation(&grid, &params, 60, 25.0, kind).unwrap();
            let b = run_simulation(&grid, &params, 60, 25.0, kind).unwrap();
            assert_eq!(a, b);
            let c = run_simulation(&grid, &SimParams { seed: 12, ..params }, 60, 25.0, kind).unwrap();
            assert_ne!(a.frames, c.frames);
        }
    }

    #[test]
    fn no_entrance_is_invalid() {
        let mut grid = corridor(3, 5);
        for r in 0..3 {
            grid.set_label(r, 0, CellLabel::Walkable);
            grid.set_label(r, 4, CellLabel::Walkable);
        }
        let r = run_simulation(&grid, &SimParams::default(), 10, 25.0, SimulatorKind::Csec);
        assert!(matches!(r, Err(SimError::InvalidScene(_))));
    }

    #[test]
    fn single_agent_arrives_on_schedule() {
        // one-row corridor, entrances at both ends
        let mut grid = corridor(1, 12);
        grid.set_label(0, 0, CellLabel::Entrance);
        let params = SimParams { n_agents: 1, warmup_s: 0.0, speed_jitter: 0.0, seed: 5, ..Default::default() };
        let trace = run_simulation(&grid, &params, 500, 50.0, SimulatorKind::Csec).unwrap();
        let first = trace.frames[0].agents[0];
        let id = first.id;
        let last_frame = trace.frames.iter().rposition(|f| f.agents.iter().any(|a| a.id == id)).unwrap();
        // the agent despawns within waypoint_radius of the far cell center
        let goal_x = if first.x < 6.0 { 11.5 } else { 0.5 };
        let path_len = (goal_x - first.x).abs() - params.waypoint_radius;
        let expected = path_len / params.base_speed;
        let actual = (last_frame + 1) as f64 / 50.0;
        assert!((actual - expected).abs() / expected < 0.1, "actual {actual} expected {expected}");
    }

    #[test]
    fn speed_cap_and_obstacle_respect() {
        let mut grid = corridor(8, 16);
        for r in 2..6 {
            grid.set_label(r, 8, CellLabel::Obstacle);
        }
        for kind in [SimulatorKind::Csec, SimulatorKind::Boids] {
            let params = SimParams { n_agents: 12, seed: 3, warmup_s: 5.0, ..Default::default() };
            let trace = run_simulation(&grid, &params, 250, 25.0, kind).unwrap();
            let s = trace.stats;
            assert!(s.max_speed_ratio <= params.v_cap_factor + 1e-9);
            assert!(s.agent_frames > 1000);
            assert!((s.obstacle_violations as f64) < 0.01 * s.agent_frames as f64, "{kind:?}: {s:?}");
        }
    }

    #[test]
    fn ids_are_stable_and_unique() {
        let grid = corridor(6, 10);
        let params = SimParams { n_agents: 6, seed: 2, warmup_s: 3.0, ..Default::default() };
        let trace = run_simulation(&grid, &params, 100, 25.0, SimulatorKind::Csec).unwrap();
        for f in &trace.frames {
            let mut ids: Vec<u32> = f.agents.iter().map(|a| a.id).collect();
            let n = ids.len();
            ids.sort();
            ids.dedup();
            assert_eq!(ids.len(), n);
        }
        assert!(trace.frames.last().unwrap().agents.len() >= 5);
    }

    #[test]
    fn entrance_regions_split_by_gaps() {
        let grid = corridor(4, 6);
        let regions = entrance_regions(&grid);
        assert_eq!(regions.len(), 2);
        assert!(regions.iter().all(|r| r.len() == 4));
    }
}
