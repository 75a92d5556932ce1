//! Reynolds-style flocking used as the comparison simulator.

use serde::{Deserialize, Serialize};

use crate::geometry::{PerspectiveGrid, Vec2};

use super::forces::{advance, goal_force, obstacle_force};
use super::{AgentState, SimParams};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoidsParams {
    pub separation_weight: f64,
    pub alignment_weight: f64,
    pub cohesion_weight: f64,
    pub seek_weight: f64,
    /// Neighbours closer than this are steered away from.
    pub separation_radius: f64,
    /// Steering acceleration limit, world units per second squared.
    pub max_force: f64,
}

impl Default for BoidsParams {
    fn default() -> Self {
        Self {
            separation_weight: 1.5,
            alignment_weight: 1.0,
            cohesion_weight: 1.0,
            seek_weight: 1.0,
            separation_radius: 1.0,
            max_force: 4.0,
        }
    }
}

/// Steering acceleration from separation, alignment and cohesion within the
/// neighbourhood radius, plus goal seeking and obstacle repulsion.
pub fn boids_acceleration(
    agent: &AgentState,
    neighbors: &[&AgentState],
    grid: &PerspectiveGrid,
    params: &SimParams,
    boids: &BoidsParams,
) -> Vec2 {
    let mut separation = Vec2::ZERO;
    let mut velocity_sum = Vec2::ZERO;
    let mut position_sum = Vec2::ZERO;
    let mut count = 0usize;
    for b in neighbors {
        let away = agent.position - b.position;
        let d = away.norm();
        if d >= params.neighborhood_radius {
            continue;
        }
        count += 1;
        velocity_sum += b.velocity;
        position_sum += b.position;
        if d < boids.separation_radius && d > 0.0 {
            separation += away * (1.0 / (d * d));
        }
    }
    let mut steer = separation * boids.separation_weight;
    if count > 0 {
        let inv = 1.0 / count as f64;
        steer += (velocity_sum * inv - agent.velocity) * boids.alignment_weight;
        steer += (position_sum * inv - agent.position) * boids.cohesion_weight;
    }
    steer += goal_force(agent, params.tau) * boids.seek_weight;
    steer = steer.clamp_length(boids.max_force);
    steer + obstacle_force(agent.position, grid, params.k_obs, params.neighborhood_radius)
}

pub fn step_boid(
    agent: &AgentState,
    neighbors: &[&AgentState],
    grid: &PerspectiveGrid,
    params: &SimParams,
    boids: &BoidsParams,
    dt: f64,
) -> AgentState {
    let accel = boids_acceleration(agent, neighbors, grid, params, boids);
    advance(agent, accel, grid, params, dt)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{CellSize, Point2};

    fn open_grid() -> PerspectiveGrid {
        let mut corners = Vec::new();
        for r in 0..=20 {
            for c in 0..=20 {
                corners.push(Point2::new(c as f64 * 10.0, 300.0 - r as f64 * 10.0));
            }
        }
        PerspectiveGrid::from_corners(20, 20, corners, Point2::new(0.0, -1e9), CellSize::default(), 300, 300).unwrap()
    }

    #[test]
    fn alignment_pulls_toward_neighbour_heading() {
        let grid = open_grid();
        let params = SimParams::default();
        let boids =
            BoidsParams { cohesion_weight: 0.0, seek_weight: 0.0, separation_weight: 0.0, ..Default::default() };
        let a = AgentState::new(0, Vec2::new(10.0, 10.0), Vec2::new(1.0, 0.0), vec![Vec2::new(18.0, 10.0)], 1.4, 0.25);
        let b = AgentState::new(1, Vec2::new(10.0, 11.5), Vec2::new(0.0, 1.0), vec![Vec2::new(10.0, 18.0)], 1.4, 0.25);
        let acc = boids_acceleration(&a, &[&b], &grid, &params, &boids);
        assert!(acc.x < 0.0 && acc.y > 0.0);
    }

    #[test]
    fn cohesion_pulls_toward_centroid() {
        let grid = open_grid();
        let params = SimParams::default();
        let boids =
            BoidsParams { alignment_weight: 0.0, seek_weight: 0.0, separation_weight: 0.0, ..Default::default() };
        let a = AgentState::new(0, Vec2::new(10.0, 10.0), Vec2::ZERO, vec![Vec2::new(18.0, 10.0)], 1.4, 0.25);
        let b = AgentState::new(1, Vec2::new(11.5, 10.0), Vec2::ZERO, vec![Vec2::new(10.0, 18.0)], 1.4, 0.25);
        let acc = boids_acceleration(&a, &[&b], &grid, &params, &boids);
        assert!(acc.x > 0.0 && acc.y.abs() < 1e-12);
    }

    #[test]
    fn boid_speed_is_capped() {
        let grid = open_grid();
        let params = SimParams::default();
        let a = AgentState::new(0, Vec2::new(10.0, 10.0), Vec2::new(2.0, 0.0), vec![Vec2::new(18.0, 10.0)], 1.4, 0.25);
        let next = step_boid(&a, &[], &grid, &params, &BoidsParams::default(), 1.0);
        assert!(next.velocity.norm() <= 1.5 * 1.4 + 1e-12);
    }
}
