//! The hybrid force model: goal relaxation, distance-based separation and
//! obstacle repulsion, plus predictive collision avoidance.

use crate::geometry::{CellLabel, PerspectiveGrid, Vec2};

use super::{AgentState, SimParams};

/// Added to squared distances so repulsion stays finite at contact.
pub const DISTANCE_EPS: f64 = 0.01;
/// Added to the time to closest approach for the same reason.
pub const TIME_EPS: f64 = 0.1;

/// The individual force terms acting on one agent.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ForceBreakdown {
    pub goal: Vec2,
    pub separation: Vec2,
    pub obstacle: Vec2,
    pub predictive: Vec2,
}

impl ForceBreakdown {
    pub fn total(&self) -> Vec2 {
        self.goal + self.separation + self.obstacle + self.predictive
    }
}

/// Relaxation toward the desired velocity pointing at the current waypoint.
pub fn goal_force(agent: &AgentState, tau: f64) -> Vec2 {
    let desired = (agent.goal() - agent.position).normalized() * agent.desired_speed;
    (desired - agent.velocity) * (1.0 / tau)
}

/// Sum of `k / (d^2 + eps)` repulsions from neighbours closer than `radius`.
pub fn separation_force(agent: &AgentState, neighbors: &[&AgentState], gain: f64, radius: f64) -> Vec2 {
    let mut f = Vec2::ZERO;
    for b in neighbors {
        let away = agent.position - b.position;
        let d = away.norm();
        if d >= radius {
            continue;
        }
        let dir = if d > 0.0 { away * (1.0 / d) } else { tie_break_direction(agent.id, b.id) };
        f += dir * (gain / (d * d + DISTANCE_EPS));
    }
    f
}

/// Deterministic push direction for two agents at exactly the same spot.
fn tie_break_direction(a: u32, b: u32) -> Vec2 {
    let angle = if a < b { 0.0 } else { std::f64::consts::PI };
    Vec2::new(angle.cos(), angle.sin())
}

/// Repulsion from every obstacle cell within `radius`, directed away from
/// the nearest point of the cell's rectangle.
pub fn obstacle_force(position: Vec2, grid: &PerspectiveGrid, gain: f64, radius: f64) -> Vec2 {
    let cs = grid.cell_size();
    let c_lo = ((position.x - radius) / cs.lateral).floor().max(0.0) as usize;
    let r_lo = ((position.y - radius) / cs.depth).floor().max(0.0) as usize;
    let c_hi = (((position.x + radius) / cs.lateral).floor().max(-1.0) as isize).min(grid.cols() as isize - 1);
    let r_hi = (((position.y + radius) / cs.depth).floor().max(-1.0) as isize).min(grid.rows() as isize - 1);
    let mut f = Vec2::ZERO;
    if c_hi < 0 || r_hi < 0 {
        return f;
    }
    for r in r_lo..=r_hi as usize {
        for c in c_lo..=c_hi as usize {
            if grid.label(r, c) != CellLabel::Obstacle {
                continue;
            }
            let (x0, y0) = (c as f64 * cs.lateral, r as f64 * cs.depth);
            let nearest = Vec2::new(position.x.clamp(x0, x0 + cs.lateral), position.y.clamp(y0, y0 + cs.depth));
            let away = position - nearest;
            let d = away.norm();
            if d >= radius {
                continue;
            }
            let dir = if d > 0.0 {
                away * (1.0 / d)
            } else {
                // inside the obstacle: leave through the nearest side
                let center = Vec2::new(x0 + 0.5 * cs.lateral, y0 + 0.5 * cs.depth);
                let rel = position - center;
                if (rel.x / cs.lateral).abs() >= (rel.y / cs.depth).abs() {
                    Vec2::new(rel.x.signum(), 0.0)
                } else {
                    Vec2::new(0.0, rel.y.signum())
                }
            };
            f += dir * (gain / (d * d + DISTANCE_EPS));
        }
    }
    f
}

/// Predictive avoidance: for each neighbour on a course that comes closer
/// than the sum of radii within `horizon` seconds, push sideways with
/// magnitude `gain / (t_ca + eps)`.
pub fn predictive_force(agent: &AgentState, neighbors: &[&AgentState], gain: f64, horizon: f64) -> Vec2 {
    let mut f = Vec2::ZERO;
    for b in neighbors {
        let dp = b.position - agent.position;
        let dv = b.velocity - agent.velocity;
        let dv2 = dv.norm_squared();
        if dv2 < 1e-12 {
            continue;
        }
        let t_ca = -dp.dot(dv) / dv2;
        if !(t_ca > 0.0 && t_ca < horizon) {
            continue;
        }
        let closest = dp + dv * t_ca;
        if closest.norm() >= agent.radius + b.radius {
            continue;
        }
        let dir = if closest.norm() > 1e-9 { -closest.normalized() } else { dv.perp().normalized() };
        f += dir * (gain / (t_ca + TIME_EPS));
    }
    f
}

pub fn force_breakdown(
    agent: &AgentState,
    neighbors: &[&AgentState],
    grid: &PerspectiveGrid,
    params: &SimParams,
) -> ForceBreakdown {
    ForceBreakdown {
        goal: goal_force(agent, params.tau),
        separation: separation_force(agent, neighbors, params.k_sep, params.neighborhood_radius),
        obstacle: obstacle_force(agent.position, grid, params.k_obs, params.neighborhood_radius),
        predictive: predictive_force(agent, neighbors, params.k_pred, params.prediction_horizon),
    }
}

/// One explicit Euler step of the force model.
pub fn step_forces(
    agent: &AgentState,
    neighbors: &[&AgentState],
    grid: &PerspectiveGrid,
    params: &SimParams,
    dt: f64,
) -> AgentState {
    let force = force_breakdown(agent, neighbors, grid, params).total();
    advance(agent, force, grid, params, dt)
}

/// Applies an acceleration, caps the speed, moves the agent and advances
/// its waypoint.
pub(crate) fn advance(
    agent: &AgentState,
    accel: Vec2,
    grid: &PerspectiveGrid,
    params: &SimParams,
    dt: f64,
) -> AgentState {
    let mut next = agent.clone();
    let cap = params.v_cap_factor * agent.desired_speed;
    next.velocity = (agent.velocity + accel * dt).clamp_length(cap);
    let (w, d) = grid.world_extent();
    let p = agent.position + next.velocity * dt;
    next.position = Vec2::new(p.x.clamp(0.0, w), p.y.clamp(0.0, d));
    next.advance_waypoint(params.waypoint_radius);
    next
}
