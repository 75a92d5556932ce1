//! Renders simulated agents over the extracted background.
//!
//! Agents are flat billboards anchored at the feet, scaled by the grid's
//! local scale, drawn far to near. Obstacle cells can occlude agents
//! standing behind them.

use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geometry::{CellLabel, PerspectiveGrid, Point2};
use crate::media::{FrameSequence, Image, MediaError};
use crate::sim::{SimulationTrace, TraceAgent, TraceFrame};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RenderConfig {
    pub agent_height_world: f64,
    /// Billboard width over height.
    pub agent_aspect: f64,
    pub occlusion_enabled: bool,
    /// Height of the volume an obstacle cell occludes. Zero masks with the
    /// flat cell quadrilateral only.
    pub occluder_height_world: f64,
    /// World distance walked per leg swap.
    pub stride_world: f64,
    /// Tints labelled cells for inspection.
    pub debug_overlay: bool,
}

impl Default for RenderConfig {
    fn default() -> Self {
        Self {
            agent_height_world: 1.7,
            agent_aspect: 0.4,
            occlusion_enabled: true,
            occluder_height_world: 1.7,
            stride_world: 0.7,
            debug_overlay: false,
        }
    }
}

impl RenderConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.agent_height_world > 0.0) {
            return Err("agent height must be positive".into());
        }
        if !(self.agent_aspect > 0.0 && self.agent_aspect <= 1.0) {
            return Err("agent aspect must be in (0, 1]".into());
        }
        if !(self.occluder_height_world >= 0.0 && self.stride_world > 0.0) {
            return Err("occluder height and stride must be non-negative".into());
        }
        Ok(())
    }
}

/// Rendered image plus the number of agents skipped for lying outside the
/// grid.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedFrame {
    pub image: Image,
    pub skipped: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSequence {
    pub sequence: FrameSequence,
    pub skipped: usize,
}

// torso colours chosen far from mid-grey so agents separate from typical
// backgrounds
const PALETTE: [[u8; 3]; 8] = [
    [230, 40, 40],
    [250, 235, 60],
    [25, 25, 110],
    [245, 245, 240],
    [20, 120, 40],
    [255, 150, 20],
    [15, 15, 15],
    [120, 230, 250],
];

fn torso_color(id: u32) -> [u8; 3] {
    PALETTE[id as usize % PALETTE.len()]
}

fn shade(c: [u8; 3], f: f64) -> [u8; 3] {
    c.map(|v| (v as f64 * f).round() as u8)
}

struct Occluder {
    /// Counter-clockwise convex hull in image coordinates.
    hull: Vec<Point2>,
    /// Agents farther than this world depth are hidden inside the hull.
    far_edge: f64,
}

impl Occluder {
    fn contains(&self, p: Point2) -> bool {
        let n = self.hull.len();
        (0..n).all(|t| (self.hull[(t + 1) % n] - self.hull[t]).cross(p - self.hull[t]) >= 0.0)
    }
}

fn convex_hull(mut pts: Vec<Point2>) -> Vec<Point2> {
    pts.sort_by(|a, b| a.x.total_cmp(&b.x).then(a.y.total_cmp(&b.y)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut lower: Vec<Point2> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2
            && (lower[lower.len() - 1] - lower[lower.len() - 2]).cross(p - lower[lower.len() - 2]) <= 0.0
        {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point2> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2
            && (upper[upper.len() - 1] - upper[upper.len() - 2]).cross(p - upper[upper.len() - 2]) <= 0.0
        {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

fn occluders(grid: &PerspectiveGrid, cfg: &RenderConfig) -> Vec<Occluder> {
    if !cfg.occlusion_enabled {
        return Vec::new();
    }
    let depth = grid.cell_size().depth;
    let mut out = Vec::new();
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            if grid.label(r, c) != CellLabel::Obstacle {
                continue;
            }
            let mut pts = Vec::with_capacity(8);
            for (cr, cc) in [(r, c), (r, c + 1), (r + 1, c + 1), (r + 1, c)] {
                let base = grid.corner(cr, cc);
                pts.push(base);
                if cfg.occluder_height_world > 0.0 {
                    if let Ok(s) = grid.local_scale(grid.corner_world(cr, cc)) {
                        pts.push(Point2::new(base.x, base.y - cfg.occluder_height_world * s));
                    }
                }
            }
            out.push(Occluder { hull: convex_hull(pts), far_edge: (r + 1) as f64 * depth });
        }
    }
    out
}

/// Screen-space billboard of one agent.
struct Billboard {
    anchor: Point2,
    height: f64,
    width: f64,
    depth: f64,
    id: u32,
    swapped: bool,
}

fn billboard(grid: &PerspectiveGrid, a: &TraceAgent, cfg: &RenderConfig, swapped: bool) -> Option<Billboard> {
    let p = Point2::new(a.x, a.y);
    let anchor = grid.world_to_image(p).ok()?;
    let height = cfg.agent_height_world * grid.local_scale(p).ok()?;
    Some(Billboard { anchor, height, width: cfg.agent_aspect * height, depth: a.y, id: a.id, swapped })
}

fn draw(
    background: &Image,
    grid: &PerspectiveGrid,
    agents: &[(TraceAgent, bool)],
    cfg: &RenderConfig,
    occ: &[Occluder],
) -> RenderedFrame {
    let mut image = background.clone();
    if cfg.debug_overlay {
        overlay_labels(&mut image, grid);
    }
    let mut boards = Vec::with_capacity(agents.len());
    let mut skipped = 0;
    for (a, swapped) in agents {
        match billboard(grid, a, cfg, *swapped) {
            Some(b) => boards.push(b),
            None => skipped += 1,
        }
    }
    // painter's order: far first
    boards.sort_by(|a, b| b.depth.total_cmp(&a.depth).then(a.id.cmp(&b.id)));
    let (w, h) = image.dims();
    for b in &boards {
        let masks: Vec<&Occluder> = occ.iter().filter(|o| b.depth > o.far_edge).collect();
        let torso = torso_color(b.id);
        let (near_leg, far_leg) = (shade(torso, 0.45), shade(torso, 0.25));
        let x0 = b.anchor.x - b.width / 2.0;
        let x1 = b.anchor.x + b.width / 2.0;
        let y0 = b.anchor.y - b.height;
        let y1 = b.anchor.y;
        let waist = b.anchor.y - 0.45 * b.height;
        let px0 = (x0 - 0.5).ceil().max(0.0) as i64;
        let px1 = ((x1 - 0.5).floor() as i64).min(w as i64 - 1);
        let py0 = (y0 - 0.5).ceil().max(0.0) as i64;
        let py1 = ((y1 - 0.5).floor() as i64).min(h as i64 - 1);
        for py in py0..=py1 {
            let cy = py as f64 + 0.5;
            for px in px0..=px1 {
                let cx = px as f64 + 0.5;
                let centre = Point2::new(cx, cy);
                if masks.iter().any(|o| o.contains(centre)) {
                    continue;
                }
                let color = if cy < waist {
                    torso
                } else if (cx < b.anchor.x) != b.swapped {
                    near_leg
                } else {
                    far_leg
                };
                image.set_rgb(px as u32, py as u32, color);
            }
        }
    }
    RenderedFrame { image, skipped }
}

fn overlay_labels(image: &mut Image, grid: &PerspectiveGrid) {
    let (w, h) = image.dims();
    for r in 0..grid.rows() {
        for c in 0..grid.cols() {
            let tint = match grid.label(r, c) {
                CellLabel::Walkable => continue,
                CellLabel::Obstacle => [255, 0, 0],
                CellLabel::Entrance => [0, 255, 0],
            };
            let hull = Occluder { hull: convex_hull(grid.cell_quad(r, c).to_vec()), far_edge: 0.0 };
            let xs = hull.hull.iter().map(|p| p.x);
            let ys = hull.hull.iter().map(|p| p.y);
            let (xmin, xmax) = xs.fold((f64::MAX, f64::MIN), |(a, b), x| (a.min(x), b.max(x)));
            let (ymin, ymax) = ys.fold((f64::MAX, f64::MIN), |(a, b), y| (a.min(y), b.max(y)));
            for py in (ymin.max(0.0) as u32)..(ymax.min(h as f64).max(0.0).ceil() as u32).min(h) {
                for px in (xmin.max(0.0) as u32)..(xmax.min(w as f64).max(0.0).ceil() as u32).min(w) {
                    if hull.contains(Point2::new(px as f64 + 0.5, py as f64 + 0.5)) {
                        let old = image.pixel(px, py);
                        let mix = [0, 1, 2].map(|k| ((old[k] as u16 * 3 + tint[k] as u16) / 4) as u8);
                        image.set_rgb(px, py, mix);
                    }
                }
            }
        }
    }
}

/// Draws one trace frame over `background`. All agents use the first leg
/// phase.
pub fn render_frame(
    background: &Image,
    grid: &PerspectiveGrid,
    frame: &TraceFrame,
    cfg: &RenderConfig,
) -> RenderedFrame {
    let agents: Vec<(TraceAgent, bool)> = frame.agents.iter().map(|a| (*a, false)).collect();
    draw(background, grid, &agents, cfg, &occluders(grid, cfg))
}

/// Renders `n_frames` frames at the trace's output rate. Frames past the
/// end of the trace show the background only. Leg phases follow the
/// distance each agent has walked.
pub fn render_sequence(
    background: &Image,
    grid: &PerspectiveGrid,
    trace: &SimulationTrace,
    cfg: &RenderConfig,
    n_frames: usize,
) -> Result<RenderedSequence, MediaError> {
    let occ = occluders(grid, cfg);
    let mut walked: HashMap<u32, (f64, f64, f64)> = HashMap::new();
    let mut per_frame: Vec<Vec<(TraceAgent, bool)>> = Vec::with_capacity(n_frames);
    for k in 0..n_frames {
        let Some(frame) = trace.frames.get(k) else {
            per_frame.push(Vec::new());
            continue;
        };
        let agents = frame
            .agents
            .iter()
            .map(|a| {
                let entry = walked.entry(a.id).or_insert((a.x, a.y, 0.0));
                entry.2 += ((a.x - entry.0).powi(2) + (a.y - entry.1).powi(2)).sqrt();
                entry.0 = a.x;
                entry.1 = a.y;
                let swapped = (entry.2 / cfg.stride_world).floor() as u64 % 2 == 1;
                (*a, swapped)
            })
            .collect();
        per_frame.push(agents);
    }
    let rendered: Vec<RenderedFrame> =
        per_frame.par_iter().map(|agents| draw(background, grid, agents, cfg, &occ)).collect();
    let skipped = rendered.iter().map(|r| r.skipped).sum();
    let sequence = FrameSequence::new(rendered.into_iter().map(|r| r.image).collect(), trace.output_fps)?;
    Ok(RenderedSequence { sequence, skipped })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::CellSize;
    use crate::sim::TraceStats;
    use crate::synth::{textured_background, GroundCamera};

    fn scene() -> (Image, PerspectiveGrid) {
        let cam = GroundCamera::new(320, 240, 300.0, 5.0, 40f64.to_radians(), 0.0, Point2::new(0.0, 4.0));
        let grid = PerspectiveGrid::build(&cam.calibration()).unwrap();
        (textured_background(320, 240, 4), grid)
    }

    fn agent(id: u32, x: f64, y: f64) -> TraceAgent {
        TraceAgent { id, x, y, heading: 0.0 }
    }

    fn changed_rows(a: &Image, b: &Image, col: u32) -> usize {
        (0..a.height()).filter(|&y| a.pixel(col, y) != b.pixel(col, y)).count()
    }

    fn world(grid: &PerspectiveGrid, x: f64, y: f64) -> (f64, f64) {
        let (r0, c0) = grid.origin();
        (x + c0 as f64, y + r0 as f64)
    }

    #[test]
    fn empty_frame_is_background() {
        let (bg, grid) = scene();
        let out = render_frame(&bg, &grid, &TraceFrame { t: 0.0, agents: vec![] }, &RenderConfig::default());
        assert_eq!(out.image, bg);
        assert_eq!(out.skipped, 0);
    }

    #[test]
    fn height_follows_local_scale() {
        let (_, grid) = scene();
        let bg = Image::filled_rgb(320, 240, [128, 128, 128]);
        let cfg = RenderConfig { occlusion_enabled: false, ..Default::default() };
        for (x, y) in [(0.5, 1.0), (0.5, 5.0)] {
            let (wx, wy) = world(&grid, x, y);
            let out = render_frame(&bg, &grid, &TraceFrame { t: 0.0, agents: vec![agent(0, wx, wy)] }, &cfg);
            let anchor = grid.world_to_image(Point2::new(wx, wy)).unwrap();
            let rows = changed_rows(&out.image, &bg, anchor.x as u32);
            let expected = cfg.agent_height_world * grid.local_scale(Point2::new(wx, wy)).unwrap();
            assert!((rows as f64 - expected).abs() <= 1.0, "rows {rows} expected {expected}");
        }
    }

    #[test]
    fn background_preserved_outside_billboards() {
        let (bg, grid) = scene();
        let (wx, wy) = world(&grid, 0.5, 3.0);
        let cfg = RenderConfig::default();
        let out = render_frame(&bg, &grid, &TraceFrame { t: 0.0, agents: vec![agent(2, wx, wy)] }, &cfg);
        let anchor = grid.world_to_image(Point2::new(wx, wy)).unwrap();
        let h = cfg.agent_height_world * grid.local_scale(Point2::new(wx, wy)).unwrap();
        let w = cfg.agent_aspect * h;
        for y in 0..240 {
            for x in 0..320 {
                let (cx, cy) = (x as f64 + 0.5, y as f64 + 0.5);
                let inside = (cx - anchor.x).abs() <= w / 2.0 && cy >= anchor.y - h && cy <= anchor.y;
                if !inside {
                    assert_eq!(out.image.pixel(x, y), bg.pixel(x, y));
                }
            }
        }
    }

    #[test]
    fn nearer_agent_drawn_on_top() {
        let (bg, grid) = scene();
        let (wx, near) = world(&grid, 0.5, 2.0);
        let (_, far) = world(&grid, 0.5, 2.6);
        let cfg = RenderConfig::default();
        // id 0 is near, id 1 far; overlap pixel takes the near torso colour
        let frame = TraceFrame { t: 0.0, agents: vec![agent(1, wx, far), agent(0, wx, near)] };
        let out = render_frame(&bg, &grid, &frame, &cfg);
        let a_near = grid.world_to_image(Point2::new(wx, near)).unwrap();
        let h = cfg.agent_height_world * grid.local_scale(Point2::new(wx, near)).unwrap();
        let y = (a_near.y - 0.9 * h) as u32;
        assert_eq!(out.image.pixel(a_near.x as u32, y), &torso_color(0));
        let swapped = TraceFrame { t: 0.0, agents: vec![agent(0, wx, near), agent(1, wx, far)] };
        assert_eq!(render_frame(&bg, &grid, &swapped, &cfg).image, out.image);
    }

    #[test]
    fn out_of_bounds_agents_are_counted() {
        let (bg, grid) = scene();
        let frame = TraceFrame { t: 0.0, agents: vec![agent(0, -5.0, 1.0), agent(1, 1.0, 1e6)] };
        let out = render_frame(&bg, &grid, &frame, &RenderConfig::default());
        assert_eq!(out.skipped, 2);
        assert_eq!(out.image, bg);
    }

    #[test]
    fn obstacle_hides_agent_behind_it() {
        let (bg, mut grid) = scene();
        let (r0, c0) = grid.origin();
        grid.set_label(r0 + 2, c0, CellLabel::Obstacle);
        let (wx, wy) = world(&grid, 0.5, 3.5);
        let frame = TraceFrame { t: 0.0, agents: vec![agent(0, wx, wy)] };
        let on = render_frame(&bg, &grid, &frame, &RenderConfig::default());
        let off = render_frame(&bg, &grid, &frame, &RenderConfig { occlusion_enabled: false, ..Default::default() });
        let anchor = grid.world_to_image(Point2::new(wx, wy)).unwrap();
        let col = anchor.x as u32;
        assert!(changed_rows(&on.image, &bg, col) < changed_rows(&off.image, &bg, col));
        // an agent in front of the obstacle is untouched
        let (_, near) = world(&grid, 0.5, 1.5);
        let front = TraceFrame { t: 0.0, agents: vec![agent(0, wx, near)] };
        let on = render_frame(&bg, &grid, &front, &RenderConfig::default());
        let off = render_frame(&bg, &grid, &front, &RenderConfig { occlusion_enabled: false, ..Default::default() });
        assert_eq!(on.image, off.image);
    }

    #[test]
    fn flat_occluder_masks_only_the_cell() {
        let corners: Vec<Point2> =
            (0..=4).flat_map(|r| (0..=4).map(move |c| Point2::new(c as f64 * 20.0, 90.0 - r as f64 * 20.0))).collect();
        let mut grid =
            PerspectiveGrid::from_corners(4, 4, corners, Point2::new(0.0, -1e9), CellSize::default(), 100, 100)
                .unwrap();
        grid.set_label(0, 1, CellLabel::Obstacle);
        let bg = Image::filled_rgb(100, 100, [128, 128, 128]);
        // tall agent at depth 1.5 whose billboard reaches down into nothing
        // but whose feet sit above the obstacle quad: unaffected
        let cfg = RenderConfig { occluder_height_world: 0.0, ..Default::default() };
        let frame = TraceFrame { t: 0.0, agents: vec![agent(0, 1.5, 1.5)] };
        let with = render_frame(&bg, &grid, &frame, &cfg);
        let without = render_frame(&bg, &grid, &frame, &RenderConfig { occlusion_enabled: false, ..cfg });
        assert_eq!(with.image, without.image);
    }

    #[test]
    fn sequence_is_deterministic_and_sized() {
        let (bg, grid) = scene();
        let (wx, wy) = world(&grid, 0.5, 2.0);
        let frames = (0..6)
            .map(|k| TraceFrame { t: k as f64 / 25.0, agents: vec![agent(0, wx + 0.1 * k as f64, wy)] })
            .collect();
        let trace = SimulationTrace { frames, output_fps: 25.0, stats: TraceStats::default() };
        let cfg = RenderConfig::default();
        let a = render_sequence(&bg, &grid, &trace, &cfg, 8).unwrap();
        let b = render_sequence(&bg, &grid, &trace, &cfg, 8).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.sequence.len(), 8);
        assert_eq!(a.sequence.fps(), 25.0);
        assert_eq!(a.sequence.frames()[7], bg);
        assert!(render_sequence(&bg, &grid, &trace, &cfg, 0).unwrap().sequence.is_empty());
    }
}
